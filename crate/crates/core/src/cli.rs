//! Command-line front end.
//!
//! Exit codes: 0 success, 1 usage or I/O error, 2 protocol abort or failed suite.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::adversary::AdversarySpec;
use crate::analysis::{
    run_experiment, run_suite, AggregateReport, Checklist, ExperimentPlan, SCHEMA_VERSION,
};
use crate::protocol::{Protocol, DEFAULT_MULTI_PHOTON_THRESHOLD, DEFAULT_SIGNIFICANCE};
use crate::quantum::{make_ghz_like, outcome_distribution, Measurement, Slot};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DETECTED: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "sqss",
    version,
    about = "GHZ-like semi-quantum secret sharing simulator"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Execute one experiment plan and write its aggregate report.
    Run(RunArgs),
    /// Run the acceptance suite and write the checklist.
    Suite(SuiteArgs),
    /// Print an exact outcome distribution from the built-in catalogue.
    Oracle(OracleArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ProtocolArg {
    Randomization,
    MeasureResend,
}

impl From<ProtocolArg> for Protocol {
    fn from(p: ProtocolArg) -> Protocol {
        match p {
            ProtocolArg::Randomization => Protocol::RandomizationBased,
            ProtocolArg::MeasureResend => Protocol::MeasureResend,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum AdversaryArg {
    None,
    InterceptResend,
    TrojanHorse,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
pub enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Clone, Debug, Args)]
pub struct OutputArgs {
    /// Write to this file instead of standard output.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Clone, Debug, Args)]
pub struct RunArgs {
    #[arg(long, value_enum, default_value_t = ProtocolArg::Randomization)]
    pub protocol: ProtocolArg,
    /// Triplets per run.
    #[arg(long = "N", default_value_t = 1000)]
    pub triplets: usize,
    #[arg(long, default_value_t = 100)]
    pub runs: u64,
    #[arg(long, value_enum, default_value_t = AdversaryArg::None)]
    pub adversary: AdversaryArg,
    /// Case-3 triplets the intercept-resend attacker lets through.
    #[arg(long, default_value_t = 0)]
    pub m: usize,
    #[arg(long, default_value_t = 1)]
    pub spies_per_slot: usize,
    /// Enable the case-3 occurrence test.
    #[arg(long)]
    pub solution1: bool,
    #[arg(long, default_value_t = DEFAULT_SIGNIFICANCE)]
    pub significance: f64,
    /// Enable wavelength filters and photon number splitters.
    #[arg(long)]
    pub solution2: bool,
    /// Multi-photon rate above which an agent restarts.
    #[arg(long, default_value_t = DEFAULT_MULTI_PHOTON_THRESHOLD)]
    pub threshold: f64,
    #[arg(long, default_value_t = 0.0)]
    pub error_threshold: f64,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Include per-triplet records and event logs.
    #[arg(long)]
    pub trace: bool,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Clone, Debug, Args)]
pub struct SuiteArgs {
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum OracleEntry {
    /// Triple-Z measurement of the GHZ-like state.
    GhzLikeZzz,
    /// Bob's Z outcome with Alice's Bell outcome on slots 1 and 3.
    Case2Conditional,
    /// Charlie's Z outcome with Alice's Bell outcome on slots 1 and 2.
    Case3Conditional,
    /// Alice's joint measurement of an untouched triplet.
    JointOnPsiPrime,
}

impl OracleEntry {
    pub fn plan(self) -> Vec<Measurement> {
        match self {
            OracleEntry::GhzLikeZzz => vec![
                Measurement::Z(Slot::One),
                Measurement::Z(Slot::Two),
                Measurement::Z(Slot::Three),
            ],
            OracleEntry::Case2Conditional => vec![
                Measurement::Z(Slot::Two),
                Measurement::Bell(Slot::One, Slot::Three),
            ],
            OracleEntry::Case3Conditional => vec![
                Measurement::Z(Slot::Three),
                Measurement::Bell(Slot::One, Slot::Two),
            ],
            OracleEntry::JointOnPsiPrime => vec![Measurement::Joint],
        }
    }

    fn name(self) -> String {
        self.to_possible_value()
            .expect("no skipped variants")
            .get_name()
            .to_owned()
    }
}

#[derive(Clone, Debug, Args)]
pub struct OracleArgs {
    #[arg(value_enum)]
    pub entry: OracleEntry,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("serialization failed: {0}")]
    Serialize(String),
}

impl RunArgs {
    pub fn plan(&self) -> ExperimentPlan {
        let adversary = match self.adversary {
            AdversaryArg::None => AdversarySpec::None,
            AdversaryArg::InterceptResend => AdversarySpec::InterceptResend {
                allowed_case3: self.m,
            },
            AdversaryArg::TrojanHorse => AdversarySpec::TrojanHorse {
                spies_per_slot: self.spies_per_slot,
            },
        };
        let mut plan =
            ExperimentPlan::new(self.protocol.into(), self.triplets, self.runs, self.seed)
                .with_adversary(adversary);
        plan.error_threshold = self.error_threshold;
        plan.trace = self.trace;
        if self.solution1 {
            plan = plan.with_solution1(self.significance);
        }
        if self.solution2 {
            plan = plan.with_solution2(self.threshold);
        }
        plan
    }
}

/// Flat per-run row of a CSV report.
#[derive(Serialize)]
struct RunRow<'a> {
    run: usize,
    protocol: String,
    adversary: &'a str,
    triplets: usize,
    case1: usize,
    case2: usize,
    case3: usize,
    case4: usize,
    checked: usize,
    inconsistent: usize,
    error_rate: f64,
    case3_occurrence: f64,
    case3_p_value: Option<f64>,
    pass: bool,
    abort_reason: Option<String>,
    completed: bool,
    key_length: usize,
    key_relation_holds: Option<bool>,
    flagged_by_filters: usize,
    attack_succeeded: Option<bool>,
    bits_recovered: Option<usize>,
    share_bit_mismatches: Option<usize>,
}

fn adversary_name(spec: &AdversarySpec) -> &'static str {
    match spec {
        AdversarySpec::None => "none",
        AdversarySpec::InterceptResend { .. } => "intercept-resend",
        AdversarySpec::TrojanHorse { .. } => "trojan-horse",
    }
}

fn report_csv(report: &AggregateReport) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let adversary = adversary_name(&report.plan.adversary);
    for (i, r) in report.runs.iter().enumerate() {
        let a = r.adversary.as_ref();
        w.serialize(RunRow {
            run: i,
            protocol: r.protocol.to_string(),
            adversary,
            triplets: r.triplets,
            case1: r.case_counts[0],
            case2: r.case_counts[1],
            case3: r.case_counts[2],
            case4: r.case_counts[3],
            checked: r.verdict.checked,
            inconsistent: r.verdict.inconsistent,
            error_rate: r.verdict.error_rate,
            case3_occurrence: r.verdict.case3_occurrence,
            case3_p_value: r.verdict.case3_p_value,
            pass: r.verdict.pass,
            abort_reason: r.verdict.abort_reason.map(|x| format!("{x:?}")),
            completed: r.completed,
            key_length: r.keys.as_ref().map_or(0, |k| k.alice.len()),
            key_relation_holds: r.key_relation_holds,
            flagged_by_filters: r.photons.flagged_by_filters,
            attack_succeeded: a.map(|a| a.outcome.succeeded),
            bits_recovered: a.map(|a| a.outcome.bits_recovered),
            share_bit_mismatches: a.and_then(|a| a.outcome.share_bit_mismatches),
        })
        .map_err(|e| CliError::Serialize(e.to_string()))?;
    }
    w.into_inner()
        .map_err(|e| CliError::Serialize(e.to_string()))
}

fn checklist_csv(list: &Checklist) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for item in &list.items {
        w.serialize(item)
            .map_err(|e| CliError::Serialize(e.to_string()))?;
    }
    w.into_inner()
        .map_err(|e| CliError::Serialize(e.to_string()))
}

fn json<T: Serialize>(value: &T) -> Result<Vec<u8>, CliError> {
    let mut bytes =
        serde_json::to_vec_pretty(value).map_err(|e| CliError::Serialize(e.to_string()))?;
    bytes.push(b'\n');
    Ok(bytes)
}

fn emit(out: &OutputArgs, bytes: &[u8], stdout: &mut dyn Write) -> Result<(), CliError> {
    match &out.output {
        Some(path) => fs::write(path, bytes).map_err(|source| CliError::Io {
            path: path.display().to_string(),
            source,
        }),
        None => stdout.write_all(bytes).map_err(|source| CliError::Io {
            path: "<stdout>".into(),
            source,
        }),
    }
}

#[derive(Serialize)]
struct OracleTable {
    schema_version: u32,
    entry: String,
    plan: Vec<Measurement>,
    distribution: std::collections::BTreeMap<String, f64>,
}

fn cmd_run(args: &RunArgs, stdout: &mut dyn Write) -> Result<i32, CliError> {
    let report = run_experiment(&args.plan()).map_err(|e| CliError::Usage(e.to_string()))?;
    let bytes = match args.out.format {
        Format::Json => json(&report)?,
        Format::Csv => report_csv(&report)?,
    };
    emit(&args.out, &bytes, stdout)?;
    Ok(if report.tally.aborted > 0 {
        EXIT_DETECTED
    } else {
        EXIT_OK
    })
}

fn cmd_suite(args: &SuiteArgs, stdout: &mut dyn Write) -> Result<i32, CliError> {
    let list = run_suite(args.seed);
    let bytes = match args.out.format {
        Format::Json => json(&list)?,
        Format::Csv => checklist_csv(&list)?,
    };
    emit(&args.out, &bytes, stdout)?;
    Ok(if list.all_pass() {
        EXIT_OK
    } else {
        EXIT_DETECTED
    })
}

/// Printed probabilities are rounded to this many decimals to drop
/// floating-point noise from amplitude products.
const ORACLE_DECIMALS: i32 = 12;

fn cmd_oracle(args: &OracleArgs, stdout: &mut dyn Write) -> Result<i32, CliError> {
    let plan = args.entry.plan();
    let scale = 10f64.powi(ORACLE_DECIMALS);
    let table: std::collections::BTreeMap<String, f64> =
        outcome_distribution(&make_ghz_like(), &plan)
            .map_err(|e| CliError::Usage(e.to_string()))?
            .to_labeled()
            .into_iter()
            .map(|(k, p)| (k, (p * scale).round() / scale))
            .collect();
    let bytes = match args.out.format {
        Format::Json => json(&OracleTable {
            schema_version: SCHEMA_VERSION,
            entry: args.entry.name(),
            plan,
            distribution: table.clone(),
        })?,
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["outcome", "probability"])
                .map_err(|e| CliError::Serialize(e.to_string()))?;
            for (label, p) in table {
                w.write_record([label, p.to_string()])
                    .map_err(|e| CliError::Serialize(e.to_string()))?;
            }
            w.into_inner()
                .map_err(|e| CliError::Serialize(e.to_string()))?
        }
    };
    emit(&args.out, &bytes, stdout)?;
    Ok(EXIT_OK)
}

/// Parses `args` (including the program name) and executes the subcommand.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(stderr, "{}", e.render());
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let result = match &cli.command {
        Command::Run(a) => cmd_run(a, stdout),
        Command::Suite(a) => cmd_suite(a, stdout),
        Command::Oracle(a) => cmd_oracle(a, stdout),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            EXIT_USAGE
        }
    }
}

pub fn main() -> i32 {
    run(
        std::env::args_os(),
        &mut std::io::stdout().lock(),
        &mut std::io::stderr().lock(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn call(args: &[&str]) -> (i32, String, String) {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let code = run(
            std::iter::once("sqss").chain(args.iter().copied()),
            &mut out,
            &mut err,
        );
        (
            code,
            String::from_utf8(out).unwrap(),
            String::from_utf8(err).unwrap(),
        )
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }

    #[test]
    fn usage_errors_exit_one() {
        assert_eq!(call(&["run", "--N", "0"]).0, EXIT_USAGE);
        assert_eq!(call(&["run", "--protocol", "bogus"]).0, EXIT_USAGE);
        assert_eq!(call(&["oracle", "nope"]).0, EXIT_USAGE);
        assert_eq!(call(&[]).0, EXIT_USAGE);
        assert_eq!(call(&["--help"]).0, EXIT_OK);
    }

    #[test]
    fn oracle_tables() {
        let (code, out, _) = call(&["oracle", "ghz-like-zzz"]);
        assert_eq!(code, 0);
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["distribution"]["011"], 0.25);
        assert_eq!(v["distribution"].as_object().unwrap().len(), 4);
        let (_, out, _) = call(&["oracle", "joint-on-psi-prime", "--format", "csv"]);
        assert_eq!(out, "outcome,probability\n0,1\n");
        let (_, out, _) = call(&["oracle", "case2-conditional"]);
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["distribution"]["(0,PhiPlus)"], 0.5);
        assert_eq!(v["distribution"]["(1,PsiPlus)"], 0.5);
    }
}
