use std::collections::BTreeMap;

use rand::{RngCore, SeedableRng};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adversary::{AdversarySpec, AdversaryStrategy};
use crate::protocol::{
    run_protocol, AbortReason, Protocol, RunConfig, RunError, RunReport, RunStreams,
};
use crate::RandomSource;

use super::stats::wilson_interval;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid plan: {0}")]
    InvalidPlan(String),
    #[error("run {index} failed: {source}")]
    Run {
        index: u64,
        #[source]
        source: RunError,
    },
}

/// Everything needed to reproduce a batch of runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub protocol: Protocol,
    pub triplets: usize,
    pub runs: u64,
    pub adversary: AdversarySpec,
    /// Case-3 occurrence test significance, when enabled.
    pub solution1: Option<f64>,
    /// Multi-photon abort threshold, when filters are installed.
    pub solution2: Option<f64>,
    pub error_threshold: f64,
    pub share_probability: f64,
    pub seed: u64,
    pub trace: bool,
}

impl ExperimentPlan {
    pub fn new(protocol: Protocol, triplets: usize, runs: u64, seed: u64) -> Self {
        ExperimentPlan {
            protocol,
            triplets,
            runs,
            adversary: AdversarySpec::None,
            solution1: None,
            solution2: None,
            error_threshold: 0.0,
            share_probability: 0.5,
            seed,
            trace: false,
        }
    }

    pub fn with_adversary(mut self, adversary: AdversarySpec) -> Self {
        self.adversary = adversary;
        self
    }

    pub fn with_solution1(mut self, significance: f64) -> Self {
        self.solution1 = Some(significance);
        self
    }

    pub fn with_solution2(mut self, threshold: f64) -> Self {
        self.solution2 = Some(threshold);
        self
    }

    pub fn run_config(&self) -> RunConfig {
        let mut config = RunConfig::new(self.triplets);
        config.share_probability = self.share_probability;
        config.error_threshold = self.error_threshold;
        config.trace = self.trace;
        if let Some(s) = self.solution1 {
            config = config.with_solution1(s);
        }
        if let Some(t) = self.solution2 {
            config = config.with_solution2(t);
        }
        config
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.runs == 0 {
            return Err(ExperimentError::InvalidPlan(
                "runs must be at least 1".into(),
            ));
        }
        self.run_config()
            .validate()
            .map_err(|e| ExperimentError::InvalidPlan(e.to_string()))?;
        self.adversary
            .validate()
            .map_err(|e| ExperimentError::InvalidPlan(e.to_string()))?;
        if !self.adversary.supports(self.protocol) {
            return Err(ExperimentError::InvalidPlan(format!(
                "{:?} does not apply to the {} protocol",
                self.adversary.kind(),
                self.protocol
            )));
        }
        Ok(())
    }
}

/// Seed of run `index`, a pure function of the plan seed.
pub fn derive_run_seed(plan_seed: u64, index: u64) -> u64 {
    let mut rng = RandomSource::seed_from_u64(plan_seed);
    rng.set_stream(index);
    rng.next_u64()
}

/// Integer counters over a set of runs. Merging is associative and
/// commutative, so summaries do not depend on aggregation order.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Tally {
    pub runs: u64,
    pub aborted: u64,
    pub abort_reasons: BTreeMap<AbortReason, u64>,
    pub triplets: u64,
    pub case_counts: [u64; 4],
    pub checked: u64,
    pub inconsistent: u64,
    pub max_error_rate: f64,
    pub completed: u64,
    pub key_bits: u64,
    pub key_relation_failures: u64,
    pub attacked_runs: u64,
    pub attack_successes: u64,
    pub bits_recovered: u64,
    pub share_bit_mismatches: u64,
    pub photons_flagged: u64,
}

impl Tally {
    pub fn from_run(r: &RunReport) -> Self {
        let mut t = Tally {
            runs: 1,
            triplets: r.triplets as u64,
            case_counts: r.case_counts.map(|c| c as u64),
            checked: r.verdict.checked as u64,
            inconsistent: r.verdict.inconsistent as u64,
            max_error_rate: r.verdict.error_rate,
            completed: r.completed as u64,
            key_bits: r.keys.as_ref().map_or(0, |k| k.alice.len() as u64),
            key_relation_failures: (r.key_relation_holds == Some(false)) as u64,
            photons_flagged: r.photons.flagged_by_filters as u64,
            ..Tally::default()
        };
        if let Some(reason) = r.verdict.abort_reason {
            t.aborted = 1;
            t.abort_reasons.insert(reason, 1);
        }
        if let Some(a) = &r.adversary {
            t.attacked_runs = 1;
            t.attack_successes = a.outcome.succeeded as u64;
            t.bits_recovered = a.outcome.bits_recovered as u64;
            t.share_bit_mismatches = a.outcome.share_bit_mismatches.unwrap_or(0) as u64;
        }
        t
    }

    pub fn merge(mut self, other: &Tally) -> Tally {
        self.runs += other.runs;
        self.aborted += other.aborted;
        for (k, v) in &other.abort_reasons {
            *self.abort_reasons.entry(*k).or_insert(0) += v;
        }
        self.triplets += other.triplets;
        for (a, b) in self.case_counts.iter_mut().zip(other.case_counts) {
            *a += b;
        }
        self.checked += other.checked;
        self.inconsistent += other.inconsistent;
        self.max_error_rate = self.max_error_rate.max(other.max_error_rate);
        self.completed += other.completed;
        self.key_bits += other.key_bits;
        self.key_relation_failures += other.key_relation_failures;
        self.attacked_runs += other.attacked_runs;
        self.attack_successes += other.attack_successes;
        self.bits_recovered += other.bits_recovered;
        self.share_bit_mismatches += other.share_bit_mismatches;
        self.photons_flagged += other.photons_flagged;
        self
    }

    pub fn summary(&self) -> Summary {
        let ratio = |a: u64, b: u64| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        Summary {
            runs: self.runs,
            detection_rate: ratio(self.aborted, self.runs),
            detection_ci: wilson_interval(self.aborted, self.runs),
            pooled_error_rate: ratio(self.inconsistent, self.checked),
            max_error_rate: self.max_error_rate,
            case3_occurrence: ratio(self.case_counts[2], self.triplets),
            case_frequencies: self.case_counts.map(|c| ratio(c, self.triplets)),
            attack_success_rate: (self.attacked_runs > 0)
                .then(|| ratio(self.attack_successes, self.attacked_runs)),
            attack_success_ci: (self.attacked_runs > 0)
                .then(|| wilson_interval(self.attack_successes, self.attacked_runs)),
            mean_key_length: ratio(self.key_bits, self.completed),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub runs: u64,
    pub detection_rate: f64,
    pub detection_ci: (f64, f64),
    pub pooled_error_rate: f64,
    pub max_error_rate: f64,
    pub case3_occurrence: f64,
    pub case_frequencies: [f64; 4],
    pub attack_success_rate: Option<f64>,
    pub attack_success_ci: Option<(f64, f64)>,
    pub mean_key_length: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub schema_version: u32,
    pub plan: ExperimentPlan,
    pub tally: Tally,
    pub summary: Summary,
    pub runs: Vec<RunReport>,
}

impl AggregateReport {
    pub fn from_runs(plan: ExperimentPlan, runs: Vec<RunReport>) -> Self {
        let tally = runs
            .iter()
            .map(Tally::from_run)
            .fold(Tally::default(), |acc, t| acc.merge(&t));
        let summary = tally.summary();
        AggregateReport {
            schema_version: SCHEMA_VERSION,
            plan,
            tally,
            summary,
            runs,
        }
    }
}

/// One run of `plan` with the derived seed for `index`.
pub fn run_single(plan: &ExperimentPlan, index: u64) -> Result<RunReport, ExperimentError> {
    let config = plan.run_config();
    let mut adversary = AdversaryStrategy::new(plan.adversary);
    let streams = RunStreams::from_seed(derive_run_seed(plan.seed, index));
    run_protocol(plan.protocol, &config, &mut adversary, streams)
        .map_err(|source| ExperimentError::Run { index, source })
}

/// Executes every run of the plan (in parallel) and aggregates in run order.
pub fn run_experiment(plan: &ExperimentPlan) -> Result<AggregateReport, ExperimentError> {
    plan.validate()?;
    let runs = (0..plan.runs)
        .into_par_iter()
        .map(|i| run_single(plan, i))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(AggregateReport::from_runs(plan.clone(), runs))
}
