use std::fmt;

use serde::{Deserialize, Serialize};

use crate::adversary::{AdversaryKind, AdversarySpec};
use crate::protocol::{
    AbortReason, Protocol, DEFAULT_MULTI_PHOTON_THRESHOLD, DEFAULT_SIGNIFICANCE,
};
use crate::quantum::{apply_hadamard, make_ghz_like, Measurement, Slot, StateVector3};

use super::experiment::{
    derive_run_seed, run_experiment, AggregateReport, ExperimentPlan, SCHEMA_VERSION,
};
use super::sampling::{oracle_fit, sample_outcomes};

/// How `observed` is compared with `expected`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Relation {
    /// `|observed - expected| <= tolerance`
    Within,
    /// `observed <= expected`
    AtMost,
    /// `observed >= expected`
    AtLeast,
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Relation::Within => "within",
            Relation::AtMost => "at-most",
            Relation::AtLeast => "at-least",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClaimCheck {
    pub id: String,
    pub claim: String,
    pub expected: f64,
    pub observed: f64,
    pub tolerance: f64,
    pub relation: Relation,
    pub pass: bool,
}

impl ClaimCheck {
    pub fn new(
        id: impl Into<String>,
        claim: impl Into<String>,
        relation: Relation,
        expected: f64,
        observed: f64,
    ) -> Self {
        ClaimCheck::with_tolerance(id, claim, relation, expected, observed, 0.0)
    }

    pub fn with_tolerance(
        id: impl Into<String>,
        claim: impl Into<String>,
        relation: Relation,
        expected: f64,
        observed: f64,
        tolerance: f64,
    ) -> Self {
        let pass = match relation {
            Relation::Within => (observed - expected).abs() <= tolerance,
            Relation::AtMost => observed <= expected,
            Relation::AtLeast => observed >= expected,
        };
        ClaimCheck {
            id: id.into(),
            claim: claim.into(),
            expected,
            observed,
            tolerance,
            relation,
            pass,
        }
    }
}

impl fmt::Display for ClaimCheck {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}] {}: {} (observed {}, {} {}",
            if self.pass { "PASS" } else { "FAIL" },
            self.id,
            self.claim,
            self.observed,
            self.relation,
            self.expected
        )?;
        if self.relation == Relation::Within {
            write!(f, " ± {}", self.tolerance)?;
        }
        f.write_str(")")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checklist {
    pub schema_version: u32,
    pub seed: u64,
    pub items: Vec<ClaimCheck>,
    pub passed: usize,
    pub failed: usize,
}

impl Checklist {
    pub fn from_items(seed: u64, items: Vec<ClaimCheck>) -> Self {
        let passed = items.iter().filter(|c| c.pass).count();
        Checklist {
            schema_version: SCHEMA_VERSION,
            seed,
            failed: items.len() - passed,
            passed,
            items,
        }
    }

    pub fn all_pass(&self) -> bool {
        self.failed == 0
    }
}

fn flag(b: bool) -> f64 {
    b as u8 as f64
}

/// Generic checks implied by the plan behind `report`.
pub fn verify_claims(report: &AggregateReport) -> Vec<ClaimCheck> {
    let plan = &report.plan;
    let t = &report.tally;
    let s = &report.summary;
    let attack = match plan.adversary.kind() {
        AdversaryKind::None => "honest",
        AdversaryKind::InterceptResend => "intercept-resend",
        AdversaryKind::TrojanHorse => "trojan-horse",
    };
    let tag = format!("{}/{attack}", plan.protocol);
    let id = |name: &str| format!("{tag}/{name}");
    let mut out = Vec::new();
    let runs = t.runs as f64;
    match plan.adversary {
        AdversarySpec::None => {
            if plan.solution1.is_some() {
                out.push(ClaimCheck::new(
                    id("false-abort-rate"),
                    "honest runs rarely fail the case-3 occurrence test",
                    Relation::AtMost,
                    0.002,
                    s.detection_rate,
                ));
            } else {
                out.push(ClaimCheck::new(
                    id("no-abort"),
                    "honest runs never abort",
                    Relation::AtMost,
                    0.0,
                    s.detection_rate,
                ));
            }
            out.push(ClaimCheck::new(
                id("zero-error-rate"),
                "error rate is zero in every honest run",
                Relation::AtMost,
                0.0,
                s.max_error_rate,
            ));
            out.push(ClaimCheck::new(
                id("key-relation"),
                "K_A = K_B xor K_C in every completed run",
                Relation::AtMost,
                0.0,
                t.key_relation_failures as f64,
            ));
            if plan.solution2.is_some() {
                out.push(ClaimCheck::new(
                    id("filter-silent"),
                    "filters flag no photon in honest runs",
                    Relation::AtMost,
                    0.0,
                    t.photons_flagged as f64,
                ));
            }
        }
        AdversarySpec::InterceptResend { allowed_case3 } => {
            if plan.solution1.is_some() {
                out.push(ClaimCheck::new(
                    id("solution1-detects"),
                    "case-3 occurrence test aborts every attacked run",
                    Relation::AtLeast,
                    1.0,
                    s.detection_rate,
                ));
                let deficient = t
                    .abort_reasons
                    .get(&AbortReason::Case3Deficient)
                    .copied()
                    .unwrap_or(0);
                out.push(ClaimCheck::new(
                    id("abort-reason"),
                    "aborts are attributed to case-3 deficiency",
                    Relation::AtLeast,
                    t.aborted as f64,
                    deficient as f64,
                ));
            } else {
                let undetected = 1.0 - s.detection_rate;
                let expected = 0.5f64.powi(allowed_case3 as i32);
                let tolerance = if allowed_case3 == 0 { 0.0 } else { 0.02 };
                out.push(ClaimCheck::with_tolerance(
                    id(&format!("undetected-m{allowed_case3}")),
                    "undetected fraction is (1/2)^m",
                    Relation::Within,
                    expected,
                    undetected,
                    tolerance,
                ));
                out.push(ClaimCheck::new(
                    id(&format!("recovery-m{allowed_case3}")),
                    "K_B xor recovered K_C = K_A in every undetected run",
                    Relation::AtLeast,
                    t.completed as f64,
                    t.attack_successes as f64,
                ));
            }
        }
        AdversarySpec::TrojanHorse { spies_per_slot } => {
            if plan.solution2.is_some() {
                out.push(ClaimCheck::new(
                    id("solution2-detects"),
                    "filters abort every attacked run",
                    Relation::AtLeast,
                    1.0,
                    s.detection_rate,
                ));
                let multi = t
                    .abort_reasons
                    .get(&AbortReason::MultiPhotonExceeded)
                    .copied()
                    .unwrap_or(0);
                out.push(ClaimCheck::new(
                    id("abort-reason"),
                    "aborts are attributed to the multi-photon check",
                    Relation::AtLeast,
                    runs,
                    multi as f64,
                ));
                let exact_flags = report
                    .runs
                    .iter()
                    .all(|r| r.photons.flagged_by_filters == spies_per_slot * r.triplets);
                out.push(ClaimCheck::new(
                    id("filter-count"),
                    "wavelength filter flags exactly one invisible photon per spy per slot",
                    Relation::AtLeast,
                    1.0,
                    flag(exact_flags),
                ));
                let min_rate = report
                    .runs
                    .iter()
                    .map(|r| {
                        r.spy_inspections
                            .iter()
                            .map(|i| i.multi_photon_rate)
                            .fold(0.0, f64::max)
                    })
                    .fold(f64::INFINITY, f64::min);
                out.push(ClaimCheck::new(
                    id("multi-photon-rate"),
                    "multi-photon rate reaches 1.0 in every run",
                    Relation::AtLeast,
                    1.0,
                    min_rate,
                ));
            } else {
                out.push(ClaimCheck::new(
                    id("undetected"),
                    "attack is never detected without filters",
                    Relation::AtMost,
                    0.0,
                    s.detection_rate,
                ));
                out.push(ClaimCheck::new(
                    id("share-bit-mismatches"),
                    "spy readings match Charlie's SHARE bits",
                    Relation::AtMost,
                    0.0,
                    t.share_bit_mismatches as f64,
                ));
                out.push(ClaimCheck::new(
                    id("recovery"),
                    "K_B xor recovered K_C = K_A in every run",
                    Relation::AtLeast,
                    runs,
                    t.attack_successes as f64,
                ));
            }
        }
    }
    out
}

/// Number of numbered acceptance criteria covered by [`criterion`].
pub const CRITERIA: u8 = 9;

fn experiment(plan: ExperimentPlan) -> AggregateReport {
    run_experiment(&plan).expect("suite plans are valid")
}

fn prefixed(prefix: &str, checks: Vec<ClaimCheck>) -> Vec<ClaimCheck> {
    checks
        .into_iter()
        .map(|mut c| {
            c.id = format!("{prefix}/{}", c.id);
            c
        })
        .collect()
}

fn max_deviation(a: &StateVector3, b: &StateVector3) -> f64 {
    a.amplitudes()
        .iter()
        .zip(b.amplitudes())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

const ORACLE_SAMPLES: u64 = 100_000;

fn oracle_checks(id: &str, claim: &str, plan: &[Measurement], seed: u64) -> Vec<ClaimCheck> {
    let fit = oracle_fit(&make_ghz_like(), plan, ORACLE_SAMPLES, seed)
        .expect("catalogue plans are valid");
    vec![
        ClaimCheck::new(
            format!("{id}/support"),
            format!("{claim}: sampled support equals exact support"),
            Relation::AtLeast,
            1.0,
            flag(fit.support_matches),
        ),
        ClaimCheck::new(
            format!("{id}/chi-square"),
            format!("{claim}: chi-square p-value"),
            Relation::AtLeast,
            0.001,
            fit.fit.p_value,
        ),
    ]
}

/// Checks for acceptance criterion `n` (1..=9) with seeds derived from `seed`.
pub fn criterion(n: u8, seed: u64) -> Vec<ClaimCheck> {
    let seed = derive_run_seed(seed, 1000 + n as u64);
    let ac = format!("AC{n}");
    match n {
        1 => {
            let h = Slot::ALL
                .into_iter()
                .fold(StateVector3::ghz(), |s, slot| apply_hadamard(&s, slot));
            vec![ClaimCheck::with_tolerance(
                "AC1/ghz-like-algebra",
                "H⊗3 applied to GHZ equals the GHZ-like state",
                Relation::Within,
                0.0,
                max_deviation(&h, &make_ghz_like()),
                1e-9,
            )]
        }
        2 => {
            let plan = [
                Measurement::Z(Slot::One),
                Measurement::Z(Slot::Two),
                Measurement::Z(Slot::Three),
            ];
            let counts =
                sample_outcomes(&make_ghz_like(), &plan, ORACLE_SAMPLES, seed).expect("valid plan");
            let violations: u64 = counts
                .iter()
                .filter(|(o, _)| {
                    let bits: Vec<bool> = o
                        .iter()
                        .map(|x| matches!(x, crate::quantum::Outcome::Z(true)))
                        .collect();
                    bits[0] != (bits[1] ^ bits[2])
                })
                .map(|(_, c)| c)
                .sum();
            let mut out = vec![ClaimCheck::new(
                "AC2/parity",
                "MR1 = MR2 xor MR3 in every triple-Z sample",
                Relation::AtMost,
                0.0,
                violations as f64,
            )];
            out.extend(oracle_checks(
                "AC2/triple-z",
                "triple-Z distribution",
                &plan,
                seed,
            ));
            out
        }
        3 => {
            let n_trip = 10_000usize;
            let sigma = (3.0 / 16.0 * n_trip as f64).sqrt() / n_trip as f64;
            let mut out = Vec::new();
            for (i, protocol) in [Protocol::RandomizationBased, Protocol::MeasureResend]
                .into_iter()
                .enumerate()
            {
                let report =
                    experiment(ExperimentPlan::new(protocol, n_trip, 100, seed + i as u64));
                let worst = report
                    .runs
                    .iter()
                    .flat_map(|r| {
                        r.case_counts
                            .map(|c| (c as f64 / n_trip as f64 - 0.25).abs())
                    })
                    .fold(0.0, f64::max);
                out.push(ClaimCheck::with_tolerance(
                    format!("AC3/{protocol}/case-frequencies"),
                    "largest per-run case-frequency deviation from 1/4",
                    Relation::Within,
                    0.0,
                    worst,
                    6.0 * sigma,
                ));
                out.extend(prefixed(&ac, verify_claims(&report)));
            }
            out
        }
        4 => {
            let plan = ExperimentPlan::new(Protocol::RandomizationBased, 1000, 1000, seed)
                .with_adversary(AdversarySpec::InterceptResend { allowed_case3: 0 });
            prefixed(&ac, verify_claims(&experiment(plan)))
        }
        5 => (1..=3u64)
            .flat_map(|m| {
                let plan = ExperimentPlan::new(Protocol::RandomizationBased, 64, 10_000, seed + m)
                    .with_adversary(AdversarySpec::InterceptResend {
                        allowed_case3: m as usize,
                    });
                prefixed(&ac, verify_claims(&experiment(plan)))
            })
            .collect(),
        6 => {
            let attack = ExperimentPlan::new(Protocol::RandomizationBased, 256, 1000, seed)
                .with_adversary(AdversarySpec::InterceptResend { allowed_case3: 0 })
                .with_solution1(DEFAULT_SIGNIFICANCE);
            let honest = ExperimentPlan::new(Protocol::RandomizationBased, 256, 1000, seed + 1)
                .with_solution1(DEFAULT_SIGNIFICANCE);
            let mut out = prefixed(&ac, verify_claims(&experiment(attack)));
            out.extend(prefixed(&ac, verify_claims(&experiment(honest))));
            out
        }
        7 => {
            let plan = ExperimentPlan::new(Protocol::MeasureResend, 256, 1000, seed)
                .with_adversary(AdversarySpec::TrojanHorse { spies_per_slot: 1 });
            prefixed(&ac, verify_claims(&experiment(plan)))
        }
        8 => {
            let attack = ExperimentPlan::new(Protocol::MeasureResend, 256, 1000, seed)
                .with_adversary(AdversarySpec::TrojanHorse { spies_per_slot: 1 })
                .with_solution2(DEFAULT_MULTI_PHOTON_THRESHOLD);
            let honest = ExperimentPlan::new(Protocol::MeasureResend, 256, 1000, seed + 1)
                .with_solution2(DEFAULT_MULTI_PHOTON_THRESHOLD);
            let mut out = prefixed(&ac, verify_claims(&experiment(attack)));
            out.extend(prefixed(&ac, verify_claims(&experiment(honest))));
            out
        }
        9 => {
            let mut out = oracle_checks(
                "AC9/case2",
                "case-2 Bell correlation",
                &[
                    Measurement::Z(Slot::Two),
                    Measurement::Bell(Slot::One, Slot::Three),
                ],
                seed,
            );
            out.extend(oracle_checks(
                "AC9/case3",
                "case-3 Bell correlation",
                &[
                    Measurement::Z(Slot::Three),
                    Measurement::Bell(Slot::One, Slot::Two),
                ],
                seed + 1,
            ));
            out.extend(oracle_checks(
                "AC9/case4",
                "case-4 joint outcome",
                &[Measurement::Joint],
                seed + 2,
            ));
            out
        }
        _ => Vec::new(),
    }
}

/// Runs every criterion and collects the checklist.
pub fn run_suite(seed: u64) -> Checklist {
    let items = (1..=CRITERIA).flat_map(|n| criterion(n, seed)).collect();
    Checklist::from_items(seed, items)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relations() {
        assert!(ClaimCheck::with_tolerance("a", "", Relation::Within, 0.5, 0.51, 0.02).pass);
        assert!(!ClaimCheck::with_tolerance("a", "", Relation::Within, 0.5, 0.53, 0.02).pass);
        assert!(ClaimCheck::new("a", "", Relation::AtMost, 0.0, 0.0).pass);
        assert!(!ClaimCheck::new("a", "", Relation::AtLeast, 1.0, 0.99).pass);
    }

    #[test]
    fn algebra_criterion() {
        let c = criterion(1, 42);
        assert_eq!(c.len(), 1);
        assert!(c[0].pass, "{}", c[0]);
    }

    #[test]
    fn honest_report_claims_pass() {
        let plan = ExperimentPlan::new(Protocol::MeasureResend, 200, 20, 1);
        let checks = verify_claims(&run_experiment(&plan).unwrap());
        assert!(checks.iter().all(|c| c.pass));
    }

    #[test]
    fn undetected_attack_claims_pass() {
        let plan = ExperimentPlan::new(Protocol::RandomizationBased, 100, 50, 1)
            .with_adversary(AdversarySpec::InterceptResend { allowed_case3: 0 });
        let checks = verify_claims(&run_experiment(&plan).unwrap());
        assert!(checks.iter().all(|c| c.pass), "{checks:?}");
    }

    #[test]
    fn countermeasure_claims_pass() {
        let plan = ExperimentPlan::new(Protocol::MeasureResend, 100, 20, 1)
            .with_adversary(AdversarySpec::TrojanHorse { spies_per_slot: 1 })
            .with_solution2(DEFAULT_MULTI_PHOTON_THRESHOLD);
        let checks = verify_claims(&run_experiment(&plan).unwrap());
        assert!(checks.iter().all(|c| c.pass), "{checks:?}");
    }
}
