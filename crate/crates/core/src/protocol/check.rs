use serde::{Deserialize, Serialize};

use crate::analysis::binomial_lower_pvalue;
use crate::quantum::{BellOutcome, JointOutcome, Outcome};

use super::{BitString, Case, CaseRecord, CheckVerdict, KeyTriple, RunError};

/// Outcome of the Step-5 consistency check.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorCheck {
    pub checked: usize,
    pub inconsistent: usize,
    pub error_rate: f64,
    pub pass: bool,
}

fn bell_matches(bit: Option<bool>, bell: BellOutcome) -> bool {
    matches!(
        (bit, bell),
        (Some(false), BellOutcome::PhiPlus) | (Some(true), BellOutcome::PsiPlus)
    )
}

/// Whether a checked record agrees with the GHZ-like correlation.
/// `None` for case 1, which is never checked.
pub fn is_consistent(record: &CaseRecord) -> Option<bool> {
    let ok = match (record.case, record.alice_result) {
        (Case::BothShare, _) => return None,
        (Case::CharlieChecks, Outcome::Bell(bell)) => bell_matches(record.bob_bit, bell),
        (Case::BobChecks, Outcome::Bell(bell)) => bell_matches(record.charlie_bit, bell),
        (Case::BothCheck, Outcome::Joint(j)) => j == JointOutcome::GHZ_LIKE,
        _ => false,
    };
    Some(ok)
}

/// Evaluates cases 2 to 4, marking each record's `consistent` flag.
/// An empty check set has error rate 0 and passes.
pub fn eavesdrop_check(records: &mut [CaseRecord], error_threshold: f64) -> ErrorCheck {
    let mut checked = 0;
    let mut inconsistent = 0;
    for record in records.iter_mut() {
        record.consistent = is_consistent(record);
        if let Some(ok) = record.consistent {
            checked += 1;
            if !ok {
                inconsistent += 1;
            }
        }
    }
    let error_rate = if checked == 0 {
        0.0
    } else {
        inconsistent as f64 / checked as f64
    };
    ErrorCheck {
        checked,
        inconsistent,
        error_rate,
        pass: error_rate <= error_threshold,
    }
}

/// Lower-tail binomial test on the number of case-3 triplets.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Case3Test {
    /// Honest probability of case 3 for a single triplet.
    pub expected_rate: f64,
    pub significance: f64,
}

impl Case3Test {
    pub fn new(significance: f64) -> Self {
        Case3Test {
            expected_rate: 0.25,
            significance,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Case3TestResult {
    pub observed: usize,
    pub total: usize,
    pub p_value: f64,
    pub pass: bool,
}

/// Fails when the observed case-3 count is improbably small for `total` triplets.
pub fn case3_occurrence_test(observed: usize, total: usize, test: Case3Test) -> Case3TestResult {
    let p_value = binomial_lower_pvalue(observed as u64, total as u64, test.expected_rate)
        .expect("observed count never exceeds total");
    Case3TestResult {
        observed,
        total,
        p_value,
        pass: p_value >= test.significance,
    }
}

/// Concatenates case-1 bits in triplet order.
pub fn extract_keys(records: &[CaseRecord], verdict: &CheckVerdict) -> Result<KeyTriple, RunError> {
    if !verdict.pass {
        return Err(RunError::RunAborted);
    }
    let mut alice = BitString::default();
    let mut bob = BitString::default();
    let mut charlie = BitString::default();
    for r in records.iter().filter(|r| r.case == Case::BothShare) {
        let Outcome::Z(a) = r.alice_result else {
            continue;
        };
        let (Some(b), Some(c)) = (r.bob_bit, r.charlie_bit) else {
            continue;
        };
        alice.0.push(a);
        bob.0.push(b);
        charlie.0.push(c);
    }
    Ok(KeyTriple {
        alice,
        bob,
        charlie,
    })
}
