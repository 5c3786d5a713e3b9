//! Exhaustive measurement-branch enumeration.
//!
//! Each measurement is expressed as a set of projectors, every projector as an
//! explicit list of orthonormal 8-dimensional eigenvectors. Branch weights come
//! from `P|ψ⟩ = Σ |v⟩⟨v|ψ⟩`; no sampling is involved and the code shares
//! nothing with the collapse routines in `register`.

use std::collections::BTreeMap;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::basis::{BellOutcome, JointOutcome};
use super::state::{Slot, StateVector3};
use super::QuantumError;

/// Branches with probability below this are treated as impossible.
pub const SUPPORT_CUTOFF: f64 = 1e-12;

/// A single step of a measurement plan.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Measurement {
    Z(Slot),
    Bell(Slot, Slot),
    Joint,
}

impl Measurement {
    fn slots(self) -> Vec<Slot> {
        match self {
            Measurement::Z(s) => vec![s],
            Measurement::Bell(a, b) => vec![a, b],
            Measurement::Joint => Slot::ALL.to_vec(),
        }
    }
}

/// Result of one measurement step.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Outcome {
    Z(bool),
    Bell(BellOutcome),
    Joint(JointOutcome),
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Outcome::Z(bit) => write!(f, "{}", *bit as u8),
            Outcome::Bell(b) => write!(f, "{b}"),
            Outcome::Joint(j) => write!(f, "{j}"),
        }
    }
}

/// Renders an outcome tuple: pure Z tuples as a bit string (`011`), a single
/// outcome bare, anything else as `(0,PhiPlus)`.
pub fn format_outcomes(outcomes: &[Outcome]) -> String {
    if outcomes.len() > 1 && outcomes.iter().all(|o| matches!(o, Outcome::Z(_))) {
        return outcomes.iter().map(|o| o.to_string()).collect();
    }
    if outcomes.len() == 1 {
        return outcomes[0].to_string();
    }
    let parts: Vec<String> = outcomes.iter().map(|o| o.to_string()).collect();
    format!("({})", parts.join(","))
}

/// Exact probabilities of every outcome tuple of a plan.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct OutcomeDistribution {
    probabilities: BTreeMap<Vec<Outcome>, f64>,
}

impl OutcomeDistribution {
    pub fn get(&self, outcomes: &[Outcome]) -> f64 {
        self.probabilities.get(outcomes).copied().unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Vec<Outcome>, &f64)> {
        self.probabilities.iter()
    }

    pub fn len(&self) -> usize {
        self.probabilities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probabilities.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.probabilities.values().sum()
    }

    pub fn support(&self) -> impl Iterator<Item = &Vec<Outcome>> {
        self.probabilities.keys()
    }

    /// Probabilities keyed by the rendered outcome string.
    pub fn to_labeled(&self) -> BTreeMap<String, f64> {
        self.probabilities
            .iter()
            .map(|(k, p)| (format_outcomes(k), *p))
            .collect()
    }
}

fn real_vector(values: [f64; 8]) -> [Complex64; 8] {
    values.map(|v| Complex64::new(v, 0.0))
}

/// Orthonormal eigenvectors spanning the projector of each outcome.
fn projectors(m: Measurement) -> Vec<(Outcome, Vec<[Complex64; 8]>)> {
    match m {
        Measurement::Z(slot) => [false, true]
            .into_iter()
            .map(|bit| {
                let vectors = (0..8)
                    .filter(|label| ((label >> slot.shift()) & 1 == 1) == bit)
                    .map(|label| {
                        let mut v = [0.0; 8];
                        v[label] = 1.0;
                        real_vector(v)
                    })
                    .collect();
                (Outcome::Z(bit), vectors)
            })
            .collect(),
        Measurement::Bell(a, b) => {
            let rest = Slot::ALL
                .into_iter()
                .find(|s| *s != a && *s != b)
                .expect("three slots");
            BellOutcome::ALL
                .into_iter()
                .map(|bell| {
                    let c = bell.coefficients();
                    let vectors = [0usize, 1]
                        .into_iter()
                        .map(|z| {
                            let mut v = [0.0; 8];
                            for (label, slot_v) in v.iter_mut().enumerate() {
                                let x = (label >> a.shift()) & 1;
                                let y = (label >> b.shift()) & 1;
                                if (label >> rest.shift()) & 1 == z {
                                    *slot_v = c[x][y];
                                }
                            }
                            real_vector(v)
                        })
                        .collect();
                    (Outcome::Bell(bell), vectors)
                })
                .collect()
        }
        Measurement::Joint => JointOutcome::all()
            .map(|j| (Outcome::Joint(j), vec![*j.basis_vector().amplitudes()]))
            .collect(),
    }
}

fn project(state: &[Complex64; 8], vectors: &[[Complex64; 8]]) -> [Complex64; 8] {
    let mut out = [Complex64::new(0.0, 0.0); 8];
    for v in vectors {
        let overlap: Complex64 = v.iter().zip(state.iter()).map(|(a, b)| a.conj() * b).sum();
        for (o, a) in out.iter_mut().zip(v.iter()) {
            *o += a * overlap;
        }
    }
    out
}

fn validate(plan: &[Measurement]) -> Result<(), QuantumError> {
    let mut used = [false; 3];
    for step in plan {
        if let Measurement::Bell(a, b) = step {
            if a == b {
                return Err(QuantumError::IncompatiblePlan(format!(
                    "Bell measurement repeats {a}"
                )));
            }
        }
        for slot in step.slots() {
            if used[slot.index()] {
                return Err(QuantumError::IncompatiblePlan(format!(
                    "{slot} measured more than once"
                )));
            }
            used[slot.index()] = true;
        }
    }
    Ok(())
}

/// Enumerates every branch of `plan` applied in order to `state`.
pub fn outcome_distribution(
    state: &StateVector3,
    plan: &[Measurement],
) -> Result<OutcomeDistribution, QuantumError> {
    validate(plan)?;
    let mut branches: Vec<(Vec<Outcome>, [Complex64; 8])> = vec![(Vec::new(), *state.amplitudes())];
    for step in plan {
        let ops = projectors(*step);
        let mut next = Vec::with_capacity(branches.len() * ops.len());
        for (history, amps) in &branches {
            for (outcome, vectors) in &ops {
                // Unnormalized: squared norm of the branch vector is its joint probability.
                let projected = project(amps, vectors);
                let weight: f64 = projected.iter().map(|a| a.norm_sqr()).sum();
                if weight < SUPPORT_CUTOFF {
                    continue;
                }
                let mut h = history.clone();
                h.push(*outcome);
                next.push((h, projected));
            }
        }
        branches = next;
    }
    let mut probabilities = BTreeMap::new();
    for (history, amps) in branches {
        let weight: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        *probabilities.entry(history).or_insert(0.0) += weight;
    }
    Ok(OutcomeDistribution { probabilities })
}
