use std::collections::BTreeMap;

use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::quantum::{
    format_outcomes, outcome_distribution, Measurement, Outcome, QuantumError, StateVector3,
    TripletRegister,
};
use crate::RandomSource;

use super::stats::{chi_square_fit, ChiSquareFit, StatsError};

/// Draws `samples` outcome tuples by running `plan` on fresh copies of `state`
/// through the sampling path of [`TripletRegister`].
pub fn sample_outcomes(
    state: &StateVector3,
    plan: &[Measurement],
    samples: u64,
    seed: u64,
) -> Result<BTreeMap<Vec<Outcome>, u64>, QuantumError> {
    let mut rng = RandomSource::seed_from_u64(seed);
    let mut counts = BTreeMap::new();
    for _ in 0..samples {
        let mut reg = TripletRegister::new(0, state.clone());
        let outcome = plan
            .iter()
            .map(|m| match *m {
                Measurement::Z(s) => reg.measure_z(s, &mut rng).map(Outcome::Z),
                Measurement::Bell(a, b) => reg.measure_bell(a, b, &mut rng).map(Outcome::Bell),
                Measurement::Joint => reg.measure_joint(&mut rng).map(Outcome::Joint),
            })
            .collect::<Result<Vec<_>, _>>()?;
        *counts.entry(outcome).or_insert(0) += 1;
    }
    Ok(counts)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleFit {
    pub expected: BTreeMap<String, f64>,
    pub observed: BTreeMap<String, u64>,
    pub fit: ChiSquareFit,
    /// Observed support equals the exact support.
    pub support_matches: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum OracleFitError {
    #[error(transparent)]
    Quantum(#[from] QuantumError),
    #[error(transparent)]
    Stats(#[from] StatsError),
}

/// Samples `plan` and compares the histogram with the exact distribution.
pub fn oracle_fit(
    state: &StateVector3,
    plan: &[Measurement],
    samples: u64,
    seed: u64,
) -> Result<OracleFit, OracleFitError> {
    let exact = outcome_distribution(state, plan)?;
    let counts = sample_outcomes(state, plan, samples, seed)?;
    let expected = exact.to_labeled();
    let observed: BTreeMap<String, u64> = counts
        .iter()
        .map(|(k, v)| (format_outcomes(k), *v))
        .collect();
    let fit = chi_square_fit(&observed, &expected)?;
    let support_matches = observed.keys().eq(expected.keys());
    Ok(OracleFit {
        expected,
        observed,
        fit,
        support_matches,
    })
}
