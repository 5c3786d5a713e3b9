use std::collections::BTreeMap;
use std::fmt::Display;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};
use statrs::function::factorial::ln_binomial;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("observed count {observed} exceeds {trials} trials")]
    CountOutOfRange { observed: u64, trials: u64 },
    #[error("probability {0} outside [0, 1]")]
    InvalidProbability(f64),
    #[error("expected distribution sums to {0}, not 1")]
    NotADistribution(f64),
    #[error("outcome {0} was observed but has probability zero")]
    ImpossibleOutcome(String),
    #[error("no samples")]
    NoSamples,
}

/// Exact lower tail `P[X ≤ observed]` for `X ~ Binomial(trials, p)`.
///
/// Summed in log space so tails far below `f64::MIN_POSITIVE` per term still
/// accumulate correctly.
pub fn binomial_lower_pvalue(observed: u64, trials: u64, p: f64) -> Result<f64, StatsError> {
    if observed > trials {
        return Err(StatsError::CountOutOfRange { observed, trials });
    }
    if !(0.0..=1.0).contains(&p) || p.is_nan() {
        return Err(StatsError::InvalidProbability(p));
    }
    if observed == trials || p == 0.0 {
        return Ok(1.0);
    }
    if p == 1.0 {
        return Ok(0.0);
    }
    let (lp, lq) = (p.ln(), (1.0 - p).ln());
    let logs: Vec<f64> = (0..=observed)
        .map(|k| ln_binomial(trials, k) + k as f64 * lp + (trials - k) as f64 * lq)
        .collect();
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = logs.iter().map(|l| (l - max).exp()).sum();
    Ok((max + sum.ln()).exp().min(1.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChiSquareFit {
    pub statistic: f64,
    pub degrees_of_freedom: usize,
    pub p_value: f64,
    pub samples: u64,
}

/// Pearson goodness of fit of `observed` counts against exact probabilities.
///
/// Outcomes absent from `expected` have probability zero; observing one is a
/// hard failure rather than a large statistic.
pub fn chi_square_fit<K: Ord + Display>(
    observed: &BTreeMap<K, u64>,
    expected: &BTreeMap<K, f64>,
) -> Result<ChiSquareFit, StatsError> {
    let total: f64 = expected.values().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(StatsError::NotADistribution(total));
    }
    for (k, &count) in observed {
        if count > 0 && expected.get(k).copied().unwrap_or(0.0) <= 0.0 {
            return Err(StatsError::ImpossibleOutcome(k.to_string()));
        }
    }
    let samples: u64 = observed.values().sum();
    if samples == 0 {
        return Err(StatsError::NoSamples);
    }
    let n = samples as f64;
    let support: Vec<(&K, f64)> = expected
        .iter()
        .filter(|(_, p)| **p > 0.0)
        .map(|(k, p)| (k, *p))
        .collect();
    let statistic: f64 = support
        .iter()
        .map(|(k, p)| {
            let o = observed.get(*k).copied().unwrap_or(0) as f64;
            let e = n * p;
            (o - e).powi(2) / e
        })
        .sum();
    let degrees_of_freedom = support.len().saturating_sub(1);
    let p_value = if degrees_of_freedom == 0 {
        1.0
    } else {
        ChiSquared::new(degrees_of_freedom as f64)
            .expect("positive degrees of freedom")
            .sf(statistic)
    };
    Ok(ChiSquareFit {
        statistic,
        degrees_of_freedom,
        p_value,
        samples,
    })
}

/// Wilson score interval for a binomial proportion at ~95% confidence.
pub fn wilson_interval(successes: u64, trials: u64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    const Z: f64 = 1.959_963_984_540_054;
    let n = trials as f64;
    let phat = successes as f64 / n;
    let denom = 1.0 + Z * Z / n;
    let centre = (phat + Z * Z / (2.0 * n)) / denom;
    let half = Z * ((phat * (1.0 - phat) + Z * Z / (4.0 * n)) / n).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}
