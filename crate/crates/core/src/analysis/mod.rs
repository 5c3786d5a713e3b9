//! Batch experiments, statistics and claim verification.

mod claims;
mod experiment;
mod sampling;
mod stats;

pub use claims::{criterion, run_suite, verify_claims, Checklist, ClaimCheck, Relation, CRITERIA};
pub use experiment::{
    derive_run_seed, run_experiment, run_single, AggregateReport, ExperimentError, ExperimentPlan,
    Summary, Tally, SCHEMA_VERSION,
};
pub use sampling::{oracle_fit, sample_outcomes, OracleFit, OracleFitError};
pub use stats::{binomial_lower_pvalue, chi_square_fit, wilson_interval, ChiSquareFit, StatsError};
