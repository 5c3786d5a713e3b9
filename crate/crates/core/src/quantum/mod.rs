//! Exact state-vector mechanics for independent three-qubit registers.

mod basis;
mod oracle;
mod register;
mod state;

use thiserror::Error;

pub use basis::{BellOutcome, JointOutcome};
pub use oracle::{
    format_outcomes, outcome_distribution, Measurement, Outcome, OutcomeDistribution,
    SUPPORT_CUTOFF,
};
pub use register::{SlotRecord, TripletRegister};
pub use state::{apply_hadamard, label_string, make_ghz_like, Slot, StateVector3, TOLERANCE};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuantumError {
    #[error("slot index {0} is not in 1..=3")]
    InvalidSlot(u8),
    #[error("joint outcome index {0} is not in 0..8")]
    InvalidJointIndex(u8),
    #[error("{0} has already been measured")]
    AlreadyCollapsed(Slot),
    #[error("Bell measurement needs two distinct slots, got {0} twice")]
    OverlappingSlots(Slot),
    #[error("state is not normalized (norm² = {0})")]
    NotNormalized(f64),
    #[error("incompatible measurement plan: {0}")]
    IncompatiblePlan(String),
}
