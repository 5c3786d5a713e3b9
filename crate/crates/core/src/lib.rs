//! Simulation of GHZ-like semi-quantum secret sharing, its attacks and countermeasures.

pub mod adversary;
pub mod analysis;
pub mod channel;
pub mod cli;
pub mod protocol;
pub mod quantum;

/// Generator used for every stochastic choice in the simulator.
pub type RandomSource = rand_chacha::ChaCha8Rng;
