//! The two semi-quantum secret sharing protocols as step machines.
//!
//! Both variants share Steps 1, 3 (order restoration), 4 (case dispatch),
//! 5 (eavesdropping check) and 6 (key extraction). They differ in what an
//! agent does with a SHARE photon and whether reflected photons are reordered.

mod check;
mod events;
mod lab;
mod run;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adversary::{AdversaryError, AdversaryReport};
use crate::channel::{ChannelError, Party};
use crate::quantum::{Outcome, QuantumError};

pub use check::{
    case3_occurrence_test, eavesdrop_check, extract_keys, is_consistent, Case3Test,
    Case3TestResult, ErrorCheck,
};
pub use events::{AnnouncementKind, Event, EventKind, EventLog};
pub use lab::{Lab, LabError};
pub use run::{
    alice_action, run_measure_resend, run_protocol, run_randomization_based, RunStreams,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Protocol {
    #[serde(rename = "randomization")]
    RandomizationBased,
    MeasureResend,
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Protocol::RandomizationBased => "randomization",
            Protocol::MeasureResend => "measure-resend",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Mode {
    Share,
    Check,
}

/// Row of the dealer's dispatch table, determined by the two agents' modes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum Case {
    /// Both SHARE: Alice measures her qubit in Z.
    BothShare,
    /// Bob SHARE, Charlie CHECK: Bell measurement with Charlie's returned qubit.
    CharlieChecks,
    /// Bob CHECK, Charlie SHARE: Bell measurement with Bob's returned qubit.
    BobChecks,
    /// Both CHECK: joint three-qubit measurement.
    BothCheck,
}

impl Case {
    pub const ALL: [Case; 4] = [
        Case::BothShare,
        Case::CharlieChecks,
        Case::BobChecks,
        Case::BothCheck,
    ];

    pub fn from_modes(bob: Mode, charlie: Mode) -> Case {
        match (bob, charlie) {
            (Mode::Share, Mode::Share) => Case::BothShare,
            (Mode::Share, Mode::Check) => Case::CharlieChecks,
            (Mode::Check, Mode::Share) => Case::BobChecks,
            (Mode::Check, Mode::Check) => Case::BothCheck,
        }
    }

    /// Table row number, 1 to 4.
    pub fn number(self) -> u8 {
        match self {
            Case::BothShare => 1,
            Case::CharlieChecks => 2,
            Case::BobChecks => 3,
            Case::BothCheck => 4,
        }
    }

    pub fn index(self) -> usize {
        self.number() as usize - 1
    }
}

impl From<Case> for u8 {
    fn from(c: Case) -> u8 {
        c.number()
    }
}

impl TryFrom<u8> for Case {
    type Error = String;

    fn try_from(v: u8) -> Result<Self, Self::Error> {
        match v {
            1 => Ok(Case::BothShare),
            2 => Ok(Case::CharlieChecks),
            3 => Ok(Case::BobChecks),
            4 => Ok(Case::BothCheck),
            other => Err(format!("case {other} is not in 1..=4")),
        }
    }
}

/// A sequence of classical bits, serialized as a `0`/`1` string.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct BitString(pub Vec<bool>);

impl BitString {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Bitwise XOR; `None` on length mismatch.
    pub fn xor(&self, other: &BitString) -> Option<BitString> {
        if self.len() != other.len() {
            return None;
        }
        Some(BitString(
            self.0.iter().zip(&other.0).map(|(a, b)| a ^ b).collect(),
        ))
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in &self.0 {
            f.write_str(if *b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl FromIterator<bool> for BitString {
    fn from_iter<I: IntoIterator<Item = bool>>(iter: I) -> Self {
        BitString(iter.into_iter().collect())
    }
}

impl Serialize for BitString {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for BitString {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(serde::de::Error::custom(format!("invalid bit {other:?}"))),
            })
            .collect()
    }
}

/// Per-triplet outcome of Steps 4 and 5.
///
/// `bob_bit` / `charlie_bit` hold the agent's SHARE measurement whenever that
/// agent chose SHARE. They are published only for cases 2 and 3; case-1 bits
/// stay private and become key material.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaseRecord {
    pub triplet: usize,
    pub case: Case,
    pub alice_result: Outcome,
    pub bob_bit: Option<bool>,
    pub charlie_bit: Option<bool>,
    /// Set during the eavesdropping check, never for case 1.
    pub consistent: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyTriple {
    #[serde(rename = "k_a")]
    pub alice: BitString,
    #[serde(rename = "k_b")]
    pub bob: BitString,
    #[serde(rename = "k_c")]
    pub charlie: BitString,
}

impl KeyTriple {
    /// `K_A = K_B ⊕ K_C`.
    pub fn relation_holds(&self) -> bool {
        self.bob.xor(&self.charlie).as_ref() == Some(&self.alice)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AbortReason {
    ErrorRateExceeded,
    Case3Deficient,
    MultiPhotonExceeded,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckVerdict {
    pub error_rate: f64,
    pub checked: usize,
    pub inconsistent: usize,
    /// Fraction of all triplets that landed in case 3.
    pub case3_occurrence: f64,
    pub case3_p_value: Option<f64>,
    pub pass: bool,
    pub abort_reason: Option<AbortReason>,
}

impl CheckVerdict {
    pub(crate) fn aborted_before_check(reason: AbortReason) -> Self {
        CheckVerdict {
            error_rate: 0.0,
            checked: 0,
            inconsistent: 0,
            case3_occurrence: 0.0,
            case3_p_value: None,
            pass: false,
            abort_reason: Some(reason),
        }
    }
}

/// Countermeasure based on the occurrence of case 3.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Solution1 {
    pub significance: f64,
}

/// Wavelength filter plus photon number splitter at each agent's input.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Solution2 {
    pub multi_photon_threshold: f64,
}

pub const DEFAULT_SIGNIFICANCE: f64 = 0.001;
pub const DEFAULT_MULTI_PHOTON_THRESHOLD: f64 = 0.01;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub triplets: usize,
    /// Probability that an honest agent picks SHARE for a photon.
    pub share_probability: f64,
    pub error_threshold: f64,
    pub solution1: Option<Solution1>,
    pub solution2: Option<Solution2>,
    /// Keep per-triplet records and the event log in the report.
    pub trace: bool,
}

impl RunConfig {
    pub fn new(triplets: usize) -> Self {
        RunConfig {
            triplets,
            share_probability: 0.5,
            error_threshold: 0.0,
            solution1: None,
            solution2: None,
            trace: false,
        }
    }

    pub fn with_solution1(mut self, significance: f64) -> Self {
        self.solution1 = Some(Solution1 { significance });
        self
    }

    pub fn with_solution2(mut self, multi_photon_threshold: f64) -> Self {
        self.solution2 = Some(Solution2 {
            multi_photon_threshold,
        });
        self
    }

    pub fn with_trace(mut self) -> Self {
        self.trace = true;
        self
    }

    pub fn validate(&self) -> Result<(), RunError> {
        if self.triplets == 0 {
            return Err(RunError::Config("at least one triplet is required".into()));
        }
        if !(0.0..=1.0).contains(&self.share_probability) {
            return Err(RunError::Config(
                "share probability must lie in [0, 1]".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.error_threshold) {
            return Err(RunError::Config(
                "error threshold must lie in [0, 1]".into(),
            ));
        }
        if let Some(s) = self.solution1 {
            if !(s.significance > 0.0 && s.significance < 1.0) {
                return Err(RunError::Config("significance must lie in (0, 1)".into()));
            }
        }
        if let Some(s) = self.solution2 {
            if !(0.0..=1.0).contains(&s.multi_photon_threshold) {
                return Err(RunError::Config(
                    "multi-photon threshold must lie in [0, 1]".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Result of an agent's spy-photon inspection under Solution 2.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpyInspection {
    pub party: Party,
    pub flagged: usize,
    pub multi_photon_rate: f64,
    pub restart: bool,
}

/// Counted photons for a rough qubit-efficiency picture.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PhotonTally {
    pub sent_by_alice: usize,
    pub delivered_to_agents: usize,
    pub returned_to_alice: usize,
    pub flagged_by_filters: usize,
    pub key_bits: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub protocol: Protocol,
    pub triplets: usize,
    pub case_counts: [usize; 4],
    pub verdict: CheckVerdict,
    /// Whether the run reached key extraction.
    pub completed: bool,
    pub keys: Option<KeyTriple>,
    pub key_relation_holds: Option<bool>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub spy_inspections: Vec<SpyInspection>,
    pub photons: PhotonTally,
    pub adversary: Option<AdversaryReport>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub records: Vec<CaseRecord>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub events: Vec<Event>,
}

impl RunReport {
    pub fn detected(&self) -> bool {
        !self.verdict.pass
    }

    pub fn case_count(&self, case: Case) -> usize {
        self.case_counts[case.index()]
    }
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("invalid run configuration: {0}")]
    Config(String),
    #[error("adversary {adversary} does not apply to the {protocol} protocol")]
    IncompatibleAdversary {
        adversary: String,
        protocol: Protocol,
    },
    #[error("no returned photon for triplet {0}")]
    MissingReturn(usize),
    #[error("returned photon for triplet {0} is not the expected register particle")]
    ForeignPhoton(usize),
    #[error("slot {0} reached the detector empty")]
    EmptySlot(usize),
    #[error("key extraction requested on an aborted run")]
    RunAborted,
    #[error(transparent)]
    Lab(#[from] LabError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Adversary(#[from] AdversaryError),
}

impl From<QuantumError> for RunError {
    fn from(e: QuantumError) -> Self {
        RunError::Lab(LabError::Quantum(e))
    }
}
