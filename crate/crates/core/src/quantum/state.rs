use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::QuantumError;

/// Tolerance used for normalization and state equality.
pub const TOLERANCE: f64 = 1e-9;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// One of the three qubit positions of a triplet.
///
/// Slot one is the most significant bit of a basis label and belongs to the
/// dealer; slots two and three are the particles sent to the two agents.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Slot {
    One,
    Two,
    Three,
}

impl Slot {
    pub const ALL: [Slot; 3] = [Slot::One, Slot::Two, Slot::Three];

    /// Zero-based array index.
    pub fn index(self) -> usize {
        match self {
            Slot::One => 0,
            Slot::Two => 1,
            Slot::Three => 2,
        }
    }

    /// Bit position of this slot inside a basis label `b1b2b3`.
    pub fn shift(self) -> usize {
        2 - self.index()
    }

    /// Value of this slot's bit in `label`.
    pub fn bit_of(self, label: usize) -> bool {
        (label >> self.shift()) & 1 == 1
    }

    pub fn number(self) -> u8 {
        self.index() as u8 + 1
    }
}

impl TryFrom<u8> for Slot {
    type Error = QuantumError;

    fn try_from(value: u8) -> Result<Self, Self::Error> {
        match value {
            1 => Ok(Slot::One),
            2 => Ok(Slot::Two),
            3 => Ok(Slot::Three),
            other => Err(QuantumError::InvalidSlot(other)),
        }
    }
}

impl fmt::Display for Slot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "slot {}", self.number())
    }
}

/// Pure state of three qubits, amplitudes indexed by the label `b1b2b3`.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector3 {
    amps: [Complex64; 8],
}

impl StateVector3 {
    /// Computational basis state `|label⟩`.
    pub fn basis(label: usize) -> Self {
        assert!(label < 8, "basis label {label} out of range");
        let mut amps = [ZERO; 8];
        amps[label] = Complex64::new(1.0, 0.0);
        StateVector3 { amps }
    }

    pub fn from_amplitudes(amps: [Complex64; 8]) -> Result<Self, QuantumError> {
        let state = StateVector3 { amps };
        let norm = state.norm_sqr();
        if (norm - 1.0).abs() > TOLERANCE {
            return Err(QuantumError::NotNormalized(norm));
        }
        Ok(state)
    }

    /// Builds a state from unnormalized real amplitudes, rescaling to unit norm.
    pub fn from_real_unnormalized(values: [f64; 8]) -> Result<Self, QuantumError> {
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(QuantumError::NotNormalized(0.0));
        }
        let amps = values.map(|v| Complex64::new(v / norm, 0.0));
        Ok(StateVector3 { amps })
    }

    pub(crate) fn from_amplitudes_unchecked(amps: [Complex64; 8]) -> Self {
        StateVector3 { amps }
    }

    /// Standard GHZ state `(|000⟩ + |111⟩)/√2`.
    pub fn ghz() -> Self {
        let mut amps = [ZERO; 8];
        amps[0b000] = Complex64::new(FRAC_1_SQRT_2, 0.0);
        amps[0b111] = Complex64::new(FRAC_1_SQRT_2, 0.0);
        StateVector3 { amps }
    }

    pub fn amplitude(&self, label: usize) -> Complex64 {
        self.amps[label]
    }

    pub fn amplitudes(&self) -> &[Complex64; 8] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn is_normalized(&self) -> bool {
        (self.norm_sqr() - 1.0).abs() <= TOLERANCE
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &StateVector3) -> Complex64 {
        self.amps
            .iter()
            .zip(other.amps.iter())
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    pub fn approx_eq(&self, other: &StateVector3, tol: f64) -> bool {
        self.amps
            .iter()
            .zip(other.amps.iter())
            .all(|(a, b)| (a - b).norm() <= tol)
    }

    /// Returns the state with the Hadamard gate applied on `slot`.
    pub fn hadamard(&self, slot: Slot) -> StateVector3 {
        let mask = 1 << slot.shift();
        let mut out = [ZERO; 8];
        for label in 0..8 {
            if label & mask != 0 {
                continue;
            }
            let a0 = self.amps[label];
            let a1 = self.amps[label | mask];
            out[label] = (a0 + a1) * FRAC_1_SQRT_2;
            out[label | mask] = (a0 - a1) * FRAC_1_SQRT_2;
        }
        StateVector3 { amps: out }
    }

    /// Returns the state with the qubits in slots `a` and `b` exchanged.
    pub fn swap_slots(&self, a: Slot, b: Slot) -> StateVector3 {
        let mut out = [ZERO; 8];
        for (label, amp) in self.amps.iter().enumerate() {
            let bit_a = a.bit_of(label);
            let bit_b = b.bit_of(label);
            let mut target = label & !(1 << a.shift()) & !(1 << b.shift());
            if bit_a {
                target |= 1 << b.shift();
            }
            if bit_b {
                target |= 1 << a.shift();
            }
            out[target] = *amp;
        }
        StateVector3 { amps: out }
    }
}

/// The GHZ-like state `½(|000⟩ + |011⟩ + |110⟩ + |101⟩)`.
pub fn make_ghz_like() -> StateVector3 {
    let mut amps = [ZERO; 8];
    for label in [0b000, 0b011, 0b110, 0b101] {
        amps[label] = Complex64::new(0.5, 0.0);
    }
    StateVector3 { amps }
}

pub fn apply_hadamard(state: &StateVector3, slot: Slot) -> StateVector3 {
    state.hadamard(slot)
}

/// Formats a basis label as the three-character bit string `b1b2b3`.
pub fn label_string(label: usize) -> String {
    format!("{label:03b}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ghz_like_amplitudes() {
        let s = make_ghz_like();
        for label in [0b000, 0b011, 0b110, 0b101] {
            assert!((s.amplitude(label) - Complex64::new(0.5, 0.0)).norm() < 1e-15);
        }
        for label in [0b001, 0b010, 0b100, 0b111] {
            assert_eq!(s.amplitude(label), ZERO);
        }
        assert!((s.norm_sqr() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn hadamard_on_every_slot_of_ghz_gives_ghz_like() {
        let s = Slot::ALL
            .iter()
            .fold(StateVector3::ghz(), |s, &slot| apply_hadamard(&s, slot));
        assert!(s.approx_eq(&make_ghz_like(), TOLERANCE));
    }

    #[test]
    fn hadamard_twice_is_identity() {
        let s = make_ghz_like();
        let back = s.hadamard(Slot::One).hadamard(Slot::One);
        assert!(back.approx_eq(&s, TOLERANCE));
    }

    #[test]
    fn hadamard_on_middle_slot_of_zero() {
        let s = StateVector3::basis(0).hadamard(Slot::Two);
        let h = Complex64::new(FRAC_1_SQRT_2, 0.0);
        assert!((s.amplitude(0b000) - h).norm() < 1e-12);
        assert!((s.amplitude(0b010) - h).norm() < 1e-12);
        assert!((s.norm_sqr() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn invalid_slot_rejected() {
        assert!(matches!(
            Slot::try_from(0),
            Err(QuantumError::InvalidSlot(0))
        ));
        assert!(matches!(
            Slot::try_from(4),
            Err(QuantumError::InvalidSlot(4))
        ));
        assert_eq!(Slot::try_from(2).unwrap(), Slot::Two);
    }

    #[test]
    fn ghz_like_symmetric_under_agent_swap() {
        let s = make_ghz_like();
        assert_eq!(s.swap_slots(Slot::Two, Slot::Three), s);
    }

    #[test]
    fn from_amplitudes_checks_norm() {
        let mut amps = [ZERO; 8];
        amps[0] = Complex64::new(0.5, 0.0);
        assert!(matches!(
            StateVector3::from_amplitudes(amps),
            Err(QuantumError::NotNormalized(_))
        ));
    }
}
