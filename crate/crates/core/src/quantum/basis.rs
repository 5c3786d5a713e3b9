use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::state::{Slot, StateVector3};
use super::QuantumError;

/// The four Bell states on a qubit pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BellOutcome {
    PhiPlus,
    PhiMinus,
    PsiPlus,
    PsiMinus,
}

impl BellOutcome {
    pub const ALL: [BellOutcome; 4] = [
        BellOutcome::PhiPlus,
        BellOutcome::PhiMinus,
        BellOutcome::PsiPlus,
        BellOutcome::PsiMinus,
    ];

    /// Amplitude of `|xy⟩` in this Bell state, indexed `[x][y]`.
    pub fn coefficients(self) -> [[f64; 2]; 2] {
        let h = FRAC_1_SQRT_2;
        match self {
            BellOutcome::PhiPlus => [[h, 0.0], [0.0, h]],
            BellOutcome::PhiMinus => [[h, 0.0], [0.0, -h]],
            BellOutcome::PsiPlus => [[0.0, h], [h, 0.0]],
            BellOutcome::PsiMinus => [[0.0, h], [-h, 0.0]],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            BellOutcome::PhiPlus => "PhiPlus",
            BellOutcome::PhiMinus => "PhiMinus",
            BellOutcome::PsiPlus => "PsiPlus",
            BellOutcome::PsiMinus => "PsiMinus",
        }
    }
}

impl fmt::Display for BellOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Index into the fixed three-qubit joint measurement basis.
///
/// Element `2j + s` is `H⊗H⊗H (|0b⟩ ± |1b̄⟩)/√2`, where `b` is the two-bit
/// value `j` and `s` selects the minus sign. Element 0 is the GHZ-like state.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct JointOutcome(u8);

impl JointOutcome {
    pub const GHZ_LIKE: JointOutcome = JointOutcome(0);

    pub fn new(index: u8) -> Result<Self, QuantumError> {
        if index < 8 {
            Ok(JointOutcome(index))
        } else {
            Err(QuantumError::InvalidJointIndex(index))
        }
    }

    pub fn index(self) -> u8 {
        self.0
    }

    pub fn all() -> impl Iterator<Item = JointOutcome> {
        (0..8).map(JointOutcome)
    }

    /// The GHZ-basis vector this outcome is built from, before the Hadamards.
    pub fn ghz_basis_vector(self) -> StateVector3 {
        let low = (self.0 >> 1) as usize;
        let sign = if self.0 & 1 == 0 { 1.0 } else { -1.0 };
        let label = low;
        let flipped = !label & 0b111;
        let mut values = [0.0; 8];
        values[label] = FRAC_1_SQRT_2;
        values[flipped] = sign * FRAC_1_SQRT_2;
        let amps = values.map(|v| Complex64::new(v, 0.0));
        StateVector3::from_amplitudes_unchecked(amps)
    }

    /// The measurement basis vector for this outcome.
    pub fn basis_vector(self) -> StateVector3 {
        Slot::ALL
            .iter()
            .fold(self.ghz_basis_vector(), |s, &slot| s.hadamard(slot))
    }
}

impl fmt::Display for JointOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::state::{make_ghz_like, TOLERANCE};

    #[test]
    fn joint_basis_is_orthonormal() {
        let vectors: Vec<_> = JointOutcome::all().map(|o| o.basis_vector()).collect();
        for (i, a) in vectors.iter().enumerate() {
            for (j, b) in vectors.iter().enumerate() {
                let ip = a.inner(b);
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!(
                    (ip.re - expected).abs() < 1e-12 && ip.im.abs() < 1e-12,
                    "{i},{j}"
                );
            }
        }
    }

    #[test]
    fn joint_index_zero_is_ghz_like() {
        assert!(JointOutcome::GHZ_LIKE
            .basis_vector()
            .approx_eq(&make_ghz_like(), TOLERANCE));
    }

    #[test]
    fn joint_index_one_is_hadamard_of_ghz_minus() {
        let v = JointOutcome::new(1).unwrap().ghz_basis_vector();
        assert!((v.amplitude(0b000).re - FRAC_1_SQRT_2).abs() < 1e-15);
        assert!((v.amplitude(0b111).re + FRAC_1_SQRT_2).abs() < 1e-15);
    }

    #[test]
    fn joint_index_bounds() {
        assert!(JointOutcome::new(7).is_ok());
        assert!(matches!(
            JointOutcome::new(8),
            Err(QuantumError::InvalidJointIndex(8))
        ));
    }

    #[test]
    fn bell_coefficients_normalized() {
        for b in BellOutcome::ALL {
            let c = b.coefficients();
            let n: f64 = c.iter().flatten().map(|x| x * x).sum();
            assert!((n - 1.0).abs() < 1e-12);
        }
    }
}
