use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::basis::{BellOutcome, JointOutcome};
use super::state::{make_ghz_like, Slot, StateVector3};
use super::QuantumError;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// What has happened to one qubit of a register.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SlotRecord {
    Live,
    Z(bool),
    Bell(BellOutcome),
    Joint(JointOutcome),
}

impl SlotRecord {
    pub fn is_collapsed(self) -> bool {
        !matches!(self, SlotRecord::Live)
    }
}

/// One GHZ-like triplet with per-slot collapse tracking.
#[derive(Clone, Debug)]
pub struct TripletRegister {
    id: usize,
    state: StateVector3,
    slots: [SlotRecord; 3],
}

impl TripletRegister {
    pub fn new(id: usize, state: StateVector3) -> Self {
        TripletRegister {
            id,
            state,
            slots: [SlotRecord::Live; 3],
        }
    }

    pub fn ghz_like(id: usize) -> Self {
        Self::new(id, make_ghz_like())
    }

    pub fn id(&self) -> usize {
        self.id
    }

    pub fn state(&self) -> &StateVector3 {
        &self.state
    }

    pub fn record(&self, slot: Slot) -> SlotRecord {
        self.slots[slot.index()]
    }

    pub fn is_collapsed(&self, slot: Slot) -> bool {
        self.record(slot).is_collapsed()
    }

    /// The Z outcome recorded on `slot`, if it was Z-measured.
    pub fn z_outcome(&self, slot: Slot) -> Option<bool> {
        match self.record(slot) {
            SlotRecord::Z(bit) => Some(bit),
            _ => None,
        }
    }

    fn ensure_live(&self, slot: Slot) -> Result<(), QuantumError> {
        if self.is_collapsed(slot) {
            Err(QuantumError::AlreadyCollapsed(slot))
        } else {
            Ok(())
        }
    }

    /// Z-basis measurement of one slot. Returns `true` for `|1⟩`.
    pub fn measure_z<R: Rng + ?Sized>(
        &mut self,
        slot: Slot,
        rng: &mut R,
    ) -> Result<bool, QuantumError> {
        self.ensure_live(slot)?;
        let amps = self.state.amplitudes();
        let mut weights = [0.0f64; 2];
        for (label, a) in amps.iter().enumerate() {
            weights[slot.bit_of(label) as usize] += a.norm_sqr();
        }
        let outcome = sample_index(&weights, rng.gen::<f64>()) == 1;
        let scale = 1.0 / weights[outcome as usize].sqrt();
        let mut out = [ZERO; 8];
        for (label, a) in amps.iter().enumerate() {
            if slot.bit_of(label) == outcome {
                out[label] = a * scale;
            }
        }
        self.state = StateVector3::from_amplitudes_unchecked(out);
        self.slots[slot.index()] = SlotRecord::Z(outcome);
        Ok(outcome)
    }

    /// Bell measurement on the pair `(first, second)`.
    ///
    /// The third slot keeps its conditional state.
    pub fn measure_bell<R: Rng + ?Sized>(
        &mut self,
        first: Slot,
        second: Slot,
        rng: &mut R,
    ) -> Result<BellOutcome, QuantumError> {
        if first == second {
            return Err(QuantumError::OverlappingSlots(first));
        }
        self.ensure_live(first)?;
        self.ensure_live(second)?;
        let rest = Slot::ALL
            .into_iter()
            .find(|s| *s != first && *s != second)
            .expect("three slots");
        let label = |x: bool, y: bool, z: bool| {
            ((x as usize) << first.shift())
                | ((y as usize) << second.shift())
                | ((z as usize) << rest.shift())
        };
        let amps = self.state.amplitudes();

        // Contract the pair against each Bell vector, leaving the remaining qubit.
        let mut remainders = [[ZERO; 2]; 4];
        let mut weights = [0.0f64; 4];
        for (k, bell) in BellOutcome::ALL.iter().enumerate() {
            let c = bell.coefficients();
            for z in [false, true] {
                let mut acc = ZERO;
                for x in [false, true] {
                    for y in [false, true] {
                        acc += amps[label(x, y, z)] * c[x as usize][y as usize];
                    }
                }
                remainders[k][z as usize] = acc;
            }
            weights[k] = remainders[k].iter().map(|a| a.norm_sqr()).sum();
        }
        let k = sample_index(&weights, rng.gen::<f64>());
        let bell = BellOutcome::ALL[k];
        let c = bell.coefficients();
        let scale = 1.0 / weights[k].sqrt();
        let mut out = [ZERO; 8];
        for x in [false, true] {
            for y in [false, true] {
                for z in [false, true] {
                    out[label(x, y, z)] =
                        remainders[k][z as usize] * c[x as usize][y as usize] * scale;
                }
            }
        }
        self.state = StateVector3::from_amplitudes_unchecked(out);
        self.slots[first.index()] = SlotRecord::Bell(bell);
        self.slots[second.index()] = SlotRecord::Bell(bell);
        Ok(bell)
    }

    /// Projective measurement of all three qubits in the joint basis.
    pub fn measure_joint<R: Rng + ?Sized>(
        &mut self,
        rng: &mut R,
    ) -> Result<JointOutcome, QuantumError> {
        for slot in Slot::ALL {
            self.ensure_live(slot)?;
        }
        let vectors: Vec<StateVector3> = JointOutcome::all().map(|o| o.basis_vector()).collect();
        let weights: Vec<f64> = vectors
            .iter()
            .map(|v| v.inner(&self.state).norm_sqr())
            .collect();
        let k = sample_index(&weights, rng.gen::<f64>());
        let outcome = JointOutcome::new(k as u8)?;
        self.state = vectors[k].clone();
        self.slots = [SlotRecord::Joint(outcome); 3];
        Ok(outcome)
    }
}

/// Picks an index with probability proportional to `weights`, using a uniform
/// draw `u` in `[0, 1)`. Zero-weight entries are never selected.
fn sample_index(weights: &[f64], u: f64) -> usize {
    let total: f64 = weights.iter().sum();
    let target = u * total;
    let mut acc = 0.0;
    let mut last_nonzero = 0;
    for (i, w) in weights.iter().enumerate() {
        if *w <= 0.0 {
            continue;
        }
        last_nonzero = i;
        acc += w;
        if target < acc {
            return i;
        }
    }
    last_nonzero
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::state::TOLERANCE;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn z_on_basis_state_is_deterministic() {
        let mut r = rng(1);
        for _ in 0..50 {
            let mut reg = TripletRegister::new(0, StateVector3::basis(0));
            assert!(!reg.measure_z(Slot::Two, &mut r).unwrap());
        }
    }

    #[test]
    fn z_collapse_zeroes_disagreeing_labels() {
        let mut r = rng(2);
        let mut reg = TripletRegister::ghz_like(0);
        let bit = reg.measure_z(Slot::Two, &mut r).unwrap();
        assert_eq!(reg.z_outcome(Slot::Two), Some(bit));
        for label in 0..8 {
            if Slot::Two.bit_of(label) != bit {
                assert_eq!(reg.state().amplitude(label), ZERO);
            }
        }
        assert!(reg.state().is_normalized());
    }

    #[test]
    fn remeasuring_is_rejected() {
        let mut r = rng(3);
        let mut reg = TripletRegister::ghz_like(0);
        reg.measure_z(Slot::One, &mut r).unwrap();
        assert!(matches!(
            reg.measure_z(Slot::One, &mut r),
            Err(QuantumError::AlreadyCollapsed(Slot::One))
        ));
        assert!(matches!(
            reg.measure_bell(Slot::One, Slot::Three, &mut r),
            Err(QuantumError::AlreadyCollapsed(Slot::One))
        ));
        assert!(matches!(
            reg.measure_joint(&mut r),
            Err(QuantumError::AlreadyCollapsed(_))
        ));
    }

    #[test]
    fn parity_holds_in_every_order() {
        let mut r = rng(4);
        let orders = [
            [Slot::One, Slot::Two, Slot::Three],
            [Slot::Two, Slot::Three, Slot::One],
            [Slot::Three, Slot::One, Slot::Two],
        ];
        for order in orders {
            for _ in 0..200 {
                let mut reg = TripletRegister::ghz_like(0);
                for slot in order {
                    reg.measure_z(slot, &mut r).unwrap();
                }
                let b: Vec<bool> = Slot::ALL
                    .iter()
                    .map(|s| reg.z_outcome(*s).unwrap())
                    .collect();
                assert_eq!(b[0], b[1] ^ b[2]);
            }
        }
    }

    #[test]
    fn bell_after_agent_measurement_is_determined() {
        let mut r = rng(5);
        for _ in 0..200 {
            let mut reg = TripletRegister::ghz_like(0);
            let bob = reg.measure_z(Slot::Two, &mut r).unwrap();
            let bell = reg.measure_bell(Slot::One, Slot::Three, &mut r).unwrap();
            let expected = if bob {
                BellOutcome::PsiPlus
            } else {
                BellOutcome::PhiPlus
            };
            assert_eq!(bell, expected);
            assert!(reg.is_collapsed(Slot::One) && reg.is_collapsed(Slot::Three));
            assert!(reg.state().is_normalized());
        }
    }

    #[test]
    fn bell_on_product_zero_zero_never_psi() {
        let mut r = rng(6);
        for _ in 0..200 {
            let mut reg = TripletRegister::new(0, StateVector3::basis(0));
            let bell = reg.measure_bell(Slot::One, Slot::Two, &mut r).unwrap();
            assert!(matches!(bell, BellOutcome::PhiPlus | BellOutcome::PhiMinus));
        }
    }

    #[test]
    fn bell_leaves_remaining_slot_conditional_state() {
        let mut r = rng(7);
        for _ in 0..100 {
            let mut reg = TripletRegister::ghz_like(0);
            let bell = reg.measure_bell(Slot::One, Slot::Three, &mut r).unwrap();
            let bob = reg.measure_z(Slot::Two, &mut r).unwrap();
            let expected = if bob {
                BellOutcome::PsiPlus
            } else {
                BellOutcome::PhiPlus
            };
            assert_eq!(bell, expected);
        }
    }

    #[test]
    fn bell_same_slot_rejected() {
        let mut r = rng(8);
        let mut reg = TripletRegister::ghz_like(0);
        assert!(matches!(
            reg.measure_bell(Slot::Two, Slot::Two, &mut r),
            Err(QuantumError::OverlappingSlots(Slot::Two))
        ));
    }

    #[test]
    fn joint_on_ghz_like_is_index_zero() {
        let mut r = rng(9);
        for _ in 0..100 {
            let mut reg = TripletRegister::ghz_like(0);
            assert_eq!(reg.measure_joint(&mut r).unwrap(), JointOutcome::GHZ_LIKE);
            assert!(reg.state().approx_eq(&make_ghz_like(), TOLERANCE));
        }
    }

    #[test]
    fn joint_on_orthogonal_state_never_index_zero() {
        let mut r = rng(10);
        let state = JointOutcome::new(1).unwrap().basis_vector();
        for _ in 0..100 {
            let mut reg = TripletRegister::new(0, state.clone());
            assert_ne!(reg.measure_joint(&mut r).unwrap(), JointOutcome::GHZ_LIKE);
        }
    }

    #[test]
    fn sample_index_skips_zero_weights() {
        assert_eq!(sample_index(&[0.0, 1.0], 0.0), 1);
        assert_eq!(sample_index(&[1.0, 0.0], 0.999_999), 0);
        assert_eq!(sample_index(&[0.5, 0.5], 0.25), 0);
        assert_eq!(sample_index(&[0.5, 0.5], 0.75), 1);
    }
}
