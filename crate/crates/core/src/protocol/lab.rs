use rand::Rng;
use thiserror::Error;

use crate::channel::{CustodyLedger, Party, Payload, Photon};
use crate::quantum::{BellOutcome, JointOutcome, QuantumError, Slot, TripletRegister};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LabError {
    #[error("{party} does not hold slot {slot} of register {register}")]
    NotInCustody {
        party: Party,
        register: usize,
        slot: u8,
    },
    #[error("register {0} does not exist")]
    UnknownRegister(usize),
    #[error("spy photons carry nothing to measure")]
    ProbePhoton,
    #[error(transparent)]
    Quantum(#[from] QuantumError),
}

/// All registers of a run, together with who physically holds each particle.
///
/// Measurements go through here so a party can only touch qubits in its custody.
#[derive(Clone, Debug)]
pub struct Lab {
    registers: Vec<TripletRegister>,
    custody: Vec<[Party; 3]>,
}

impl Lab {
    /// Prepares `count` GHZ-like triplets, all held by Alice.
    pub fn prepare(count: usize) -> Self {
        Lab {
            registers: (0..count).map(TripletRegister::ghz_like).collect(),
            custody: vec![[Party::Alice; 3]; count],
        }
    }

    pub fn len(&self) -> usize {
        self.registers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.registers.is_empty()
    }

    pub fn register(&self, id: usize) -> Option<&TripletRegister> {
        self.registers.get(id)
    }

    pub fn holder(&self, id: usize, slot: Slot) -> Option<Party> {
        self.custody.get(id).map(|c| c[slot.index()])
    }

    fn held_register(
        &mut self,
        who: Party,
        id: usize,
        slots: &[Slot],
    ) -> Result<&mut TripletRegister, LabError> {
        let custody = self.custody.get(id).ok_or(LabError::UnknownRegister(id))?;
        for slot in slots {
            if custody[slot.index()] != who {
                return Err(LabError::NotInCustody {
                    party: who,
                    register: id,
                    slot: slot.number(),
                });
            }
        }
        Ok(&mut self.registers[id])
    }

    /// Z-basis measurement of whatever `photon` carries. Classical-basis photons
    /// are eigenstates and read out without consuming randomness.
    pub fn measure_photon<R: Rng + ?Sized>(
        &mut self,
        who: Party,
        photon: &Photon,
        rng: &mut R,
    ) -> Result<bool, LabError> {
        match photon.payload {
            Payload::Classical(bit) => Ok(bit),
            Payload::Probe => Err(LabError::ProbePhoton),
            Payload::Qubit { register, slot } => Ok(self
                .held_register(who, register, &[slot])?
                .measure_z(slot, rng)?),
        }
    }

    pub fn measure_z<R: Rng + ?Sized>(
        &mut self,
        who: Party,
        id: usize,
        slot: Slot,
        rng: &mut R,
    ) -> Result<bool, LabError> {
        Ok(self.held_register(who, id, &[slot])?.measure_z(slot, rng)?)
    }

    pub fn measure_bell<R: Rng + ?Sized>(
        &mut self,
        who: Party,
        id: usize,
        first: Slot,
        second: Slot,
        rng: &mut R,
    ) -> Result<BellOutcome, LabError> {
        Ok(self
            .held_register(who, id, &[first, second])?
            .measure_bell(first, second, rng)?)
    }

    pub fn measure_joint<R: Rng + ?Sized>(
        &mut self,
        who: Party,
        id: usize,
        rng: &mut R,
    ) -> Result<JointOutcome, LabError> {
        Ok(self
            .held_register(who, id, &Slot::ALL)?
            .measure_joint(rng)?)
    }
}

impl CustodyLedger for Lab {
    fn hand_over(&mut self, photon: &Photon, to: Party) {
        if let Some((id, slot)) = photon.register_ref() {
            if let Some(c) = self.custody.get_mut(id) {
                c[slot.index()] = to;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn custody_is_enforced() {
        let mut lab = Lab::prepare(2);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let photon = Photon::genuine(1, 1, Slot::Three);
        assert!(matches!(
            lab.measure_photon(Party::Charlie, &photon, &mut rng),
            Err(LabError::NotInCustody {
                party: Party::Charlie,
                register: 1,
                slot: 3
            })
        ));
        lab.hand_over(&photon, Party::Charlie);
        assert_eq!(lab.holder(1, Slot::Three), Some(Party::Charlie));
        assert!(lab
            .measure_photon(Party::Charlie, &photon, &mut rng)
            .is_ok());
        assert!(lab.register(1).unwrap().is_collapsed(Slot::Three));
    }

    #[test]
    fn classical_photons_read_directly() {
        let mut lab = Lab::prepare(0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(lab
            .measure_photon(Party::Bob, &Photon::fresh(0, true), &mut rng)
            .unwrap());
        assert!(!lab
            .measure_photon(Party::Bob, &Photon::fake(0, false, 9), &mut rng)
            .unwrap());
    }

    #[test]
    fn joint_needs_all_three_particles() {
        let mut lab = Lab::prepare(1);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        lab.hand_over(&Photon::genuine(0, 0, Slot::Two), Party::Bob);
        assert!(lab.measure_joint(Party::Alice, 0, &mut rng).is_err());
        lab.hand_over(&Photon::genuine(0, 0, Slot::Two), Party::Alice);
        assert_eq!(
            lab.measure_joint(Party::Alice, 0, &mut rng).unwrap(),
            JointOutcome::GHZ_LIKE
        );
    }
}
