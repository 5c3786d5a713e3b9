//! Dishonest-insider strategies. Bob is the attacker in both cases and Charlie's
//! shadow is the target.
//!
//! A strategy only learns from the bundles its taps see, the public
//! announcements it is handed, and measurements on photons it physically holds.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{
    BundleSlot, ChannelTap, Leg, Party, Payload, Photon, PhotonBundle, TapError, DELAY_TIME_WINDOW,
    INVISIBLE_SPY_WAVELENGTH, LEGITIMATE_WAVELENGTH,
};
use crate::protocol::{BitString, Lab, LabError, Mode, Protocol};
use crate::RandomSource;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AdversaryKind {
    None,
    InterceptResend,
    TrojanHorse,
}

/// Attack selection and its tunables.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum AdversarySpec {
    None,
    InterceptResend {
        /// Number of case-3 triplets Bob lets through. Zero is the plain attack;
        /// anything else is an evasion experiment against the case-3 test.
        allowed_case3: usize,
    },
    TrojanHorse {
        /// Invisible and delay spies attached to every slot (each kind).
        spies_per_slot: usize,
    },
}

impl AdversarySpec {
    pub fn kind(&self) -> AdversaryKind {
        match self {
            AdversarySpec::None => AdversaryKind::None,
            AdversarySpec::InterceptResend { .. } => AdversaryKind::InterceptResend,
            AdversarySpec::TrojanHorse { .. } => AdversaryKind::TrojanHorse,
        }
    }

    pub fn supports(&self, protocol: Protocol) -> bool {
        match self {
            AdversarySpec::None => true,
            AdversarySpec::InterceptResend { .. } => protocol == Protocol::RandomizationBased,
            AdversarySpec::TrojanHorse { .. } => protocol == Protocol::MeasureResend,
        }
    }

    pub fn validate(&self) -> Result<(), AdversaryError> {
        if let AdversarySpec::TrojanHorse { spies_per_slot: 0 } = self {
            return Err(AdversaryError::NoSpies);
        }
        Ok(())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AdversaryError {
    #[error("asked for {requested} case-3 triplets but Charlie shared only {available} photons")]
    TooManyForcedCase3 { requested: usize, available: usize },
    #[error("a Trojan-horse attack needs at least one spy photon per slot")]
    NoSpies,
    #[error("no intercepted photon stored for position {0}")]
    NothingStored(usize),
    #[error(transparent)]
    Lab(#[from] LabError),
}

/// What the adversary has accumulated during a run.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Knowledge {
    /// Genuine photons held in quantum memory, keyed by original position.
    pub stored: BTreeMap<usize, Photon>,
    /// Fake photon wavelength tag to original position.
    pub wavelength_map: BTreeMap<u32, usize>,
    /// Bits learned per position.
    pub recorded_bits: BTreeMap<usize, bool>,
    pub recovered_k_c: BitString,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KnowledgeSummary {
    pub stored_photons: usize,
    pub wavelength_tags: usize,
    pub recorded_bits: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttackOutcome {
    /// The run completed and `K_B ⊕ recovered_K_C = K_A`.
    pub succeeded: bool,
    /// The run aborted.
    pub detected: bool,
    pub bits_recovered: usize,
    /// Recorded bits that differ from Charlie's own SHARE measurements
    /// (Trojan horse only; the intercept-resend attacker reads genuine photons
    /// Charlie never saw).
    pub share_bit_mismatches: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdversaryReport {
    pub spec: AdversarySpec,
    /// Set for the forced-case-3 variant, which goes beyond the published attack.
    pub extension_variant: bool,
    pub knowledge: KnowledgeSummary,
    #[serde(rename = "recovered_k_c")]
    pub recovered_k_c: BitString,
    pub outcome: AttackOutcome,
}

/// A concrete adversary bound to one run.
#[derive(Clone, Debug)]
pub struct AdversaryStrategy {
    spec: AdversarySpec,
    knowledge: Knowledge,
}

impl AdversaryStrategy {
    pub fn new(spec: AdversarySpec) -> Self {
        AdversaryStrategy {
            spec,
            knowledge: Knowledge::default(),
        }
    }

    pub fn honest() -> Self {
        Self::new(AdversarySpec::None)
    }

    pub fn intercept_resend(allowed_case3: usize) -> Self {
        Self::new(AdversarySpec::InterceptResend { allowed_case3 })
    }

    pub fn trojan_horse(spies_per_slot: usize) -> Self {
        Self::new(AdversarySpec::TrojanHorse { spies_per_slot })
    }

    pub fn spec(&self) -> AdversarySpec {
        self.spec
    }

    pub fn kind(&self) -> AdversaryKind {
        self.spec.kind()
    }

    pub fn knowledge(&self) -> &Knowledge {
        &self.knowledge
    }

    /// Legs this strategy listens on.
    pub fn tapped_legs(&self) -> Vec<Leg> {
        match self.spec {
            AdversarySpec::None => vec![],
            AdversarySpec::InterceptResend { .. } | AdversarySpec::TrojanHorse { .. } => {
                vec![Leg::AliceToCharlie, Leg::CharlieToAlice]
            }
        }
    }

    /// Replaces Charlie's incoming particles with wavelength-tagged fakes and
    /// keeps the genuine ones.
    pub fn intercept_resend_tap_outbound(
        &mut self,
        bundle: PhotonBundle,
        rng: &mut RandomSource,
    ) -> PhotonBundle {
        let mut fakes = Vec::with_capacity(bundle.len());
        for (position, slot) in bundle.slots.into_iter().enumerate() {
            if let Some(photon) = slot.photons.into_iter().next() {
                self.knowledge.stored.insert(position, photon);
            }
            let wavelength = position as u32 + 1;
            self.knowledge.wavelength_map.insert(wavelength, position);
            fakes.push(Photon::fake(position, rng.gen(), wavelength));
        }
        PhotonBundle::from_photons(fakes)
    }

    /// Swaps each reflected fake for the stored genuine photon of the same
    /// origin, keeping Charlie's (unknown) slot arrangement.
    pub fn intercept_resend_tap_return(
        &mut self,
        bundle: PhotonBundle,
    ) -> Result<PhotonBundle, TapError> {
        let mut slots = Vec::with_capacity(bundle.len());
        for slot in bundle.slots {
            let wavelength = slot
                .primary()
                .map(|p| p.wavelength)
                .unwrap_or(LEGITIMATE_WAVELENGTH);
            let position = *self
                .knowledge
                .wavelength_map
                .get(&wavelength)
                .ok_or(TapError::UnknownWavelength(wavelength))?;
            let genuine = self
                .knowledge
                .stored
                .remove(&position)
                .ok_or(TapError::UnknownWavelength(wavelength))?;
            slots.push(BundleSlot::single(genuine));
        }
        Ok(PhotonBundle { slots })
    }

    /// Bob's modes once Charlie's reflected positions are public: mirror
    /// Charlie's SHARE choices so case 3 cannot occur, except for
    /// `allowed_case3` randomly picked positions.
    pub fn intercept_resend_choose_modes(
        &self,
        charlie_check_positions: &BTreeSet<usize>,
        triplets: usize,
        share_probability: f64,
        rng: &mut RandomSource,
    ) -> Result<Vec<Mode>, AdversaryError> {
        let allowed = match self.spec {
            AdversarySpec::InterceptResend { allowed_case3 } => allowed_case3,
            _ => 0,
        };
        let charlie_share: Vec<usize> = (0..triplets)
            .filter(|p| !charlie_check_positions.contains(p))
            .collect();
        if allowed > charlie_share.len() {
            return Err(AdversaryError::TooManyForcedCase3 {
                requested: allowed,
                available: charlie_share.len(),
            });
        }
        let forced: BTreeSet<usize> = sample(rng, charlie_share.len(), allowed)
            .into_iter()
            .map(|i| charlie_share[i])
            .collect();
        let modes = (0..triplets)
            .map(|p| {
                if charlie_check_positions.contains(&p) {
                    if rng.gen_bool(share_probability) {
                        Mode::Share
                    } else {
                        Mode::Check
                    }
                } else if forced.contains(&p) {
                    Mode::Check
                } else {
                    Mode::Share
                }
            })
            .collect();
        Ok(modes)
    }

    /// Z-measures the stored genuine particles at the key positions.
    pub fn intercept_resend_harvest(
        &mut self,
        key_positions: &[usize],
        lab: &mut Lab,
        rng: &mut RandomSource,
    ) -> Result<BitString, AdversaryError> {
        let mut recovered = BitString::default();
        for &position in key_positions {
            let photon = self
                .knowledge
                .stored
                .get(&position)
                .ok_or(AdversaryError::NothingStored(position))?;
            let bit = lab.measure_photon(Party::Bob, photon, rng)?;
            self.knowledge.recorded_bits.insert(position, bit);
            recovered.0.push(bit);
        }
        self.knowledge.recovered_k_c = recovered.clone();
        Ok(recovered)
    }

    /// Attaches invisible and delay spies to every slot of Charlie's sequence.
    pub fn trojan_tap_outbound(&mut self, mut bundle: PhotonBundle) -> PhotonBundle {
        let per_slot = match self.spec {
            AdversarySpec::TrojanHorse { spies_per_slot } => spies_per_slot,
            _ => 0,
        };
        for slot in bundle.slots.iter_mut() {
            let Some(host) = slot.primary().copied() else {
                continue;
            };
            for _ in 0..per_slot {
                slot.photons.push(Photon::invisible_spy(&host));
            }
            for _ in 0..per_slot {
                slot.photons.push(Photon::delay_spy(&host));
            }
        }
        bundle
    }

    /// Reads every slot whose spies vanished (Charlie measured and resent) and
    /// strips the surviving spies from reflected slots before Alice sees them.
    pub fn trojan_tap_return(&mut self, bundle: PhotonBundle) -> Result<PhotonBundle, TapError> {
        let per_slot = match self.spec {
            AdversarySpec::TrojanHorse { spies_per_slot } => spies_per_slot,
            _ => 0,
        };
        let mut slots = Vec::with_capacity(bundle.len());
        for (position, slot) in bundle.slots.into_iter().enumerate() {
            let is_spy = |p: &Photon| {
                p.wavelength == INVISIBLE_SPY_WAVELENGTH || p.time_window == DELAY_TIME_WINDOW
            };
            let (spies, rest): (Vec<Photon>, Vec<Photon>) =
                slot.photons.into_iter().partition(is_spy);
            if spies.is_empty() {
                // Z-basis read of a freshly prepared |0⟩ or |1⟩ leaves it as it was.
                let bit = match rest.first().map(|p| p.payload) {
                    Some(Payload::Classical(bit)) => bit,
                    _ => return Err(TapError::AmbiguousSlot(position)),
                };
                self.knowledge.recorded_bits.insert(position, bit);
            } else if spies.len() != 2 * per_slot {
                return Err(TapError::AmbiguousSlot(position));
            }
            slots.push(BundleSlot { photons: rest });
        }
        Ok(PhotonBundle { slots })
    }

    pub fn trojan_harvest(&mut self, key_positions: &[usize]) -> BitString {
        let recovered: BitString = key_positions
            .iter()
            .filter_map(|p| self.knowledge.recorded_bits.get(p).copied())
            .collect();
        self.knowledge.recovered_k_c = recovered.clone();
        recovered
    }

    pub fn summary(&self) -> KnowledgeSummary {
        KnowledgeSummary {
            stored_photons: self.knowledge.stored.len(),
            wavelength_tags: self.knowledge.wavelength_map.len(),
            recorded_bits: self.knowledge.recorded_bits.len(),
        }
    }

    pub fn is_extension_variant(&self) -> bool {
        matches!(self.spec, AdversarySpec::InterceptResend { allowed_case3 } if allowed_case3 > 0)
    }
}

impl ChannelTap for AdversaryStrategy {
    fn tapper(&self) -> Party {
        Party::Bob
    }

    fn intercept(
        &mut self,
        leg: Leg,
        bundle: PhotonBundle,
        rng: &mut RandomSource,
    ) -> Result<PhotonBundle, TapError> {
        match (self.spec, leg) {
            (AdversarySpec::InterceptResend { .. }, Leg::AliceToCharlie) => {
                Ok(self.intercept_resend_tap_outbound(bundle, rng))
            }
            (AdversarySpec::InterceptResend { .. }, Leg::CharlieToAlice) => {
                self.intercept_resend_tap_return(bundle)
            }
            (AdversarySpec::TrojanHorse { .. }, Leg::AliceToCharlie) => {
                Ok(self.trojan_tap_outbound(bundle))
            }
            (AdversarySpec::TrojanHorse { .. }, Leg::CharlieToAlice) => {
                self.trojan_tap_return(bundle)
            }
            _ => Err(TapError::UnexpectedLeg(leg)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{reorder, PhotonKind};
    use crate::quantum::Slot;
    use rand::SeedableRng;

    fn rng(seed: u64) -> RandomSource {
        RandomSource::seed_from_u64(seed)
    }

    #[test]
    fn outbound_substitution() {
        let mut adv = AdversaryStrategy::intercept_resend(0);
        let out = adv.intercept_resend_tap_outbound(
            PhotonBundle::genuine_sequence(8, Slot::Three),
            &mut rng(1),
        );
        assert_eq!(out.len(), 8);
        assert!(out
            .photons()
            .all(|p| p.kind == PhotonKind::Fake && p.wavelength != 0));
        let tags: BTreeSet<u32> = out.photons().map(|p| p.wavelength).collect();
        assert_eq!(tags.len(), 8);
        assert_eq!(adv.knowledge().stored.len(), 8);
        assert_eq!(adv.knowledge().wavelength_map.len(), 8);
        let positions: BTreeSet<usize> = adv.knowledge().wavelength_map.values().copied().collect();
        assert_eq!(positions.len(), 8);
    }

    #[test]
    fn outbound_empty() {
        let mut adv = AdversaryStrategy::intercept_resend(0);
        assert!(adv
            .intercept_resend_tap_outbound(PhotonBundle::default(), &mut rng(1))
            .is_empty());
    }

    #[test]
    fn fake_bits_are_fair() {
        let mut adv = AdversaryStrategy::intercept_resend(0);
        let n = 100_000;
        let out = adv.intercept_resend_tap_outbound(
            PhotonBundle::genuine_sequence(n, Slot::Three),
            &mut rng(7),
        );
        let ones = out
            .photons()
            .filter(|p| matches!(p.payload, Payload::Classical(true)))
            .count();
        let mean = ones as f64 / n as f64;
        // Binomial(1e5, 1/2) ± 6σ.
        assert!((0.49..=0.51).contains(&mean), "{mean}");
    }

    #[test]
    fn return_swap_survives_any_permutation() {
        let mut adv = AdversaryStrategy::intercept_resend(0);
        let fakes = adv.intercept_resend_tap_outbound(
            PhotonBundle::genuine_sequence(8, Slot::Three),
            &mut rng(2),
        );
        let reflected = PhotonBundle {
            slots: [2usize, 5, 7]
                .iter()
                .map(|&i| fakes.slots[i].clone())
                .collect(),
        };
        let (shuffled, _) = reorder(reflected, &[2, 0, 1]).unwrap();
        let back = adv.intercept_resend_tap_return(shuffled).unwrap();
        let got: Vec<(usize, PhotonKind)> = back.photons().map(|p| (p.position, p.kind)).collect();
        assert_eq!(
            got,
            vec![
                (7, PhotonKind::Genuine),
                (2, PhotonKind::Genuine),
                (5, PhotonKind::Genuine)
            ]
        );
        assert!(adv
            .intercept_resend_tap_return(PhotonBundle::default())
            .unwrap()
            .is_empty());
    }

    #[test]
    fn unknown_wavelength_rejected() {
        let mut adv = AdversaryStrategy::intercept_resend(0);
        let stray = PhotonBundle::from_photons([Photon::fake(0, false, 99)]);
        assert_eq!(
            adv.intercept_resend_tap_return(stray).unwrap_err(),
            TapError::UnknownWavelength(99)
        );
    }

    #[test]
    fn mode_mirroring() {
        let adv = AdversaryStrategy::intercept_resend(0);
        let check: BTreeSet<usize> = [1, 3].into_iter().collect();
        let modes = adv
            .intercept_resend_choose_modes(&check, 6, 0.5, &mut rng(3))
            .unwrap();
        for p in [0, 2, 4, 5] {
            assert_eq!(modes[p], Mode::Share);
        }

        let adv = AdversaryStrategy::intercept_resend(3);
        let modes = adv
            .intercept_resend_choose_modes(&check, 6, 0.5, &mut rng(3))
            .unwrap();
        let forced = [0, 2, 4, 5]
            .iter()
            .filter(|&&p| modes[p] == Mode::Check)
            .count();
        assert_eq!(forced, 3);

        let adv = AdversaryStrategy::intercept_resend(5);
        assert_eq!(
            adv.intercept_resend_choose_modes(&check, 6, 0.5, &mut rng(3)),
            Err(AdversaryError::TooManyForcedCase3 {
                requested: 5,
                available: 4
            })
        );
    }

    #[test]
    fn trojan_outbound_counts() {
        let mut adv = AdversaryStrategy::trojan_horse(1);
        let out = adv.trojan_tap_outbound(PhotonBundle::genuine_sequence(100, Slot::Three));
        assert_eq!(out.photon_count(), 300);
        for p in out.photons() {
            match p.kind {
                PhotonKind::InvisibleSpy => assert_ne!(p.wavelength, 0),
                PhotonKind::DelaySpy => {
                    assert_eq!(p.wavelength, 0);
                    assert_eq!(p.time_window, DELAY_TIME_WINDOW);
                }
                _ => {}
            }
        }
        assert!(adv.trojan_tap_outbound(PhotonBundle::default()).is_empty());
    }

    #[test]
    fn trojan_return_reads_vanished_slots() {
        let mut adv = AdversaryStrategy::trojan_horse(1);
        let spied = adv.trojan_tap_outbound(PhotonBundle::genuine_sequence(5, Slot::Three));
        let mut returned = spied.clone();
        returned.slots[1] = BundleSlot::single(Photon::fresh(1, true));
        returned.slots[4] = BundleSlot::single(Photon::fresh(4, false));
        let out = adv.trojan_tap_return(returned).unwrap();
        assert!(out.is_single_photon());
        let bits: Vec<(usize, bool)> = adv
            .knowledge()
            .recorded_bits
            .iter()
            .map(|(k, v)| (*k, *v))
            .collect();
        assert_eq!(bits, vec![(1, true), (4, false)]);
        assert_eq!(adv.trojan_harvest(&[4]).to_string(), "0");
    }

    #[test]
    fn trojan_partial_spies_rejected() {
        let mut adv = AdversaryStrategy::trojan_horse(1);
        let mut spied = adv.trojan_tap_outbound(PhotonBundle::genuine_sequence(2, Slot::Three));
        spied.slots[0].photons.pop();
        assert_eq!(
            adv.trojan_tap_return(spied).unwrap_err(),
            TapError::AmbiguousSlot(0)
        );
    }

    #[test]
    fn pairing_rules() {
        assert!(AdversarySpec::InterceptResend { allowed_case3: 0 }
            .supports(Protocol::RandomizationBased));
        assert!(
            !AdversarySpec::InterceptResend { allowed_case3: 0 }.supports(Protocol::MeasureResend)
        );
        assert!(AdversarySpec::TrojanHorse { spies_per_slot: 1 }.supports(Protocol::MeasureResend));
        assert!(AdversarySpec::TrojanHorse { spies_per_slot: 0 }
            .validate()
            .is_err());
    }
}
