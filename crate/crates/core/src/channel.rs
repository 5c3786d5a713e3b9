//! Photon sequences in transit between the dealer and the agents.
//!
//! Wavelengths and time windows are integer tags. The legitimate band is
//! wavelength 0 and every legitimate photon sits in time window 0.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::quantum::Slot;
use crate::RandomSource;

pub const LEGITIMATE_WAVELENGTH: u32 = 0;
/// Tag used for invisible spy photons; off-band but next to the legitimate band.
pub const INVISIBLE_SPY_WAVELENGTH: u32 = 1;
pub const HOST_TIME_WINDOW: u32 = 0;
pub const DELAY_TIME_WINDOW: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Party {
    Alice,
    Bob,
    Charlie,
}

impl fmt::Display for Party {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Party::Alice => "alice",
            Party::Bob => "bob",
            Party::Charlie => "charlie",
        })
    }
}

/// A directed quantum channel.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Leg {
    AliceToBob,
    AliceToCharlie,
    BobToAlice,
    CharlieToAlice,
}

impl Leg {
    pub fn recipient(self) -> Party {
        match self {
            Leg::AliceToBob => Party::Bob,
            Leg::AliceToCharlie => Party::Charlie,
            Leg::BobToAlice | Leg::CharlieToAlice => Party::Alice,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Payload {
    /// A particle of a register.
    Qubit { register: usize, slot: Slot },
    /// A standalone photon prepared in `|0⟩` or `|1⟩`.
    Classical(bool),
    /// Spy photon carrying no protocol information.
    Probe,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PhotonKind {
    Genuine,
    Fake,
    Fresh,
    InvisibleSpy,
    DelaySpy,
}

impl PhotonKind {
    pub fn is_spy(self) -> bool {
        matches!(self, PhotonKind::InvisibleSpy | PhotonKind::DelaySpy)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Photon {
    pub payload: Payload,
    pub wavelength: u32,
    pub time_window: u32,
    pub kind: PhotonKind,
    /// Index in the sequence that originally carried the photon.
    pub position: usize,
}

impl Photon {
    pub fn genuine(position: usize, register: usize, slot: Slot) -> Self {
        Photon {
            payload: Payload::Qubit { register, slot },
            wavelength: LEGITIMATE_WAVELENGTH,
            time_window: HOST_TIME_WINDOW,
            kind: PhotonKind::Genuine,
            position,
        }
    }

    pub fn fake(position: usize, bit: bool, wavelength: u32) -> Self {
        Photon {
            payload: Payload::Classical(bit),
            wavelength,
            time_window: HOST_TIME_WINDOW,
            kind: PhotonKind::Fake,
            position,
        }
    }

    pub fn fresh(position: usize, bit: bool) -> Self {
        Photon {
            payload: Payload::Classical(bit),
            wavelength: LEGITIMATE_WAVELENGTH,
            time_window: HOST_TIME_WINDOW,
            kind: PhotonKind::Fresh,
            position,
        }
    }

    pub fn invisible_spy(host: &Photon) -> Self {
        Photon {
            payload: Payload::Probe,
            wavelength: INVISIBLE_SPY_WAVELENGTH,
            time_window: host.time_window,
            kind: PhotonKind::InvisibleSpy,
            position: host.position,
        }
    }

    pub fn delay_spy(host: &Photon) -> Self {
        Photon {
            payload: Payload::Probe,
            wavelength: host.wavelength,
            time_window: DELAY_TIME_WINDOW,
            kind: PhotonKind::DelaySpy,
            position: host.position,
        }
    }

    pub fn register_ref(&self) -> Option<(usize, Slot)> {
        match self.payload {
            Payload::Qubit { register, slot } => Some((register, slot)),
            _ => None,
        }
    }
}

/// One time slot of a sequence: the carried photon plus anything riding along.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BundleSlot {
    pub photons: Vec<Photon>,
}

impl BundleSlot {
    pub fn single(photon: Photon) -> Self {
        BundleSlot {
            photons: vec![photon],
        }
    }

    /// The photon a wavelength-blind detector acts on.
    pub fn primary(&self) -> Option<&Photon> {
        self.photons.first()
    }

    pub fn len(&self) -> usize {
        self.photons.len()
    }

    pub fn is_empty(&self) -> bool {
        self.photons.is_empty()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PhotonBundle {
    pub slots: Vec<BundleSlot>,
}

impl PhotonBundle {
    pub fn from_photons(photons: impl IntoIterator<Item = Photon>) -> Self {
        PhotonBundle {
            slots: photons.into_iter().map(BundleSlot::single).collect(),
        }
    }

    /// The agent particles of `count` registers, one per slot.
    pub fn genuine_sequence(count: usize, slot: Slot) -> Self {
        Self::from_photons((0..count).map(|i| Photon::genuine(i, i, slot)))
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn photon_count(&self) -> usize {
        self.slots.iter().map(BundleSlot::len).sum()
    }

    pub fn photons(&self) -> impl Iterator<Item = &Photon> {
        self.slots.iter().flat_map(|s| s.photons.iter())
    }

    /// True when every slot carries exactly one photon.
    pub fn is_single_photon(&self) -> bool {
        self.slots.iter().all(|s| s.len() == 1)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChannelError {
    #[error("leg {0:?} already has a tap registered")]
    AlreadyTapped(Leg),
    #[error("permutation is not a bijection on 0..{0}")]
    NotBijective(usize),
    #[error(transparent)]
    Tap(#[from] TapError),
}

/// Failures raised by an adversary handler; all of them indicate a model violation.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum TapError {
    #[error("returned photon carries unrecognized wavelength tag {0}")]
    UnknownWavelength(u32),
    #[error("slot {0} retains only part of its spy photons")]
    AmbiguousSlot(usize),
    #[error("handler does not act on leg {0:?}")]
    UnexpectedLeg(Leg),
}

/// Receives custody transfers of register particles as bundles move.
pub trait CustodyLedger {
    fn hand_over(&mut self, photon: &Photon, to: Party);
}

/// An adversary hook on one or more legs.
pub trait ChannelTap {
    /// The party physically holding intercepted photons.
    fn tapper(&self) -> Party;

    fn intercept(
        &mut self,
        leg: Leg,
        bundle: PhotonBundle,
        rng: &mut RandomSource,
    ) -> Result<PhotonBundle, TapError>;
}

/// Routing table of tapped legs. A leg carries at most one handler.
#[derive(Clone, Debug, Default)]
pub struct Channel {
    tapped: BTreeSet<Leg>,
}

impl Channel {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register_tap(&mut self, leg: Leg) -> Result<(), ChannelError> {
        if !self.tapped.insert(leg) {
            return Err(ChannelError::AlreadyTapped(leg));
        }
        Ok(())
    }

    pub fn is_tapped(&self, leg: Leg) -> bool {
        self.tapped.contains(&leg)
    }

    /// Moves `bundle` along `leg`. Lossless and noiseless; a registered tap
    /// sees the bundle first and decides what reaches the recipient.
    pub fn transmit<T, C>(
        &self,
        bundle: PhotonBundle,
        leg: Leg,
        tap: &mut T,
        custody: &mut C,
        rng: &mut RandomSource,
    ) -> Result<PhotonBundle, ChannelError>
    where
        T: ChannelTap + ?Sized,
        C: CustodyLedger + ?Sized,
    {
        let delivered = if self.is_tapped(leg) {
            let tapper = tap.tapper();
            for photon in bundle.photons() {
                custody.hand_over(photon, tapper);
            }
            tap.intercept(leg, bundle, rng)?
        } else {
            bundle
        };
        for photon in delivered.photons() {
            custody.hand_over(photon, leg.recipient());
        }
        Ok(delivered)
    }
}

fn check_bijection(permutation: &[usize], len: usize) -> Result<(), ChannelError> {
    if permutation.len() != len {
        return Err(ChannelError::NotBijective(len));
    }
    let mut seen = vec![false; len];
    for &p in permutation {
        if p >= len || seen[p] {
            return Err(ChannelError::NotBijective(len));
        }
        seen[p] = true;
    }
    Ok(())
}

/// Delay-line reordering: output slot `j` carries input slot `permutation[j]`.
pub fn reorder(
    bundle: PhotonBundle,
    permutation: &[usize],
) -> Result<(PhotonBundle, Vec<usize>), ChannelError> {
    check_bijection(permutation, bundle.len())?;
    let mut input: Vec<Option<BundleSlot>> = bundle.slots.into_iter().map(Some).collect();
    let slots = permutation
        .iter()
        .map(|&p| input[p].take().expect("bijection checked"))
        .collect();
    Ok((PhotonBundle { slots }, permutation.to_vec()))
}

/// Inverts [`reorder`] given the announced permutation.
pub fn restore_order(
    bundle: PhotonBundle,
    permutation: &[usize],
) -> Result<PhotonBundle, ChannelError> {
    check_bijection(permutation, bundle.len())?;
    let mut out: Vec<Option<BundleSlot>> = vec![None; bundle.len()];
    for (slot, &p) in bundle.slots.into_iter().zip(permutation) {
        out[p] = Some(slot);
    }
    Ok(PhotonBundle {
        slots: out
            .into_iter()
            .map(|s| s.expect("bijection checked"))
            .collect(),
    })
}

/// Set of wavelength tags a filter lets through.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Passband {
    pub low: u32,
    pub high: u32,
}

impl Passband {
    pub const LEGITIMATE: Passband = Passband {
        low: LEGITIMATE_WAVELENGTH,
        high: LEGITIMATE_WAVELENGTH,
    };

    pub fn contains(&self, wavelength: u32) -> bool {
        (self.low..=self.high).contains(&wavelength)
    }
}

/// Wavelength quantum filter: drops every out-of-band photon and counts them.
pub fn wavelength_filter(bundle: PhotonBundle, passband: Passband) -> (PhotonBundle, usize) {
    let mut flagged = 0;
    let slots = bundle
        .slots
        .into_iter()
        .map(|slot| {
            let before = slot.len();
            let photons: Vec<Photon> = slot
                .photons
                .into_iter()
                .filter(|p| passband.contains(p.wavelength))
                .collect();
            flagged += before - photons.len();
            BundleSlot { photons }
        })
        .collect();
    (PhotonBundle { slots }, flagged)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhotonNumberReport {
    pub counts: Vec<usize>,
    pub multi_photon_rate: f64,
}

/// Photon number splitter: per-slot photon counts and the fraction of slots
/// holding more than one photon.
pub fn photon_number_split(bundle: &PhotonBundle) -> PhotonNumberReport {
    let counts: Vec<usize> = bundle.slots.iter().map(BundleSlot::len).collect();
    let multi = counts.iter().filter(|&&c| c > 1).count();
    let multi_photon_rate = if counts.is_empty() {
        0.0
    } else {
        multi as f64 / counts.len() as f64
    };
    PhotonNumberReport {
        counts,
        multi_photon_rate,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;

    struct NoTap;

    impl ChannelTap for NoTap {
        fn tapper(&self) -> Party {
            Party::Bob
        }

        fn intercept(
            &mut self,
            leg: Leg,
            _: PhotonBundle,
            _: &mut RandomSource,
        ) -> Result<PhotonBundle, TapError> {
            Err(TapError::UnexpectedLeg(leg))
        }
    }

    #[derive(Default)]
    struct Ledger(Vec<(usize, Party)>);

    impl CustodyLedger for Ledger {
        fn hand_over(&mut self, photon: &Photon, to: Party) {
            self.0.push((photon.position, to));
        }
    }

    fn with_delay_spies(n: usize, spied: usize) -> PhotonBundle {
        let mut b = PhotonBundle::genuine_sequence(n, Slot::Three);
        for slot in b.slots.iter_mut().take(spied) {
            let host = slot.photons[0];
            slot.photons.push(Photon::delay_spy(&host));
        }
        b
    }

    #[test]
    fn untapped_transmit_is_identity() {
        let b = PhotonBundle::genuine_sequence(5, Slot::Two);
        let mut ledger = Ledger::default();
        let mut rng = RandomSource::seed_from_u64(0);
        let out = Channel::new()
            .transmit(
                b.clone(),
                Leg::AliceToBob,
                &mut NoTap,
                &mut ledger,
                &mut rng,
            )
            .unwrap();
        assert_eq!(out, b);
        assert!(ledger.0.iter().all(|(_, p)| *p == Party::Bob));
    }

    #[test]
    fn double_registration_rejected() {
        let mut c = Channel::new();
        c.register_tap(Leg::AliceToCharlie).unwrap();
        assert_eq!(
            c.register_tap(Leg::AliceToCharlie),
            Err(ChannelError::AlreadyTapped(Leg::AliceToCharlie))
        );
    }

    #[test]
    fn reversal_of_four() {
        let b = PhotonBundle::genuine_sequence(4, Slot::Three);
        let (r, perm) = reorder(b.clone(), &[3, 2, 1, 0]).unwrap();
        let positions: Vec<usize> = r.photons().map(|p| p.position).collect();
        assert_eq!(positions, vec![3, 2, 1, 0]);
        assert_eq!(restore_order(r, &perm).unwrap(), b);
        let (same, _) = reorder(b.clone(), &[0, 1, 2, 3]).unwrap();
        assert_eq!(same, b);
    }

    #[test]
    fn non_bijection_rejected() {
        let b = PhotonBundle::genuine_sequence(3, Slot::Three);
        assert_eq!(
            reorder(b.clone(), &[0, 0, 1]).unwrap_err(),
            ChannelError::NotBijective(3)
        );
        assert_eq!(
            reorder(b.clone(), &[0, 1]).unwrap_err(),
            ChannelError::NotBijective(3)
        );
        assert_eq!(
            reorder(b, &[0, 1, 3]).unwrap_err(),
            ChannelError::NotBijective(3)
        );
    }

    #[test]
    fn filter_on_honest_bundle_flags_nothing() {
        let b = PhotonBundle::genuine_sequence(10, Slot::Three);
        let (out, flagged) = wavelength_filter(b.clone(), Passband::LEGITIMATE);
        assert_eq!(flagged, 0);
        assert_eq!(out, b);
    }

    #[test]
    fn filter_removes_invisible_spies_only() {
        let mut b = with_delay_spies(10, 10);
        for slot in b.slots.iter_mut().take(7) {
            let host = slot.photons[0];
            slot.photons.push(Photon::invisible_spy(&host));
        }
        let (out, flagged) = wavelength_filter(b, Passband::LEGITIMATE);
        assert_eq!(flagged, 7);
        assert!(out.photons().all(|p| p.kind != PhotonKind::InvisibleSpy));
        assert_eq!(
            out.photons()
                .filter(|p| p.kind == PhotonKind::DelaySpy)
                .count(),
            10
        );
    }

    #[test]
    fn filter_blind_to_delay_spies() {
        let (_, flagged) = wavelength_filter(with_delay_spies(10, 10), Passband::LEGITIMATE);
        assert_eq!(flagged, 0);
    }

    #[test]
    fn pns_counts() {
        let honest = photon_number_split(&PhotonBundle::genuine_sequence(100, Slot::Three));
        assert!(honest.counts.iter().all(|&c| c == 1));
        assert_eq!(honest.multi_photon_rate, 0.0);

        let all = photon_number_split(&with_delay_spies(100, 100));
        assert!(all.counts.iter().all(|&c| c == 2));
        assert_eq!(all.multi_photon_rate, 1.0);

        let some = photon_number_split(&with_delay_spies(100, 30));
        assert!((some.multi_photon_rate - 0.3).abs() < 1e-12);

        assert_eq!(
            photon_number_split(&PhotonBundle::default()).multi_photon_rate,
            0.0
        );
    }

    #[test]
    fn spy_tags() {
        let host = Photon::genuine(3, 3, Slot::Three);
        let inv = Photon::invisible_spy(&host);
        let delay = Photon::delay_spy(&host);
        assert_ne!(inv.wavelength, LEGITIMATE_WAVELENGTH);
        assert!(!Passband::LEGITIMATE.contains(inv.wavelength));
        assert_eq!(delay.wavelength, host.wavelength);
        assert_ne!(delay.time_window, host.time_window);
    }

    proptest! {
        #[test]
        fn reorder_then_restore_is_identity(perm in Just((0..20usize).collect::<Vec<_>>()).prop_shuffle()) {
            let b = PhotonBundle::genuine_sequence(20, Slot::Three);
            let (r, announced) = reorder(b.clone(), &perm).unwrap();
            prop_assert_eq!(restore_order(r, &announced).unwrap(), b);
        }

        #[test]
        fn filter_removes_exactly_out_of_band(tags in proptest::collection::vec(0u32..4, 0..60)) {
            let b = PhotonBundle::from_photons(tags.iter().enumerate().map(|(i, &w)| Photon::fake(i, false, w)));
            let (out, flagged) = wavelength_filter(b, Passband::LEGITIMATE);
            prop_assert_eq!(flagged, tags.iter().filter(|&&w| w != 0).count());
            prop_assert!(out.photons().all(|p| p.wavelength == 0));
            prop_assert_eq!(out.photon_count(), tags.iter().filter(|&&w| w == 0).count());
        }
    }
}
