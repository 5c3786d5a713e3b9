use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};

use crate::adversary::{AdversaryKind, AdversaryReport, AdversaryStrategy, AttackOutcome};
use crate::channel::{
    photon_number_split, reorder, wavelength_filter, BundleSlot, Channel, Leg, Party, Passband,
    Photon, PhotonBundle,
};
use crate::quantum::{Outcome, Slot};
use crate::RandomSource;

use super::check::{case3_occurrence_test, eavesdrop_check, extract_keys, Case3Test};
use super::events::{AnnouncementKind, EventKind, EventLog};
use super::lab::Lab;
use super::{
    AbortReason, BitString, Case, CaseRecord, CheckVerdict, KeyTriple, Mode, PhotonTally, Protocol,
    RunConfig, RunError, RunReport, SpyInspection,
};

/// Independent random streams for each actor in a run.
///
/// Keeping them separate means an adversary's coin flips never shift the
/// honest parties' choices or the measurement outcomes.
#[derive(Clone, Debug)]
pub struct RunStreams {
    pub bob: RandomSource,
    pub charlie: RandomSource,
    /// Born-rule sampling for every measurement.
    pub nature: RandomSource,
    pub adversary: RandomSource,
}

impl RunStreams {
    pub fn from_seed(seed: u64) -> Self {
        let stream = |id: u64| {
            let mut r = RandomSource::seed_from_u64(seed);
            r.set_stream(id);
            r
        };
        RunStreams {
            bob: stream(1),
            charlie: stream(2),
            nature: stream(3),
            adversary: stream(4),
        }
    }

    pub fn derive<R: RngCore + ?Sized>(rng: &mut R) -> Self {
        Self::from_seed(rng.next_u64())
    }
}

pub fn run_randomization_based<R: RngCore + ?Sized>(
    config: &RunConfig,
    adversary: &mut AdversaryStrategy,
    rng: &mut R,
) -> Result<RunReport, RunError> {
    run_protocol(
        Protocol::RandomizationBased,
        config,
        adversary,
        RunStreams::derive(rng),
    )
}

pub fn run_measure_resend<R: RngCore + ?Sized>(
    config: &RunConfig,
    adversary: &mut AdversaryStrategy,
    rng: &mut R,
) -> Result<RunReport, RunError> {
    run_protocol(
        Protocol::MeasureResend,
        config,
        adversary,
        RunStreams::derive(rng),
    )
}

/// What an agent sends back and later announces.
struct AgentReturn {
    modes: Vec<Mode>,
    share_bits: BTreeMap<usize, bool>,
    returned: PhotonBundle,
    check_positions: Vec<usize>,
    order: Option<Vec<usize>>,
}

fn choose_modes(triplets: usize, share_probability: f64, rng: &mut RandomSource) -> Vec<Mode> {
    (0..triplets)
        .map(|_| {
            if rng.gen_bool(share_probability) {
                Mode::Share
            } else {
                Mode::Check
            }
        })
        .collect()
}

/// Step 2 for one agent. The agent's detector is wavelength-blind: it acts on
/// the primary photon of each slot and reflects whole slots.
#[allow(clippy::too_many_arguments)]
fn agent_step(
    protocol: Protocol,
    party: Party,
    delivered: PhotonBundle,
    modes: Vec<Mode>,
    lab: &mut Lab,
    own_rng: &mut RandomSource,
    nature: &mut RandomSource,
    log: &mut EventLog,
) -> Result<AgentReturn, RunError> {
    let mut share_bits = BTreeMap::new();
    let mut returned = Vec::new();
    let mut check_positions = Vec::new();
    for (position, (slot, mode)) in delivered.slots.into_iter().zip(&modes).enumerate() {
        match mode {
            Mode::Share => {
                let primary = *slot.primary().ok_or(RunError::EmptySlot(position))?;
                let bit = lab.measure_photon(party, &primary, nature)?;
                share_bits.insert(position, bit);
                if protocol == Protocol::MeasureResend {
                    returned.push(BundleSlot::single(Photon::fresh(position, bit)));
                }
            }
            Mode::Check => {
                check_positions.push(position);
                returned.push(slot);
            }
        }
    }
    log.push(
        2,
        EventKind::Measure {
            party,
            count: share_bits.len(),
        },
    );
    let returned = PhotonBundle { slots: returned };
    let (returned, order) = match protocol {
        Protocol::RandomizationBased => {
            let mut permutation: Vec<usize> = (0..returned.len()).collect();
            permutation.shuffle(own_rng);
            let (bundle, permutation) = reorder(returned, &permutation)?;
            (bundle, Some(permutation))
        }
        Protocol::MeasureResend => (returned, None),
    };
    log.push(
        2,
        EventKind::Reflect {
            party,
            count: check_positions.len(),
            reordered: order.is_some(),
        },
    );
    Ok(AgentReturn {
        modes,
        share_bits,
        returned,
        check_positions,
        order,
    })
}

/// Alice's Step-3 bookkeeping: maps each returned slot to its original position.
fn restore(
    protocol: Protocol,
    bundle: PhotonBundle,
    agent: &AgentReturn,
) -> BTreeMap<usize, BundleSlot> {
    match (protocol, &agent.order) {
        (Protocol::RandomizationBased, Some(order)) => bundle
            .slots
            .into_iter()
            .zip(order)
            .map(|(slot, &k)| (agent.check_positions[k], slot))
            .collect(),
        _ => bundle.slots.into_iter().enumerate().collect(),
    }
}

fn inspect(party: Party, bundle: PhotonBundle, threshold: f64) -> (PhotonBundle, SpyInspection) {
    let (filtered, flagged) = wavelength_filter(bundle, Passband::LEGITIMATE);
    let pns = photon_number_split(&filtered);
    let restart = flagged > 0 || pns.multi_photon_rate > threshold;
    (
        filtered,
        SpyInspection {
            party,
            flagged,
            multi_photon_rate: pns.multi_photon_rate,
            restart,
        },
    )
}

fn returned_particle(
    returned: Option<&BundleSlot>,
    triplet: usize,
    expected: Slot,
) -> Result<(), RunError> {
    let photon = returned
        .and_then(BundleSlot::primary)
        .ok_or(RunError::MissingReturn(triplet))?;
    match photon.register_ref() {
        Some((id, slot)) if id == triplet && slot == expected => Ok(()),
        _ => Err(RunError::ForeignPhoton(triplet)),
    }
}

/// Alice's case-dependent action on one triplet.
pub fn alice_action(
    case: Case,
    triplet: usize,
    lab: &mut Lab,
    from_bob: Option<&BundleSlot>,
    from_charlie: Option<&BundleSlot>,
    rng: &mut RandomSource,
) -> Result<Outcome, RunError> {
    let outcome = match case {
        Case::BothShare => Outcome::Z(lab.measure_z(Party::Alice, triplet, Slot::One, rng)?),
        Case::CharlieChecks => {
            returned_particle(from_charlie, triplet, Slot::Three)?;
            Outcome::Bell(lab.measure_bell(Party::Alice, triplet, Slot::One, Slot::Three, rng)?)
        }
        Case::BobChecks => {
            returned_particle(from_bob, triplet, Slot::Two)?;
            Outcome::Bell(lab.measure_bell(Party::Alice, triplet, Slot::One, Slot::Two, rng)?)
        }
        Case::BothCheck => {
            returned_particle(from_charlie, triplet, Slot::Three)?;
            returned_particle(from_bob, triplet, Slot::Two)?;
            Outcome::Joint(lab.measure_joint(Party::Alice, triplet, rng)?)
        }
    };
    Ok(outcome)
}

struct Finish<'a> {
    protocol: Protocol,
    config: &'a RunConfig,
    case_counts: [usize; 4],
    verdict: CheckVerdict,
    keys: Option<KeyTriple>,
    inspections: Vec<SpyInspection>,
    photons: PhotonTally,
    records: Vec<CaseRecord>,
    log: EventLog,
    charlie_share_bits: BTreeMap<usize, bool>,
}

fn finish(f: Finish<'_>, adversary: &AdversaryStrategy) -> RunReport {
    let completed = f.keys.is_some();
    let adversary_report = (adversary.kind() != AdversaryKind::None).then(|| {
        let recovered = adversary.knowledge().recovered_k_c.clone();
        let succeeded = match &f.keys {
            Some(keys) => recovered.xor(&keys.bob).as_ref() == Some(&keys.alice),
            None => false,
        };
        let share_bit_mismatches = (adversary.kind() == AdversaryKind::TrojanHorse && completed)
            .then(|| {
                adversary
                    .knowledge()
                    .recorded_bits
                    .iter()
                    .filter(|(p, bit)| f.charlie_share_bits.get(p) != Some(bit))
                    .count()
                    + f.charlie_share_bits
                        .keys()
                        .filter(|p| !adversary.knowledge().recorded_bits.contains_key(p))
                        .count()
            });
        AdversaryReport {
            spec: adversary.spec(),
            extension_variant: adversary.is_extension_variant(),
            knowledge: adversary.summary(),
            recovered_k_c: recovered.clone(),
            outcome: AttackOutcome {
                succeeded,
                detected: !f.verdict.pass,
                bits_recovered: recovered.len(),
                share_bit_mismatches,
            },
        }
    });
    let key_relation_holds = f.keys.as_ref().map(KeyTriple::relation_holds);
    let (records, events) = if f.config.trace {
        (f.records, f.log.into_events())
    } else {
        (Vec::new(), Vec::new())
    };
    RunReport {
        protocol: f.protocol,
        triplets: f.config.triplets,
        case_counts: f.case_counts,
        verdict: f.verdict,
        completed,
        keys: f.keys,
        key_relation_holds,
        spy_inspections: f.inspections,
        photons: f.photons,
        adversary: adversary_report,
        records,
        events,
    }
}

/// Runs one protocol instance end to end.
pub fn run_protocol(
    protocol: Protocol,
    config: &RunConfig,
    adversary: &mut AdversaryStrategy,
    mut streams: RunStreams,
) -> Result<RunReport, RunError> {
    config.validate()?;
    let spec = adversary.spec();
    spec.validate()?;
    if !spec.supports(protocol) {
        return Err(RunError::IncompatibleAdversary {
            adversary: format!("{:?}", spec.kind()),
            protocol,
        });
    }
    let n = config.triplets;
    let mut log = EventLog::default();
    let mut photons = PhotonTally::default();

    let mut channel = Channel::new();
    for leg in adversary.tapped_legs() {
        channel.register_tap(leg)?;
    }

    // Step 1: prepare and distribute.
    let mut lab = Lab::prepare(n);
    log.push(1, EventKind::Prepare { triplets: n });
    let mut deliveries = Vec::with_capacity(2);
    for (leg, slot) in [
        (Leg::AliceToBob, Slot::Two),
        (Leg::AliceToCharlie, Slot::Three),
    ] {
        let bundle = PhotonBundle::genuine_sequence(n, slot);
        photons.sent_by_alice += bundle.photon_count();
        let delivered =
            channel.transmit(bundle, leg, adversary, &mut lab, &mut streams.adversary)?;
        photons.delivered_to_agents += delivered.photon_count();
        log.push(
            1,
            EventKind::Transmit {
                leg,
                slots: delivered.len(),
                photons: delivered.photon_count(),
                tapped: channel.is_tapped(leg),
            },
        );
        deliveries.push(delivered);
    }
    let mut to_charlie = deliveries.pop().expect("two deliveries");
    let mut to_bob = deliveries.pop().expect("two deliveries");

    // Solution 2: both agents screen their input before acting on it.
    let mut inspections = Vec::new();
    if let Some(s2) = config.solution2 {
        let (b, bob_check) = inspect(Party::Bob, to_bob, s2.multi_photon_threshold);
        let (c, charlie_check) = inspect(Party::Charlie, to_charlie, s2.multi_photon_threshold);
        to_bob = b;
        to_charlie = c;
        for i in [&bob_check, &charlie_check] {
            photons.flagged_by_filters += i.flagged;
            log.push(
                2,
                EventKind::Inspect {
                    party: i.party,
                    flagged: i.flagged,
                    multi_photon_rate: i.multi_photon_rate,
                },
            );
        }
        let restart = bob_check.restart || charlie_check.restart;
        inspections = vec![bob_check, charlie_check];
        if restart {
            let reason = AbortReason::MultiPhotonExceeded;
            log.push(2, EventKind::Abort { reason });
            return Ok(finish(
                Finish {
                    protocol,
                    config,
                    case_counts: [0; 4],
                    verdict: CheckVerdict::aborted_before_check(reason),
                    keys: None,
                    inspections,
                    photons,
                    records: Vec::new(),
                    log,
                    charlie_share_bits: BTreeMap::new(),
                },
                adversary,
            ));
        }
    }

    // Step 2 for Charlie, and Step 3 for his half: Alice confirms, Charlie announces.
    let charlie_modes = choose_modes(n, config.share_probability, &mut streams.charlie);
    log_modes(&mut log, Party::Charlie, &charlie_modes);
    let charlie = agent_step(
        protocol,
        Party::Charlie,
        to_charlie,
        charlie_modes,
        &mut lab,
        &mut streams.charlie,
        &mut streams.nature,
        &mut log,
    )?;
    let from_charlie = channel.transmit(
        charlie.returned.clone(),
        Leg::CharlieToAlice,
        adversary,
        &mut lab,
        &mut streams.adversary,
    )?;
    photons.returned_to_alice += from_charlie.photon_count();
    log_return(
        &mut log,
        Leg::CharlieToAlice,
        &from_charlie,
        channel.is_tapped(Leg::CharlieToAlice),
    );
    log.push(
        3,
        EventKind::ConfirmReception {
            from: Party::Charlie,
        },
    );
    log.push(
        3,
        EventKind::Announce {
            party: Party::Charlie,
            kind: AnnouncementKind::ReturnPositions,
        },
    );
    let charlie_public: BTreeSet<usize> = charlie.check_positions.iter().copied().collect();

    // Bob may wait for Charlie's announcement before committing to modes.
    let bob_modes = match adversary.kind() {
        AdversaryKind::InterceptResend => adversary.intercept_resend_choose_modes(
            &charlie_public,
            n,
            config.share_probability,
            &mut streams.adversary,
        )?,
        _ => choose_modes(n, config.share_probability, &mut streams.bob),
    };
    log_modes(&mut log, Party::Bob, &bob_modes);
    let bob = agent_step(
        protocol,
        Party::Bob,
        to_bob,
        bob_modes,
        &mut lab,
        &mut streams.bob,
        &mut streams.nature,
        &mut log,
    )?;
    let from_bob = channel.transmit(
        bob.returned.clone(),
        Leg::BobToAlice,
        adversary,
        &mut lab,
        &mut streams.adversary,
    )?;
    photons.returned_to_alice += from_bob.photon_count();
    log_return(
        &mut log,
        Leg::BobToAlice,
        &from_bob,
        channel.is_tapped(Leg::BobToAlice),
    );
    log.push(3, EventKind::ConfirmReception { from: Party::Bob });
    log.push(
        3,
        EventKind::Announce {
            party: Party::Bob,
            kind: AnnouncementKind::ReturnPositions,
        },
    );

    let restored_charlie = restore(protocol, from_charlie, &charlie);
    let restored_bob = restore(protocol, from_bob, &bob);
    log.push(3, EventKind::RestoreOrder);

    // Step 4: modes are public; dispatch per case.
    for party in [Party::Bob, Party::Charlie] {
        log.push(
            4,
            EventKind::Announce {
                party,
                kind: AnnouncementKind::Modes,
            },
        );
    }
    let mut case_counts = [0usize; 4];
    let mut records = Vec::with_capacity(n);
    for triplet in 0..n {
        let case = Case::from_modes(bob.modes[triplet], charlie.modes[triplet]);
        case_counts[case.index()] += 1;
        let alice_result = alice_action(
            case,
            triplet,
            &mut lab,
            restored_bob.get(&triplet),
            restored_charlie.get(&triplet),
            &mut streams.nature,
        )?;
        records.push(CaseRecord {
            triplet,
            case,
            alice_result,
            bob_bit: bob.share_bits.get(&triplet).copied(),
            charlie_bit: charlie.share_bits.get(&triplet).copied(),
            consistent: None,
        });
    }
    log.push(4, EventKind::Dispatch { case_counts });

    // Step 5: the case-3 occurrence test runs before the consistency check.
    for party in [Party::Bob, Party::Charlie] {
        log.push(
            5,
            EventKind::Announce {
                party,
                kind: AnnouncementKind::CheckResults,
            },
        );
    }
    let case3 = case_counts[Case::BobChecks.index()];
    let case3_occurrence = case3 as f64 / n as f64;
    let case3_result = config.solution1.map(|s1| {
        let expected_rate = (1.0 - config.share_probability) * config.share_probability;
        case3_occurrence_test(
            case3,
            n,
            Case3Test {
                expected_rate,
                significance: s1.significance,
            },
        )
    });
    let errors = eavesdrop_check(&mut records, config.error_threshold);
    let abort_reason = match case3_result {
        Some(r) if !r.pass => Some(AbortReason::Case3Deficient),
        _ if !errors.pass => Some(AbortReason::ErrorRateExceeded),
        _ => None,
    };
    let verdict = CheckVerdict {
        error_rate: errors.error_rate,
        checked: errors.checked,
        inconsistent: errors.inconsistent,
        case3_occurrence,
        case3_p_value: case3_result.map(|r| r.p_value),
        pass: abort_reason.is_none(),
        abort_reason,
    };
    log.push(
        5,
        EventKind::Check {
            error_rate: verdict.error_rate,
            case3_occurrence,
            pass: verdict.pass,
        },
    );

    // Step 6.
    let keys = if let Some(reason) = verdict.abort_reason {
        log.push(5, EventKind::Abort { reason });
        None
    } else {
        let keys = extract_keys(&records, &verdict)?;
        log.push(
            6,
            EventKind::ExtractKeys {
                length: keys.alice.len(),
            },
        );
        photons.key_bits = keys.alice.len();
        let key_positions: Vec<usize> = records
            .iter()
            .filter(|r| r.case == Case::BothShare)
            .map(|r| r.triplet)
            .collect();
        let recovered: Option<BitString> = match adversary.kind() {
            AdversaryKind::InterceptResend => Some(adversary.intercept_resend_harvest(
                &key_positions,
                &mut lab,
                &mut streams.nature,
            )?),
            AdversaryKind::TrojanHorse => Some(adversary.trojan_harvest(&key_positions)),
            AdversaryKind::None => None,
        };
        if let Some(bits) = recovered {
            log.push(6, EventKind::Harvest { bits: bits.len() });
        }
        Some(keys)
    };

    Ok(finish(
        Finish {
            protocol,
            config,
            case_counts,
            verdict,
            keys,
            inspections,
            photons,
            records,
            log,
            charlie_share_bits: charlie.share_bits,
        },
        adversary,
    ))
}

fn log_modes(log: &mut EventLog, party: Party, modes: &[Mode]) {
    let share = modes.iter().filter(|m| **m == Mode::Share).count();
    log.push(
        2,
        EventKind::ChooseModes {
            party,
            share,
            check: modes.len() - share,
        },
    );
}

fn log_return(log: &mut EventLog, leg: Leg, bundle: &PhotonBundle, tapped: bool) {
    log.push(
        2,
        EventKind::Transmit {
            leg,
            slots: bundle.len(),
            photons: bundle.photon_count(),
            tapped,
        },
    );
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::BellOutcome;

    fn streams(seed: u64) -> RunStreams {
        RunStreams::from_seed(seed)
    }

    #[test]
    fn honest_small_runs_both_protocols() {
        for protocol in [Protocol::RandomizationBased, Protocol::MeasureResend] {
            for seed in 0..20 {
                let r = run_protocol(
                    protocol,
                    &RunConfig::new(64),
                    &mut AdversaryStrategy::honest(),
                    streams(seed),
                )
                .unwrap();
                assert!(r.verdict.pass);
                assert_eq!(r.verdict.error_rate, 0.0);
                assert_eq!(r.key_relation_holds, Some(true));
                assert_eq!(r.case_counts.iter().sum::<usize>(), 64);
                assert!(r.adversary.is_none());
            }
        }
    }

    #[test]
    fn single_triplet_run() {
        let r = run_protocol(
            Protocol::RandomizationBased,
            &RunConfig::new(1),
            &mut AdversaryStrategy::honest(),
            streams(3),
        )
        .unwrap();
        assert!(r.verdict.pass);
    }

    #[test]
    fn zero_triplets_rejected() {
        let err = run_protocol(
            Protocol::MeasureResend,
            &RunConfig::new(0),
            &mut AdversaryStrategy::honest(),
            streams(0),
        )
        .unwrap_err();
        assert!(matches!(err, RunError::Config(_)));
    }

    #[test]
    fn mismatched_adversary_rejected() {
        let err = run_protocol(
            Protocol::MeasureResend,
            &RunConfig::new(8),
            &mut AdversaryStrategy::intercept_resend(0),
            streams(0),
        )
        .unwrap_err();
        assert!(matches!(err, RunError::IncompatibleAdversary { .. }));
    }

    #[test]
    fn event_log_ordering() {
        let r = run_protocol(
            Protocol::RandomizationBased,
            &RunConfig::new(32).with_trace(),
            &mut AdversaryStrategy::intercept_resend(0),
            streams(11),
        )
        .unwrap();
        let log = EventLog::from_events(r.events.clone());
        assert!(log.restore_follows_announcements());
        assert!(log.bob_chose_after_charlie_announced());
        assert_eq!(r.records.len(), 32);
    }

    #[test]
    fn alice_action_cases() {
        let mut lab = Lab::prepare(2);
        let mut rng = RandomSource::seed_from_u64(5);
        let bob_photon = Photon::genuine(0, 0, Slot::Two);
        let charlie_photon = Photon::genuine(0, 0, Slot::Three);
        use crate::channel::CustodyLedger;
        lab.hand_over(&bob_photon, Party::Bob);
        let bob_bit = lab
            .measure_photon(Party::Bob, &bob_photon, &mut rng)
            .unwrap();
        let returned = BundleSlot::single(charlie_photon);
        let out = alice_action(
            Case::CharlieChecks,
            0,
            &mut lab,
            None,
            Some(&returned),
            &mut rng,
        )
        .unwrap();
        let expected = if bob_bit {
            BellOutcome::PsiPlus
        } else {
            BellOutcome::PhiPlus
        };
        assert_eq!(out, Outcome::Bell(expected));

        assert!(matches!(
            alice_action(Case::BothCheck, 1, &mut lab, None, None, &mut rng),
            Err(RunError::MissingReturn(1))
        ));
        let wrong = BundleSlot::single(Photon::fresh(1, true));
        assert!(matches!(
            alice_action(Case::BobChecks, 1, &mut lab, Some(&wrong), None, &mut rng),
            Err(RunError::ForeignPhoton(1))
        ));
    }
}
