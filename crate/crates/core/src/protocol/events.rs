use serde::{Deserialize, Serialize};

use crate::channel::{Leg, Party};

use super::AbortReason;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AnnouncementKind {
    /// Positions of reflected photons and, where reordering applies, their order.
    ReturnPositions,
    Modes,
    CheckResults,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "kebab-case")]
pub enum EventKind {
    Prepare {
        triplets: usize,
    },
    Transmit {
        leg: Leg,
        slots: usize,
        photons: usize,
        tapped: bool,
    },
    Inspect {
        party: Party,
        flagged: usize,
        multi_photon_rate: f64,
    },
    ChooseModes {
        party: Party,
        share: usize,
        check: usize,
    },
    Measure {
        party: Party,
        count: usize,
    },
    Reflect {
        party: Party,
        count: usize,
        reordered: bool,
    },
    ConfirmReception {
        from: Party,
    },
    Announce {
        party: Party,
        kind: AnnouncementKind,
    },
    RestoreOrder,
    Dispatch {
        case_counts: [usize; 4],
    },
    Check {
        error_rate: f64,
        case3_occurrence: f64,
        pass: bool,
    },
    Abort {
        reason: AbortReason,
    },
    ExtractKeys {
        length: usize,
    },
    Harvest {
        bits: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub seq: usize,
    pub step: u8,
    #[serde(flatten)]
    pub kind: EventKind,
}

/// Ordered record of everything that happened in one run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EventLog {
    events: Vec<Event>,
}

impl EventLog {
    pub fn push(&mut self, step: u8, kind: EventKind) {
        let seq = self.events.len();
        self.events.push(Event { seq, step, kind });
    }

    pub fn from_events(events: Vec<Event>) -> Self {
        EventLog { events }
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn into_events(self) -> Vec<Event> {
        self.events
    }

    fn first_seq(&self, pred: impl Fn(&EventKind) -> bool) -> Option<usize> {
        self.events.iter().find(|e| pred(&e.kind)).map(|e| e.seq)
    }

    /// True when order restoration happened after every position announcement
    /// it depends on and before any later announcement.
    pub fn restore_follows_announcements(&self) -> bool {
        let Some(restore) = self.first_seq(|k| matches!(k, EventKind::RestoreOrder)) else {
            return true;
        };
        let positions = self.events.iter().filter(|e| {
            matches!(
                e.kind,
                EventKind::Announce {
                    kind: AnnouncementKind::ReturnPositions,
                    ..
                }
            )
        });
        let mut count = 0;
        for e in positions {
            if e.seq > restore {
                return false;
            }
            count += 1;
        }
        count == 2
    }

    /// True when Bob's mode choice comes after Charlie's position announcement.
    pub fn bob_chose_after_charlie_announced(&self) -> bool {
        let charlie = self.first_seq(|k| {
            matches!(
                k,
                EventKind::Announce {
                    party: Party::Charlie,
                    kind: AnnouncementKind::ReturnPositions
                }
            )
        });
        let bob = self.first_seq(|k| {
            matches!(
                k,
                EventKind::ChooseModes {
                    party: Party::Bob,
                    ..
                }
            )
        });
        matches!((charlie, bob), (Some(c), Some(b)) if c < b)
    }
}
