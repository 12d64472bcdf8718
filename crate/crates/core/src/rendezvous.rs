//! Pairwise rendezvous detection.
//!
//! Node `a` is `drift` slots behind node `b`: a rendezvous at `a`'s slot `t`
//! means `a.channel_at(t) == b.channel_at(t + drift)`. Slots are reported on
//! the clock left behind: `a`'s clock when the drift is positive, `b`'s
//! otherwise. All metrics are invariant to this choice.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::channel::{ChannelId, ClockDrift};
use crate::sequence::ChSequence;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RendezvousSlotSet {
    pub slots: Vec<u64>,
    pub channels: BTreeSet<ChannelId>,
}

impl RendezvousSlotSet {
    pub fn first(&self) -> Option<u64> {
        self.slots.first().copied()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }
}

/// Every rendezvous slot in `[0, horizon)` and the channels met on.
pub fn rendezvous_slots(a: &ChSequence, b: &ChSequence, drift: ClockDrift, horizon: u64) -> RendezvousSlotSet {
    let mut found = RendezvousSlotSet::default();
    for t in 0..horizon {
        let (ta, tb) = drift.align(t);
        let (ha, hb) = (a.hop_at(ta), b.hop_at(tb));
        if ha.meets(&hb) {
            found.slots.push(t);
            found.channels.insert(ha.channel);
        }
    }
    found
}

/// Smallest rendezvous slot in `[0, horizon)`.
pub fn first_rendezvous(a: &ChSequence, b: &ChSequence, drift: ClockDrift, horizon: u64) -> Option<u64> {
    (0..horizon).find(|&t| {
        let (ta, tb) = drift.align(t);
        a.hop_at(ta).meets(&b.hop_at(tb))
    })
}
