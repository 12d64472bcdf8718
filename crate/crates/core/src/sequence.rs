//! The channel-hopping sequence abstraction.
//!
//! A [`ChSequence`] is a total map from a node's local slot to a channel.
//! Three generators back it:
//!
//! - a periodic table (every deterministic protocol),
//! - i.i.d. uniform hopping keyed by `(seed, slot)`,
//! - an interleaved hybrid built by [`crate::interleave`].
//!
//! All of them are random-access: `hop_at(t)` never depends on having
//! evaluated earlier slots.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::channel::{ChannelId, ChannelSet};
use crate::rng;

/// How a sequence's random slots behave when compared with a peer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RandomPolicy {
    /// Random slots draw uniformly from `1..=N`.
    #[default]
    Uniform,
    /// Random slots always pick a channel other than the peer's, so they
    /// never produce a rendezvous. Exposes worst-case guarantees.
    Adversarial,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SequenceKind {
    Deterministic,
    Randomized,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HopKind {
    /// Taken from a deterministic schedule.
    Scheduled,
    /// Drawn uniformly at random.
    Random,
    /// A random slot under [`RandomPolicy::Adversarial`].
    Adversarial,
}

/// One slot of a sequence: the channel and where it came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Hop {
    pub channel: ChannelId,
    pub kind: HopKind,
}

impl Hop {
    /// Whether two simultaneous hops constitute a rendezvous.
    pub fn meets(&self, other: &Hop) -> bool {
        self.kind != HopKind::Adversarial
            && other.kind != HopKind::Adversarial
            && self.channel == other.channel
    }
}

#[derive(Debug, Clone)]
pub struct ChSequence {
    channels: ChannelSet,
    source: Source,
    policy: RandomPolicy,
}

#[derive(Debug, Clone)]
enum Source {
    Periodic(Arc<[u32]>),
    Random { seed: u64 },
    Interleaved(Arc<Interleaved>),
}

/// Random-access form of the interleaving algorithm.
///
/// Slot `t` is awake when `bits[t mod T]`; awake slots consume the base
/// sequence in order, so the base index at an awake slot is
/// `(t / T) * A + awake_before[t mod T]`.
#[derive(Debug)]
pub(crate) struct Interleaved {
    /// One period of the base sequence over the padded channel set.
    pub base: Arc<[u32]>,
    pub bits: Vec<bool>,
    /// Number of awake positions strictly before each schedule position.
    pub awake_before: Vec<u64>,
    pub awake: u64,
    /// Channel bound to each alias label `N+1..=N'` (index `c - N - 1`),
    /// or `None` when aliases are drawn afresh at every emission.
    pub alias_binding: Option<Vec<u32>>,
    pub seed: u64,
}

const RANDOM_SLOT_STREAM: u64 = 0;
const ALIAS_STREAM: u64 = 1 << 63;

impl Interleaved {
    pub(crate) fn base_index(&self, t: u64) -> Option<u64> {
        let period = self.bits.len() as u64;
        let pos = (t % period) as usize;
        self.bits[pos].then(|| (t / period) * self.awake + self.awake_before[pos])
    }

    fn hop(&self, channels: ChannelSet, policy: RandomPolicy, t: u64) -> Hop {
        let n = channels.n();
        let random = |stream: u64| Hop {
            channel: ChannelId::raw(rng::uniform_label(self.seed, stream, n)),
            kind: match policy {
                RandomPolicy::Uniform => HopKind::Random,
                RandomPolicy::Adversarial => HopKind::Adversarial,
            },
        };
        let Some(index) = self.base_index(t) else {
            return random(RANDOM_SLOT_STREAM | t);
        };
        let label = self.base[(index % self.base.len() as u64) as usize];
        if label <= n {
            return Hop {
                channel: ChannelId::raw(label),
                kind: HopKind::Scheduled,
            };
        }
        match &self.alias_binding {
            Some(binding) => Hop {
                channel: ChannelId::raw(binding[(label - n - 1) as usize]),
                kind: HopKind::Scheduled,
            },
            None => random(ALIAS_STREAM | t),
        }
    }
}

impl ChSequence {
    /// Deterministic sequence repeating `period` forever. Labels are folded
    /// into `1..=N`.
    ///
    /// # Panics
    /// If `period` is empty.
    pub fn periodic(channels: ChannelSet, period: Vec<u32>) -> Self {
        assert!(!period.is_empty(), "a periodic sequence needs at least one slot");
        let table: Vec<u32> = period.into_iter().map(|c| channels.fold(c).get()).collect();
        ChSequence {
            channels,
            source: Source::Periodic(table.into()),
            policy: RandomPolicy::Uniform,
        }
    }

    pub fn constant(channels: ChannelSet, channel: ChannelId) -> Self {
        Self::periodic(channels, vec![channel.get()])
    }

    /// I.i.d. uniform hopping keyed by `seed`.
    pub fn random(channels: ChannelSet, seed: u64) -> Self {
        ChSequence {
            channels,
            source: Source::Random { seed },
            policy: RandomPolicy::Uniform,
        }
    }

    pub(crate) fn interleaved(channels: ChannelSet, inner: Interleaved, policy: RandomPolicy) -> Self {
        ChSequence {
            channels,
            source: Source::Interleaved(Arc::new(inner)),
            policy,
        }
    }

    pub fn with_policy(mut self, policy: RandomPolicy) -> Self {
        self.policy = policy;
        self
    }

    pub fn policy(&self) -> RandomPolicy {
        self.policy
    }

    pub fn channels(&self) -> ChannelSet {
        self.channels
    }

    pub fn kind(&self) -> SequenceKind {
        match self.source {
            Source::Periodic(_) => SequenceKind::Deterministic,
            Source::Random { .. } | Source::Interleaved(_) => SequenceKind::Randomized,
        }
    }

    /// Declared period: the construction length of a periodic table.
    /// `detect_period` finds the minimal one.
    pub fn period(&self) -> Option<u64> {
        match &self.source {
            Source::Periodic(table) => Some(table.len() as u64),
            _ => None,
        }
    }

    pub fn channel_at(&self, t: u64) -> ChannelId {
        self.hop_at(t).channel
    }

    pub fn hop_at(&self, t: u64) -> Hop {
        match &self.source {
            Source::Periodic(table) => Hop {
                channel: ChannelId::raw(table[(t % table.len() as u64) as usize]),
                kind: HopKind::Scheduled,
            },
            Source::Random { seed } => Hop {
                channel: ChannelId::raw(rng::uniform_label(*seed, t, self.channels.n())),
                kind: match self.policy {
                    RandomPolicy::Uniform => HopKind::Random,
                    RandomPolicy::Adversarial => HopKind::Adversarial,
                },
            },
            Source::Interleaved(inner) => inner.hop(self.channels, self.policy, t),
        }
    }

    /// Base-sequence index consumed at slot `t`, for interleaved sequences
    /// at awake slots.
    pub fn base_index_at(&self, t: u64) -> Option<u64> {
        match &self.source {
            Source::Interleaved(inner) => inner.base_index(t),
            _ => None,
        }
    }

    pub fn take(&self, slots: u64) -> Vec<ChannelId> {
        (0..slots).map(|t| self.channel_at(t)).collect()
    }
}
