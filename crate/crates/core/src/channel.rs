//! Channel labels, channel sets and clock drift.
//!
//! Channels are labelled `1..=N` everywhere. Slots are plain `u64` indices
//! on a node's local clock, starting at slot 0; slot boundaries of two nodes
//! are assumed aligned.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ChannelError {
    #[error("channel count must be at least 1")]
    EmptyChannelSet,
    #[error("channel {channel} outside 1..={n}")]
    OutOfRange { channel: u32, n: u32 },
}

/// A licensed channel label in `1..=N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ChannelId(u32);

impl ChannelId {
    /// Builds a label checked against `set`.
    pub fn new(index: u32, set: ChannelSet) -> Result<Self, ChannelError> {
        if index == 0 || index > set.n() {
            return Err(ChannelError::OutOfRange {
                channel: index,
                n: set.n(),
            });
        }
        Ok(ChannelId(index))
    }

    /// Unchecked construction; callers guarantee `index >= 1`.
    pub(crate) const fn raw(index: u32) -> Self {
        ChannelId(index)
    }

    pub const fn get(self) -> u32 {
        self.0
    }
}

impl fmt::Display for ChannelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// The sensible channel set `{1, ..., N}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct ChannelSet(u32);

impl ChannelSet {
    pub fn new(n: u32) -> Result<Self, ChannelError> {
        if n == 0 {
            return Err(ChannelError::EmptyChannelSet);
        }
        Ok(ChannelSet(n))
    }

    pub const fn n(self) -> u32 {
        self.0
    }

    pub fn contains(self, c: ChannelId) -> bool {
        (1..=self.0).contains(&c.0)
    }

    pub fn iter(self) -> impl Iterator<Item = ChannelId> {
        (1..=self.0).map(ChannelId)
    }

    /// Folds an arbitrary positive label back into `1..=N`.
    pub fn fold(self, label: u32) -> ChannelId {
        ChannelId((label.max(1) - 1) % self.0 + 1)
    }
}

impl TryFrom<u32> for ChannelSet {
    type Error = ChannelError;

    fn try_from(n: u32) -> Result<Self, Self::Error> {
        ChannelSet::new(n)
    }
}

impl From<ChannelSet> for u32 {
    fn from(set: ChannelSet) -> u32 {
        set.0
    }
}

/// Offset between two local clocks: node `a` is `sigma` slots behind node
/// `b`, so `a`'s slot 0 is `b`'s slot `sigma`. Negative means `a` is ahead.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ClockDrift(pub i64);

impl ClockDrift {
    pub const SYNCHRONIZED: ClockDrift = ClockDrift(0);

    pub fn sigma(self) -> i64 {
        self.0
    }

    pub fn reversed(self) -> ClockDrift {
        ClockDrift(-self.0)
    }

    /// Local slots `(a, b)` that coincide at slot `t` of the clock left behind.
    pub fn align(self, t: u64) -> (u64, u64) {
        let offset = self.0.unsigned_abs();
        if self.0 > 0 {
            (t, t + offset)
        } else {
            (t + offset, t)
        }
    }
}
