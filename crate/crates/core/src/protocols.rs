//! Base channel-hopping protocols.
//!
//! Each protocol maps a node ID and a channel set to a sequence; nothing
//! else (clock, peers) enters the construction. Deterministic protocols are
//! built over `P`, the smallest prime `>= N`, and labels above `N` are folded
//! back with `((c - 1) mod N) + 1`.
//!
//! | protocol   | construction period |
//! |------------|---------------------|
//! | `crseq`    | `P(3P - 1)`         |
//! | `jumpstay` | `3P`                |
//! | `modular`  | `P^2`               |
//! | `random`   | none                |

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::ChannelSet;
use crate::sequence::{ChSequence, SequenceKind};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProtocolError {
    #[error("node ids start at 1")]
    ZeroNodeId,
    #[error("unknown protocol '{0}' (expected random, crseq, jumpstay or modular)")]
    UnknownProtocol(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u64", into = "u64")]
pub struct NodeId(u64);

impl NodeId {
    pub fn new(id: u64) -> Result<Self, ProtocolError> {
        if id == 0 {
            return Err(ProtocolError::ZeroNodeId);
        }
        Ok(NodeId(id))
    }

    pub fn get(self) -> u64 {
        self.0
    }
}

impl TryFrom<u64> for NodeId {
    type Error = ProtocolError;

    fn try_from(id: u64) -> Result<Self, Self::Error> {
        NodeId::new(id)
    }
}

impl From<NodeId> for u64 {
    fn from(id: NodeId) -> u64 {
        id.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProtocolKind {
    Random,
    Crseq,
    #[serde(rename = "jumpstay")]
    JumpStay,
    Modular,
}

impl ProtocolKind {
    pub const ALL: [ProtocolKind; 4] = [
        ProtocolKind::Random,
        ProtocolKind::Crseq,
        ProtocolKind::JumpStay,
        ProtocolKind::Modular,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ProtocolKind::Random => "random",
            ProtocolKind::Crseq => "crseq",
            ProtocolKind::JumpStay => "jumpstay",
            ProtocolKind::Modular => "modular",
        }
    }

    /// The node's sequence. `seed` only matters for `random`.
    pub fn sequence(self, channels: ChannelSet, node: NodeId, seed: u64) -> ChSequence {
        match self {
            ProtocolKind::Random => random_ch(channels, seed),
            ProtocolKind::Crseq => crseq(channels, node),
            ProtocolKind::JumpStay => jumpstay(channels, node),
            ProtocolKind::Modular => modular_baseline(channels, node),
        }
    }

    /// Length of one constructed round; every node's sequence repeats with it.
    pub fn construction_period(self, channels: ChannelSet) -> Option<u64> {
        let p = smallest_prime_at_least(channels.n()) as u64;
        match self {
            ProtocolKind::Random => None,
            ProtocolKind::Crseq => Some(p * (3 * p - 1)),
            ProtocolKind::JumpStay => Some(3 * p),
            ProtocolKind::Modular => Some(p * p),
        }
    }

    /// Minimal period of the emitted sequence over `channels`, detected on
    /// a reference node rather than taken from a closed form.
    pub fn period(self, channels: ChannelSet) -> Option<u64> {
        let bound = self.construction_period(channels)?;
        let reference = self.sequence(channels, NodeId(1), 0);
        detect_period(&reference, bound)
    }

    pub fn descriptor(self, channels: ChannelSet) -> ProtocolDescriptor {
        ProtocolDescriptor {
            kind: self,
            n: channels.n(),
            period: self.period(channels),
        }
    }
}

impl fmt::Display for ProtocolKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ProtocolKind {
    type Err = ProtocolError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ProtocolKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| ProtocolError::UnknownProtocol(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProtocolDescriptor {
    pub kind: ProtocolKind,
    pub n: u32,
    pub period: Option<u64>,
}

pub fn smallest_prime_at_least(n: u32) -> u32 {
    let is_prime = |p: u32| p >= 2 && (2..).take_while(|d| d * d <= p).all(|d| !p.is_multiple_of(d));
    (n.max(2)..).find(|&p| is_prime(p)).expect("primes are unbounded")
}

/// Each slot i.i.d. uniform on `1..=N`.
pub fn random_ch(channels: ChannelSet, seed: u64) -> ChSequence {
    ChSequence::random(channels, seed)
}

/// Jump-Stay.
///
/// A round is `3P` slots: `2P` jump slots visiting
/// `((i0 - 1 + u r) mod P) + 1` for `u = 0..2P`, then `P` slots staying on
/// `r`. The step is `r = ((id - 1) mod (P - 1)) + 1` and the start is
/// `i0 = ((31 id) mod P) + 1`. Keeping `r < P` keeps the jump phase a full
/// sweep of the channels.
pub fn jumpstay(channels: ChannelSet, node: NodeId) -> ChSequence {
    let p = smallest_prime_at_least(channels.n()) as u64;
    let id = node.get();
    let step = (id - 1) % (p - 1) + 1;
    let start = (id % p) * 31 % p + 1;
    let round = (0..3 * p)
        .map(|u| {
            if u < 2 * p {
                ((start - 1 + u * step) % p + 1) as u32
            } else {
                step as u32
            }
        })
        .collect();
    ChSequence::periodic(channels, round)
}

/// CRSEQ.
///
/// `P` subsequences `j = 0..P`: subsequence `j` spends `2P - 1` slots on
/// `((T_j + u) mod P) + 1` with `T_j = j(j + 1)/2`, then `P` slots on
/// `(j mod P) + 1`. The sequence is the same for every node.
pub fn crseq(channels: ChannelSet, _node: NodeId) -> ChSequence {
    let p = smallest_prime_at_least(channels.n()) as u64;
    let mut period = Vec::with_capacity((p * (3 * p - 1)) as usize);
    for j in 0..p {
        let triangle = j * (j + 1) / 2;
        period.extend((0..2 * p - 1).map(|u| ((triangle + u) % p + 1) as u32));
        period.extend(std::iter::repeat_n((j % p + 1) as u32, p as usize));
    }
    ChSequence::periodic(channels, period)
}

/// Modular baseline of period `P^2`.
///
/// Slot `t = rP + c` (row `r`, column `c`) visits `((r (c + id)) mod P) + 1`.
/// Row 0 parks every node on channel 1 for `P` slots, and every other row
/// visits channel 1 once, so any two nodes meet within `P^2` slots.
pub fn modular_baseline(channels: ChannelSet, node: NodeId) -> ChSequence {
    let p = smallest_prime_at_least(channels.n()) as u64;
    let id = node.get() % p;
    let period = (0..p * p)
        .map(|t| {
            let (row, col) = (t / p, t % p);
            ((row * ((col + id) % p)) % p + 1) as u32
        })
        .collect();
    ChSequence::periodic(channels, period)
}

/// Smallest `τ <= max_period` with `channel_at(t + τ) == channel_at(t)` for
/// every `t` in `[0, 3 max_period)`. Randomized sequences have no period.
pub fn detect_period(seq: &ChSequence, max_period: u64) -> Option<u64> {
    if seq.kind() != SequenceKind::Deterministic || max_period == 0 {
        return None;
    }
    // With the whole table inside the sampling window, the minimal period
    // divides the table length and can be read off the table alone.
    if let Some(len) = seq.period().filter(|&len| len <= max_period) {
        let table: Vec<u32> = seq.take(len).into_iter().map(|c| c.get()).collect();
        return (1..=len).filter(|d| len % d == 0).find(|&d| {
            let d = d as usize;
            (0..table.len()).all(|i| table[i] == table[(i + d) % table.len()])
        });
    }
    let window = 3 * max_period;
    let samples: Vec<u32> = seq.take(window + max_period).into_iter().map(|c| c.get()).collect();
    (1..=max_period).find(|&tau| {
        let tau = tau as usize;
        (0..window as usize).all(|t| samples[t] == samples[t + tau])
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{ChannelId, ClockDrift};
    use crate::rendezvous::first_rendezvous;

    fn set(n: u32) -> ChannelSet {
        ChannelSet::new(n).unwrap()
    }

    fn id(i: u64) -> NodeId {
        NodeId::new(i).unwrap()
    }

    /// Period by direct definition over a long sample, no shortcuts.
    fn naive_period(seq: &ChSequence, max: u64) -> Option<u64> {
        let v = seq.take(4 * max);
        (1..=max).find(|&p| (0..3 * max as usize).all(|t| v[t] == v[t + p as usize]))
    }

    #[test]
    fn primes() {
        let got: Vec<u32> = [0, 1, 2, 3, 4, 8, 11, 12, 14].map(smallest_prime_at_least).to_vec();
        assert_eq!(got, vec![2, 2, 2, 3, 5, 11, 11, 13, 17]);
    }

    #[test]
    fn rejects_zero_id_and_unknown_names() {
        assert_eq!(NodeId::new(0), Err(ProtocolError::ZeroNodeId));
        assert!("foo".parse::<ProtocolKind>().is_err());
        for kind in ProtocolKind::ALL {
            assert_eq!(kind.name().parse::<ProtocolKind>().unwrap(), kind);
        }
    }

    #[test]
    fn prime_periods_match_closed_forms() {
        for n in [3u32, 5, 7, 11] {
            let n64 = n as u64;
            let js = jumpstay(set(n), id(1));
            assert_eq!(detect_period(&js, 3 * n64), Some(3 * n64));
            let cr = crseq(set(n), id(1));
            assert_eq!(detect_period(&cr, n64 * (3 * n64 - 1)), Some(n64 * (3 * n64 - 1)));
        }
    }

    #[test]
    fn single_channel_protocols_are_constant() {
        for kind in ProtocolKind::ALL {
            let s = kind.sequence(set(1), id(4), 9);
            assert!(s.take(50).iter().all(|c| c.get() == 1), "{kind}");
        }
        assert_eq!(detect_period(&jumpstay(set(1), id(1)), 10), Some(1));
    }

    #[test]
    fn constant_sequence_has_period_one() {
        let s = ChSequence::constant(set(4), ChannelId::new(3, set(4)).unwrap());
        assert_eq!(detect_period(&s, 5), Some(1));
        assert_eq!(detect_period(&random_ch(set(4), 1), 5), None);
    }

    #[test]
    fn table_shortcut_agrees_with_definition() {
        for kind in [ProtocolKind::Crseq, ProtocolKind::JumpStay, ProtocolKind::Modular] {
            for n in 1..=8 {
                for i in 1..=6 {
                    let s = kind.sequence(set(n), id(i), 0);
                    let bound = kind.construction_period(set(n)).unwrap();
                    assert_eq!(detect_period(&s, bound), naive_period(&s, bound), "{kind} n={n} id={i}");
                    // Below the table length the sampled definition is used directly.
                    let short = bound / 2;
                    assert_eq!(detect_period(&s, short), naive_period(&s, short), "{kind} n={n} id={i}");
                }
            }
        }
    }

    #[test]
    fn every_node_period_divides_the_protocol_period() {
        for kind in [ProtocolKind::Crseq, ProtocolKind::JumpStay, ProtocolKind::Modular] {
            for n in 1..=16 {
                let tau = kind.period(set(n)).unwrap();
                let p = smallest_prime_at_least(n) as u64;
                for i in 1..=p * (p - 1).max(1) + 1 {
                    let s = kind.sequence(set(n), id(i), 0);
                    let own = detect_period(&s, kind.construction_period(set(n)).unwrap()).unwrap();
                    assert_eq!(tau % own, 0, "{kind} n={n} id={i}: {own} does not divide {tau}");
                }
            }
        }
    }

    #[test]
    fn modular_period_divides_p_squared() {
        for n in 1..=20 {
            let p = smallest_prime_at_least(n) as u64;
            for i in 1..=4 {
                let tau = detect_period(&modular_baseline(set(n), id(i)), p * p).unwrap();
                assert_eq!((p * p) % tau, 0, "n={n} id={i}");
            }
        }
    }

    #[test]
    fn sequences_depend_only_on_id_and_n() {
        for kind in [ProtocolKind::Crseq, ProtocolKind::JumpStay, ProtocolKind::Modular] {
            let a = kind.sequence(set(7), id(3), 1);
            let b = kind.sequence(set(7), id(3), 99);
            assert_eq!(a.take(200), b.take(200));
        }
    }

    #[test]
    fn emitted_channels_stay_in_range() {
        for kind in ProtocolKind::ALL {
            for n in [1, 2, 4, 6, 10, 12] {
                let s = kind.sequence(set(n), id(5), 3);
                assert!(s.take(600).iter().all(|c| (1..=n).contains(&c.get())));
            }
        }
    }

    /// Naive double loop, independent of `first_rendezvous`.
    fn naive_first(a: &[ChannelId], b: &[ChannelId], sigma: usize, horizon: usize) -> Option<u64> {
        for t in 0..horizon {
            let mut hit = false;
            for s in 0..b.len() {
                if s == (t + sigma) % b.len() && a[t % a.len()] == b[s] {
                    hit = true;
                }
            }
            if hit {
                return Some(t as u64);
            }
        }
        None
    }

    // Frozen from an independent scan of the two constructions; every drift meets.
    const JUMPSTAY_N5_IDS_1_2: [u64; 15] = [4, 2, 0, 3, 1, 4, 2, 0, 5, 5, 0, 0, 0, 0, 0];

    #[test]
    fn jumpstay_n5_meets_for_every_drift() {
        let (a, b) = (jumpstay(set(5), id(1)), jumpstay(set(5), id(2)));
        let (ta, tb) = (a.take(15), b.take(15));
        for sigma in 0..15u64 {
            let oracle = naive_first(&ta, &tb, sigma as usize, 45);
            assert_eq!(oracle, Some(JUMPSTAY_N5_IDS_1_2[sigma as usize]), "drift {sigma}");
            assert_eq!(first_rendezvous(&a, &b, ClockDrift(sigma as i64), 45), oracle);
        }
        // Drift 3, the example called out explicitly.
        assert_eq!(first_rendezvous(&a, &b, ClockDrift(3), 45), Some(JUMPSTAY_N5_IDS_1_2[3]));
    }

    #[test]
    fn crseq_n5_meets_within_one_period_for_every_drift() {
        let (a, b) = (crseq(set(5), id(1)), crseq(set(5), id(2)));
        let (ta, tb) = (a.take(70), b.take(70));
        for sigma in 0..70 {
            let oracle = naive_first(&ta, &tb, sigma, 70);
            assert!(oracle.is_some(), "drift {sigma}");
            assert_eq!(first_rendezvous(&a, &b, ClockDrift(sigma as i64), 70), oracle);
        }
    }

    #[test]
    fn modular_n3_meets_within_nine_slots() {
        // id 3 sits in the same residue class as id 0.
        let (a, b) = (modular_baseline(set(3), id(3)), modular_baseline(set(3), id(1)));
        let (ta, tb) = (a.take(9), b.take(9));
        for sigma in 0..9 {
            let oracle = naive_first(&ta, &tb, sigma, 9);
            assert!(oracle.is_some(), "drift {sigma}");
            assert_eq!(first_rendezvous(&a, &b, ClockDrift(sigma as i64), 9), oracle);
        }
    }

    #[test]
    fn modular_meets_for_all_id_pairs_small_n() {
        for n in 1..=7 {
            let p = smallest_prime_at_least(n) as u64;
            for i in 1..=p + 1 {
                for j in 1..=p + 1 {
                    let (a, b) = (modular_baseline(set(n), id(i)), modular_baseline(set(n), id(j)));
                    for sigma in 0..(p * p) as i64 {
                        assert!(first_rendezvous(&a, &b, ClockDrift(sigma), p * p).is_some());
                    }
                }
            }
        }
    }
}
