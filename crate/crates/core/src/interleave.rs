//! Interleaving a base protocol with random hopping.
//!
//! In slot `t` a node whose wake-up bit `x_{t mod T}` is set emits the next
//! unused slot of its base sequence (a counter that advances only on awake
//! slots, starting at 0 on the node's local slot 0); otherwise it hops to a
//! uniformly random channel in `1..=N`.
//!
//! The guarantee needs `gcd(τ, A) = 1` between the base period `τ` and the
//! awake count `A`, so the channel count is first padded to the smallest
//! `N' >= N` whose detected base period satisfies it. Labels `N+1..=N'` are
//! aliases that resolve to real channels in `1..=N`.

use num_integer::Integer;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::ChannelSet;
use crate::protocols::{NodeId, ProtocolKind};
use crate::rng;
use crate::sequence::{ChSequence, Interleaved, RandomPolicy};
use crate::wakeup::WakeUpSchedule;

/// How far past `N` the padding search looks.
pub const PADDING_SEARCH_CAP: u32 = 64;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InterleaveError {
    #[error("wake-up schedule has no awake slot")]
    NoAwakeSlots,
    #[error("{0} has no period to pad against")]
    NotPeriodic(ProtocolKind),
    #[error("no channel count in {n}..={} gives a {base} period coprime with {awake} awake slots", n + PADDING_SEARCH_CAP)]
    NoPadding { base: ProtocolKind, n: u32, awake: u64 },
    #[error("wake-up schedule does not discover itself at rotation {rotation}")]
    NoDiscovery { rotation: u64 },
}

/// How alias labels `N+1..=N'` of the padded base sequence resolve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AliasPolicy {
    /// Each alias label stands for one channel of `1..=N`, sampled once from
    /// `(N, N', label)` and shared by every node running the protocol.
    #[default]
    Bound,
    /// Every emission of an alias label draws a fresh uniform channel.
    /// Independent per node, so alias meetings are left to chance.
    Fresh,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PaddedChannelSet {
    pub original: ChannelSet,
    pub padded: ChannelSet,
    /// Detected base period over the padded set.
    pub base_period: Option<u64>,
}

impl PaddedChannelSet {
    pub fn identity(channels: ChannelSet, base_period: Option<u64>) -> Self {
        PaddedChannelSet {
            original: channels,
            padded: channels,
            base_period,
        }
    }

    pub fn alias_count(&self) -> u32 {
        self.padded.n() - self.original.n()
    }

    /// The channel each alias label is bound to under [`AliasPolicy::Bound`],
    /// indexed by `label - N - 1`.
    pub fn alias_binding(&self) -> Vec<u32> {
        let (n, padded) = (self.original.n(), self.padded.n());
        (n + 1..=padded)
            .map(|label| {
                let key = rng::derive_seed(0xa11a5, &[n as u64, padded as u64, label as u64]);
                rng::uniform_label(key, 0, n)
            })
            .collect()
    }
}

/// `N' = min{m >= N : gcd(τ(m), A) = 1}` with `τ(m)` the period detected on
/// the constructed base sequence over `m` channels.
pub fn pad_channels(
    channels: ChannelSet,
    base: ProtocolKind,
    schedule: &WakeUpSchedule,
) -> Result<PaddedChannelSet, InterleaveError> {
    let awake = schedule.awake_count() as u64;
    if awake == 0 {
        return Err(InterleaveError::NoAwakeSlots);
    }
    if base == ProtocolKind::Random {
        return Err(InterleaveError::NotPeriodic(base));
    }
    let n = channels.n();
    for m in n..=n + PADDING_SEARCH_CAP {
        let padded = ChannelSet::new(m).expect("m >= n >= 1");
        let tau = base.period(padded).ok_or(InterleaveError::NotPeriodic(base))?;
        if tau.gcd(&awake) == 1 {
            return Ok(PaddedChannelSet {
                original: channels,
                padded,
                base_period: Some(tau),
            });
        }
    }
    Err(InterleaveError::NoPadding { base, n, awake })
}

/// A node's hybrid protocol: base protocol and ID, wake-up schedule, padded
/// channel set and the seed for its random slots.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HybridProtocol {
    pub base: ProtocolKind,
    pub node: NodeId,
    pub schedule: WakeUpSchedule,
    pub padded: PaddedChannelSet,
    pub seed: u64,
    pub random_policy: RandomPolicy,
    pub alias_policy: AliasPolicy,
}

impl HybridProtocol {
    /// Pads the channel set for `base` and `schedule`. A `random` base needs
    /// no padding: interleaving random hopping with itself is random hopping.
    pub fn new(
        base: ProtocolKind,
        channels: ChannelSet,
        node: NodeId,
        schedule: WakeUpSchedule,
        seed: u64,
    ) -> Result<Self, InterleaveError> {
        let padded = match base {
            ProtocolKind::Random => PaddedChannelSet::identity(channels, None),
            _ => pad_channels(channels, base, &schedule)?,
        };
        Ok(HybridProtocol {
            base,
            node,
            schedule,
            padded,
            seed,
            random_policy: RandomPolicy::Uniform,
            alias_policy: AliasPolicy::Bound,
        })
    }

    pub fn with_random_policy(mut self, policy: RandomPolicy) -> Self {
        self.random_policy = policy;
        self
    }

    pub fn with_alias_policy(mut self, policy: AliasPolicy) -> Self {
        self.alias_policy = policy;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// The base sequence over the padded channel set.
    pub fn base_sequence(&self) -> ChSequence {
        self.base.sequence(self.padded.padded, self.node, self.seed)
    }

    /// `τ T`, the guaranteed rendezvous bound; `None` for a random base.
    pub fn ttr_bound(&self) -> Option<u64> {
        Some(self.padded.base_period? * self.schedule.period() as u64)
    }

    pub fn sequence(&self) -> ChSequence {
        hybrid_sequence(self)
    }
}

/// The interleaved sequence of `h`.
pub fn hybrid_sequence(h: &HybridProtocol) -> ChSequence {
    let channels = h.padded.original;
    if h.base == ProtocolKind::Random {
        return ChSequence::random(channels, h.seed).with_policy(h.random_policy);
    }
    let base = h.base_sequence();
    let len = base.period().expect("deterministic base protocols are periodic");
    let table: Vec<u32> = base.take(len).into_iter().map(|c| c.get()).collect();
    let bits = h.schedule.bits().to_vec();
    let awake_before = bits
        .iter()
        .scan(0u64, |acc, &b| {
            let before = *acc;
            *acc += b as u64;
            Some(before)
        })
        .collect();
    let inner = Interleaved {
        base: table.into(),
        awake: h.schedule.awake_count() as u64,
        bits,
        awake_before,
        alias_binding: match h.alias_policy {
            AliasPolicy::Bound => Some(h.padded.alias_binding()),
            AliasPolicy::Fresh => None,
        },
        seed: h.seed,
    };
    ChSequence::interleaved(channels, inner, h.random_policy)
}

/// A slot where both nodes are awake, with the base indices they consume.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AwakeSlot {
    pub slot: u64,
    pub base_index: u64,
    pub peer_base_index: u64,
}

/// The slots `t0 + aT`, `a = 0..τ`, for one common-awake witness `t0`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AwakeTrack {
    pub witness: u64,
    pub slots: Vec<AwakeSlot>,
}

/// For a peer running the same schedule `drift` slots ahead, lists every
/// common-awake witness slot `t0` in one schedule period and, for each, the
/// `τ` slots `t0 + aT` with the base indices `c1 + aA` and `c2 + aA`
/// consumed by the two nodes.
pub fn awake_offsets(schedule: &WakeUpSchedule, tau: u64, drift: u64) -> Result<Vec<AwakeTrack>, InterleaveError> {
    let period = schedule.period() as u64;
    let awake = schedule.awake_count() as u64;
    let consumed = |t: u64| (t / period) * awake + (0..t % period).filter(|&s| schedule.is_awake(s)).count() as u64;
    let tracks: Vec<AwakeTrack> = (0..period)
        .filter(|&t0| schedule.is_awake(t0) && schedule.is_awake(t0 + drift))
        .map(|t0| AwakeTrack {
            witness: t0,
            slots: (0..tau)
                .map(|a| {
                    let slot = t0 + a * period;
                    AwakeSlot {
                        slot,
                        base_index: consumed(slot),
                        peer_base_index: consumed(slot + drift),
                    }
                })
                .collect(),
        })
        .collect();
    if tracks.is_empty() {
        return Err(InterleaveError::NoDiscovery {
            rotation: drift % period,
        });
    }
    Ok(tracks)
}

/// [`awake_offsets`] for a hybrid protocol against a peer `drift` slots ahead.
pub fn awake_subsequence_offsets(h: &HybridProtocol, drift: u64) -> Result<Vec<AwakeTrack>, InterleaveError> {
    let tau = h.padded.base_period.ok_or(InterleaveError::NotPeriodic(h.base))?;
    awake_offsets(&h.schedule, tau, drift)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{ChannelId, ClockDrift};
    use crate::protocols::smallest_prime_at_least;
    use crate::rendezvous::first_rendezvous;
    use crate::sequence::HopKind;

    fn set(n: u32) -> ChannelSet {
        ChannelSet::new(n).unwrap()
    }

    fn id(i: u64) -> NodeId {
        NodeId::new(i).unwrap()
    }

    fn sched(s: &str) -> WakeUpSchedule {
        s.parse().unwrap()
    }

    fn hybrid_over(base: Vec<u32>, n: u32, schedule: &str, seed: u64) -> ChSequence {
        let schedule = sched(schedule);
        let bits = schedule.bits().to_vec();
        let awake_before = bits
            .iter()
            .scan(0u64, |acc, &b| {
                let before = *acc;
                *acc += b as u64;
                Some(before)
            })
            .collect();
        let inner = Interleaved {
            base: base.into(),
            awake: schedule.awake_count() as u64,
            bits,
            awake_before,
            alias_binding: Some(vec![]),
            seed,
        };
        ChSequence::interleaved(set(n), inner, RandomPolicy::Uniform)
    }

    #[test]
    fn interleaving_example_sequence() {
        let s = hybrid_over(vec![1, 2, 3], 3, "11101000", 7);
        // None marks a random slot.
        let expected = [
            Some(1), Some(2), Some(3), None, Some(1), None, None, None,
            Some(2), Some(3), Some(1), None, Some(2), None, None, None,
        ];
        for (t, want) in expected.iter().enumerate() {
            let hop = s.hop_at(t as u64);
            match want {
                Some(c) => {
                    assert_eq!(hop.channel.get(), *c, "slot {t}");
                    assert_eq!(hop.kind, HopKind::Scheduled);
                }
                None => assert_eq!(hop.kind, HopKind::Random, "slot {t}"),
            }
        }
    }

    #[test]
    fn consumption_counter_advances_only_on_awake_slots() {
        let s = hybrid_over(vec![1, 2, 3], 3, "11101000", 1);
        for windows in 1..6u64 {
            let consumed = (0..windows * 8).filter(|&t| s.base_index_at(t).is_some()).count() as u64;
            assert_eq!(consumed, windows * 4);
            // The next awake slot reads base index W * A.
            assert_eq!(s.base_index_at(windows * 8), Some(windows * 4));
        }
    }

    #[test]
    fn all_awake_hybrid_is_the_base() {
        let h = HybridProtocol::new(ProtocolKind::JumpStay, set(5), id(2), sched("1"), 3).unwrap();
        assert_eq!(h.padded.padded, set(5));
        assert_eq!(h.sequence().take(90), h.base_sequence().take(90));
    }

    #[test]
    fn all_asleep_hybrid_is_random_hopping() {
        let s = hybrid_over(vec![1, 2, 3], 3, "0000", 5);
        assert!((0..200).all(|t| s.hop_at(t).kind == HopKind::Random));
        assert_eq!(s.take(200), ChSequence::random(set(3), 5).take(200));
    }

    #[test]
    fn random_slots_are_uniform() {
        // Pearson chi-square over 11 channels; 10 degrees of freedom,
        // 0.999 quantile is 29.59.
        let h = HybridProtocol::new(ProtocolKind::Crseq, set(11), id(1), sched("00000010001111"), 99).unwrap();
        let s = h.sequence();
        let mut counts = [0f64; 11];
        let mut total = 0f64;
        for t in 0..140_000 {
            let hop = s.hop_at(t);
            if hop.kind == HopKind::Random {
                counts[hop.channel.get() as usize - 1] += 1.0;
                total += 1.0;
            }
        }
        let expected = total / 11.0;
        let chi2: f64 = counts.iter().map(|c| (c - expected).powi(2) / expected).sum();
        assert!(chi2 < 29.59, "chi2 = {chi2}");
        // Lag-1 independence: equal consecutive random draws occur 1/N of the time.
        let random_slots: Vec<u64> = (0..140_000).filter(|&t| s.hop_at(t).kind == HopKind::Random).collect();
        let pairs = random_slots.windows(2).filter(|w| w[1] == w[0] + 1).count() as f64;
        let equal = random_slots
            .windows(2)
            .filter(|w| w[1] == w[0] + 1 && s.channel_at(w[0]) == s.channel_at(w[1]))
            .count() as f64;
        assert!((equal / pairs - 1.0 / 11.0).abs() < 0.01);
    }

    /// Independent gcd search: walk upward from N and rebuild the base each time.
    fn oracle_padding(n: u32, base: ProtocolKind, awake: u64) -> Option<u32> {
        (n..=n + PADDING_SEARCH_CAP).find(|&m| {
            let p = smallest_prime_at_least(m) as usize;
            let bound = match base {
                ProtocolKind::JumpStay => 3 * p,
                ProtocolKind::Modular => p * p,
                _ => p * (3 * p - 1),
            };
            let v: Vec<ChannelId> = base.sequence(set(m), id(1), 0).take(bound as u64);
            let tau = (1..=bound).find(|&d| (0..bound).all(|t| v[t] == v[(t + d) % bound])).unwrap() as u64;
            num_integer::gcd(tau, awake) == 1
        })
    }

    #[test]
    fn padding_examples() {
        let one = sched("1");
        assert_eq!(pad_channels(set(7), ProtocolKind::JumpStay, &one).unwrap().padded, set(7));
        let five = sched("00000010001111");
        let p = pad_channels(set(11), ProtocolKind::JumpStay, &five).unwrap();
        assert_eq!((p.padded, p.base_period), (set(11), Some(33)));
        // gcd(33, 3) = 3, and every Jump-Stay period is a multiple of 3.
        let three = sched("1101000");
        assert_eq!(oracle_padding(11, ProtocolKind::JumpStay, 3), None);
        assert_eq!(
            pad_channels(set(11), ProtocolKind::JumpStay, &three),
            Err(InterleaveError::NoPadding { base: ProtocolKind::JumpStay, n: 11, awake: 3 })
        );
        // Modular at N=3 has period 9; three awake slots force N' = 4 (P = 5, τ = 25).
        let p = pad_channels(set(3), ProtocolKind::Modular, &three).unwrap();
        assert_eq!((p.padded, p.base_period), (set(4), Some(25)));
        assert_eq!(oracle_padding(3, ProtocolKind::Modular, 3), Some(4));
    }

    #[test]
    fn padding_rejects_degenerate_inputs() {
        assert_eq!(
            pad_channels(set(3), ProtocolKind::Crseq, &sched("000")),
            Err(InterleaveError::NoAwakeSlots)
        );
        assert_eq!(
            pad_channels(set(3), ProtocolKind::Random, &sched("1")),
            Err(InterleaveError::NotPeriodic(ProtocolKind::Random))
        );
    }

    #[test]
    fn alias_binding_is_shared_and_in_range() {
        let p = PaddedChannelSet {
            original: set(5),
            padded: set(9),
            base_period: None,
        };
        let binding = p.alias_binding();
        assert_eq!(binding.len(), 4);
        assert!(binding.iter().all(|c| (1..=5).contains(c)));
        assert_eq!(binding, p.alias_binding());
    }

    #[test]
    fn alias_labels_never_leak_into_emissions() {
        let h = HybridProtocol::new(ProtocolKind::JumpStay, set(5), id(2), sched("11111"), 4).unwrap();
        assert_eq!(h.padded.padded, set(6));
        for policy in [AliasPolicy::Bound, AliasPolicy::Fresh] {
            let s = h.clone().with_alias_policy(policy).sequence();
            assert!(s.take(500).iter().all(|c| (1..=5).contains(&c.get())));
        }
    }

    #[test]
    fn fresh_aliases_lose_the_guarantee_bound_aliases_keep_it() {
        // N = 5 pads to 6 for five awake slots; ids 2 and 3 then meet only on
        // the alias label at some drifts.
        let make = |node, alias| {
            HybridProtocol::new(ProtocolKind::JumpStay, set(5), id(node), sched("11111"), node)
                .unwrap()
                .with_random_policy(RandomPolicy::Adversarial)
                .with_alias_policy(alias)
                .sequence()
        };
        let bound = 21 * 5;
        let misses = |alias| {
            let (a, b) = (make(2, alias), make(3, alias));
            (0..bound as i64)
                .filter(|&k| first_rendezvous(&a, &b, ClockDrift(k), bound).is_none())
                .count()
        };
        assert!(misses(AliasPolicy::Fresh) > 0);
        assert_eq!(misses(AliasPolicy::Bound), 0);
    }

    #[test]
    fn offsets_single_slot_schedule() {
        let tracks = awake_offsets(&sched("1"), 5, 0).unwrap();
        assert_eq!(tracks.len(), 1);
        let pairs: Vec<(u64, u64)> = tracks[0].slots.iter().map(|s| (s.slot, s.base_index)).collect();
        assert_eq!(pairs, (0..5).map(|a| (a, a)).collect::<Vec<_>>());
    }

    #[test]
    fn offsets_cover_every_residue_when_coprime() {
        // τ = 3, A = 2: indices c1, c1 + 2, c1 + 4 hit all residues mod 3.
        let x = sched("110");
        for drift in 0..3 {
            for track in awake_offsets(&x, 3, drift).unwrap() {
                let c1 = track.slots[0].base_index;
                let own: Vec<u64> = track.slots.iter().map(|s| s.base_index).collect();
                assert_eq!(own, vec![c1, c1 + 2, c1 + 4]);
                let mut residues: Vec<u64> = own.iter().map(|i| i % 3).collect();
                residues.sort();
                assert_eq!(residues, vec![0, 1, 2]);
                // The pair of residues is a shifted diagonal: (a, a + c2 - c1).
                let diff = track.slots[0].peer_base_index as i64 - c1 as i64;
                for s in &track.slots {
                    assert_eq!(s.peer_base_index as i64 - s.base_index as i64, diff);
                }
            }
        }
    }

    #[test]
    fn offsets_cycle_through_a_subgroup_when_not_coprime() {
        // τ = 6, A = 3: only 6 / gcd(6, 3) = 2 residues are reached.
        let x = sched("1101000");
        let tracks = awake_offsets(&x, 6, 0).unwrap();
        for track in tracks {
            let mut residues: Vec<u64> = track.slots.iter().map(|s| s.base_index % 6).collect();
            residues.sort();
            residues.dedup();
            assert_eq!(residues.len(), 2);
        }
    }

    #[test]
    fn offsets_require_discovery() {
        assert_eq!(
            awake_offsets(&sched("10"), 3, 1),
            Err(InterleaveError::NoDiscovery { rotation: 1 })
        );
    }

    #[test]
    fn offsets_match_the_generated_sequences() {
        let x = sched("11101000");
        let h = HybridProtocol::new(ProtocolKind::Modular, set(5), id(1), x, 0).unwrap();
        let s = h.sequence();
        for drift in 0..16 {
            for track in awake_subsequence_offsets(&h, drift).unwrap() {
                for slot in track.slots {
                    assert_eq!(s.base_index_at(slot.slot), Some(slot.base_index));
                    assert_eq!(s.base_index_at(slot.slot + drift), Some(slot.peer_base_index));
                }
            }
        }
    }
}
