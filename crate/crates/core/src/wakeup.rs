//! Neighbor-discovery wake-up schedules.
//!
//! A schedule is a binary vector of period `T`; bit `t` set means the node
//! is awake in slot `t mod T`. A clock drift of `k` slots shows up as the
//! cyclic rotation `rotate(x, k)_t = x_{(t + k) mod T}`. A schedule
//! discovers itself when every rotation shares at least one awake slot with
//! the original.

use std::fmt;
use std::str::FromStr;

use num_integer::Integer;
use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest period searched exhaustively by [`generate_schedule`].
pub const EXHAUSTIVE_MAX_PERIOD: usize = 16;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WakeupError {
    #[error("schedule must have at least one slot")]
    Empty,
    #[error("schedule characters must be '0' or '1', found {0:?}")]
    BadBit(char),
    #[error("duty cycle {duty} must lie in (0, 1]")]
    DutyOutOfRange { duty: Ratio<u64> },
    #[error("period {period} times duty cycle {duty} is not a whole number of slots")]
    FractionalWeight { period: usize, duty: Ratio<u64> },
    #[error("infeasible: no self-discovering schedule with {weight} awake slots out of {period}{}", min_weight.map(|w| format!(" (smallest feasible weight is {w})")).unwrap_or_default())]
    Infeasible {
        period: usize,
        weight: usize,
        min_weight: Option<usize>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct WakeUpSchedule {
    bits: Vec<bool>,
}

impl WakeUpSchedule {
    pub fn new(bits: Vec<bool>) -> Result<Self, WakeupError> {
        if bits.is_empty() {
            return Err(WakeupError::Empty);
        }
        Ok(WakeUpSchedule { bits })
    }

    pub fn always_awake(period: usize) -> Result<Self, WakeupError> {
        Self::new(vec![true; period])
    }

    pub fn period(&self) -> usize {
        self.bits.len()
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn is_awake(&self, t: u64) -> bool {
        self.bits[(t % self.bits.len() as u64) as usize]
    }

    /// `A`, the number of awake slots per period.
    pub fn awake_count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// `A / T`, exact.
    pub fn duty_cycle(&self) -> Ratio<u64> {
        Ratio::new(self.awake_count() as u64, self.period() as u64)
    }

    /// `rotate(x, k)_t = x_{(t + k) mod T}`; negative `k` allowed.
    pub fn rotate(&self, k: i64) -> WakeUpSchedule {
        let period = self.period() as i64;
        let shift = k.rem_euclid(period) as usize;
        let mut bits = self.bits.clone();
        bits.rotate_left(shift);
        WakeUpSchedule { bits }
    }

    /// `B(k)`: slots in one period awake in both `x` and `rotate(x, k)`.
    pub fn overlap(&self, k: i64) -> usize {
        let period = self.period() as i64;
        (0..period)
            .filter(|&t| self.bits[t as usize] && self.bits[(t + k).rem_euclid(period) as usize])
            .count()
    }

    pub fn discovers_itself(&self) -> bool {
        verify_discovery(self, self).is_some()
    }
}

impl fmt::Display for WakeUpSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.bits {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl FromStr for WakeUpSchedule {
    type Err = WakeupError;

    /// A line of `0`/`1` characters, e.g. `11101000`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bits = s
            .trim()
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(WakeupError::BadBit(other)),
            })
            .collect::<Result<Vec<_>, _>>()?;
        WakeUpSchedule::new(bits)
    }
}

impl TryFrom<String> for WakeUpSchedule {
    type Error = WakeupError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<WakeUpSchedule> for String {
    fn from(x: WakeUpSchedule) -> String {
        x.to_string()
    }
}

/// Proof that two schedules discover each other under every rotation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OverlapCertificate {
    /// For each rotation `k` in `[0, lcm(Tx, Ty))`, the first slot awake in
    /// both `x` and `rotate(y, k)`.
    pub witnesses: Vec<u64>,
    /// `B(k)`: how many slots in `[0, lcm(Tx, Ty))` are awake in both.
    pub overlaps: Vec<u64>,
}

impl OverlapCertificate {
    pub fn horizon(&self) -> u64 {
        self.witnesses.len() as u64
    }
}

/// Checks `∀k ∃t: x_{t mod Tx} = y_{(t + k) mod Ty} = 1` over the joint
/// period; returns a witness per rotation, or `None` if some rotation never
/// overlaps.
pub fn verify_discovery(x: &WakeUpSchedule, y: &WakeUpSchedule) -> Option<OverlapCertificate> {
    let (tx, ty) = (x.period(), y.period());
    let joint = tx.lcm(&ty);
    let mut witnesses = Vec::with_capacity(joint);
    let mut overlaps = Vec::with_capacity(joint);
    for k in 0..joint {
        let mut first = None;
        let mut count = 0u64;
        for t in 0..joint {
            if x.bits[t % tx] && y.bits[(t + k) % ty] {
                first.get_or_insert(t as u64);
                count += 1;
            }
        }
        witnesses.push(first?);
        overlaps.push(count);
    }
    Some(OverlapCertificate { witnesses, overlaps })
}

/// Self-discovery over a bitmask, for the search loops.
fn mask_discovers(mask: u64, period: usize) -> bool {
    let full = if period == 64 { u64::MAX } else { (1u64 << period) - 1 };
    (0..period).all(|k| {
        let rotated = if k == 0 { mask } else { ((mask >> k) | (mask << (period - k))) & full };
        mask & rotated != 0
    })
}

fn from_mask(mask: u64, period: usize) -> WakeUpSchedule {
    // Bit t of the schedule is bit t of the mask.
    WakeUpSchedule {
        bits: (0..period).map(|t| mask >> t & 1 == 1).collect(),
    }
}

/// Every unordered difference must appear among the awake positions, so a
/// self-discovering schedule needs `A (A - 1) >= T - 1`.
fn weight_lower_bound_holds(period: usize, weight: usize) -> bool {
    weight >= 1 && weight * (weight - 1) + 1 >= period
}

/// Schedule of length `period` with exactly `period * duty` awake slots that
/// discovers itself under every rotation.
///
/// Up to [`EXHAUSTIVE_MAX_PERIOD`] the search is exhaustive and returns the
/// lexicographically smallest passing bit string (`0 < 1`, slot 0 first).
/// Longer periods use a greedy construction with local repair. Nothing is
/// relaxed: if no schedule is found the call fails with `Infeasible`.
pub fn generate_schedule(period: usize, duty: Ratio<u64>) -> Result<WakeUpSchedule, WakeupError> {
    if period == 0 {
        return Err(WakeupError::Empty);
    }
    if duty <= Ratio::from_integer(0) || duty > Ratio::from_integer(1) {
        return Err(WakeupError::DutyOutOfRange { duty });
    }
    let weight = duty * Ratio::from_integer(period as u64);
    if !weight.is_integer() {
        return Err(WakeupError::FractionalWeight { period, duty });
    }
    let weight = weight.to_integer() as usize;
    let infeasible = || WakeupError::Infeasible {
        period,
        weight,
        min_weight: min_feasible_weight(period),
    };
    if weight == period {
        return WakeUpSchedule::always_awake(period);
    }
    if !weight_lower_bound_holds(period, weight) {
        return Err(infeasible());
    }
    let found = if period <= EXHAUSTIVE_MAX_PERIOD {
        exhaustive_search(period, weight)
    } else {
        greedy_search(period, weight)
    };
    found.ok_or_else(infeasible)
}

/// Smallest weight for which [`generate_schedule`] succeeds at `period`.
pub fn min_feasible_weight(period: usize) -> Option<usize> {
    if period == 0 {
        return None;
    }
    (1..=period).find(|&w| {
        w == period
            || (weight_lower_bound_holds(period, w)
                && if period <= EXHAUSTIVE_MAX_PERIOD {
                    exhaustive_search(period, w).is_some()
                } else {
                    greedy_search(period, w).is_some()
                })
    })
}

fn exhaustive_search(period: usize, weight: usize) -> Option<WakeUpSchedule> {
    // Lexicographic order on the bit string with slot 0 most significant:
    // enumerate integers ascending and read slot t from bit (T - 1 - t).
    (0u64..1 << period)
        .filter(|m| m.count_ones() as usize == weight)
        .map(|m| reverse_bits(m, period))
        .find(|&mask| mask_discovers(mask, period))
        .map(|mask| from_mask(mask, period))
}

fn reverse_bits(m: u64, period: usize) -> u64 {
    (0..period).fold(0, |acc, t| acc | ((m >> (period - 1 - t) & 1) << t))
}

/// Greedy: repeatedly add the slot that covers the most uncovered rotation
/// differences; then repair by single swaps while coverage improves.
fn greedy_search(period: usize, weight: usize) -> Option<WakeUpSchedule> {
    let covered = |bits: &[bool]| -> Vec<bool> {
        let mut cov = vec![false; period];
        let awake: Vec<usize> = (0..period).filter(|&t| bits[t]).collect();
        for &a in &awake {
            for &b in &awake {
                cov[(b + period - a) % period] = true;
            }
        }
        cov
    };
    let score = |bits: &[bool]| covered(bits).iter().filter(|&&c| c).count();

    let mut bits = vec![false; period];
    bits[0] = true;
    for _ in 1..weight {
        let best = (0..period)
            .filter(|&t| !bits[t])
            .max_by_key(|&t| {
                let mut trial = bits.clone();
                trial[t] = true;
                // Ties go to the earliest slot.
                (score(&trial), std::cmp::Reverse(t))
            })?;
        bits[best] = true;
    }

    let mut current = score(&bits);
    while current < period {
        let mut improved = false;
        let ones: Vec<usize> = (0..period).filter(|&t| bits[t]).collect();
        let zeros: Vec<usize> = (0..period).filter(|&t| !bits[t]).collect();
        'search: for &from in &ones {
            for &to in &zeros {
                bits[from] = false;
                bits[to] = true;
                let s = score(&bits);
                if s > current {
                    current = s;
                    improved = true;
                    break 'search;
                }
                bits[to] = false;
                bits[from] = true;
            }
        }
        if !improved {
            return covering_search(period, weight);
        }
    }
    Some(WakeUpSchedule { bits })
}

/// Node budget for [`covering_search`].
const COVERING_SEARCH_BUDGET: u64 = 5_000_000;

/// Depth-first search over sets containing slot 0, in increasing slot order,
/// pruned by how many differences the remaining slots could still cover.
/// Catches tight cases (e.g. perfect difference sets) greedy misses.
fn covering_search(period: usize, weight: usize) -> Option<WakeUpSchedule> {
    struct Search {
        period: usize,
        weight: usize,
        chosen: Vec<usize>,
        counts: Vec<u32>,
        uncovered: usize,
        budget: u64,
    }

    impl Search {
        fn add(&mut self, t: usize, delta: i32) {
            for i in 0..self.chosen.len() {
                let c = self.chosen[i];
                for d in [(t + self.period - c) % self.period, (c + self.period - t) % self.period] {
                    let before = self.counts[d];
                    self.counts[d] = (before as i32 + delta) as u32;
                    match (before, self.counts[d]) {
                        (0, _) => self.uncovered -= 1,
                        (_, 0) => self.uncovered += 1,
                        _ => {}
                    }
                }
            }
        }

        fn dfs(&mut self, next: usize) -> bool {
            if self.uncovered == 0 {
                return true;
            }
            let s = self.chosen.len();
            let r = self.weight - s;
            if r == 0 || self.budget == 0 {
                return false;
            }
            self.budget -= 1;
            if self.uncovered > 2 * (r * s + r * (r - 1) / 2) {
                return false;
            }
            for t in next..=self.period - r {
                self.add(t, 1);
                self.chosen.push(t);
                if self.dfs(t + 1) {
                    return true;
                }
                self.chosen.pop();
                self.add(t, -1);
            }
            false
        }
    }

    if weight == 0 || weight > period {
        return None;
    }
    let mut search = Search {
        period,
        weight,
        chosen: vec![0],
        counts: vec![0; period],
        uncovered: period - 1,
        budget: COVERING_SEARCH_BUDGET,
    };
    // Difference 0 is always covered by slot 0 itself.
    search.counts[0] = 1;
    if !search.dfs(1) {
        return None;
    }
    let mut bits = vec![false; period];
    for &t in &search.chosen {
        bits[t] = true;
    }
    // Fill any slots left over once every difference is covered.
    let mut spare = weight - search.chosen.len();
    for b in bits.iter_mut().filter(|b| !**b) {
        if spare == 0 {
            break;
        }
        *b = true;
        spare -= 1;
    }
    Some(WakeUpSchedule { bits })
}
