//! Rendezvous metrics.
//!
//! - MTTR: worst first-rendezvous slot over clock drifts.
//! - ATTR: expected first-rendezvous slot over drift and randomness.
//! - Diversity rate: fewest distinct rendezvous channels over drifts,
//!   divided by `N`.
//!
//! TTR is counted from 0 (`ttr0`, a rendezvous in slot 0 has TTR 0).
//! Reports carry `ttr1 = ttr0 + 1` as well, the convention under which
//! random hopping over `N` channels averages `N`.

use std::fmt;

use num_integer::Integer;
use num_rational::Ratio;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize, Serializer};
use thiserror::Error;

use crate::channel::{ChannelSet, ClockDrift};
use crate::rendezvous::{first_rendezvous, rendezvous_slots};
use crate::rng;
use crate::sequence::ChSequence;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("drift domain is empty")]
    EmptyDriftDomain,
    #[error("at least one trial is required")]
    NoTrials,
}

/// A time-to-rendezvous that may be unbounded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Ttr {
    Finite(u64),
    /// No rendezvous within the horizon for some drift or realization.
    Infinite,
}

impl Ttr {
    pub fn finite(self) -> Option<u64> {
        match self {
            Ttr::Finite(v) => Some(v),
            Ttr::Infinite => None,
        }
    }

    pub fn is_infinite(self) -> bool {
        self == Ttr::Infinite
    }
}

impl From<Option<u64>> for Ttr {
    fn from(v: Option<u64>) -> Self {
        v.map_or(Ttr::Infinite, Ttr::Finite)
    }
}

impl fmt::Display for Ttr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Ttr::Finite(v) => write!(f, "{v}"),
            Ttr::Infinite => f.write_str("inf"),
        }
    }
}

/// Finite values serialize as numbers, unbounded as the string `"inf"`.
impl Serialize for Ttr {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Ttr::Finite(v) => s.serialize_u64(*v),
            Ttr::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Ttr {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(u64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(Ttr::Finite(v)),
            Raw::Str(s) if s == "inf" => Ok(Ttr::Infinite),
            Raw::Str(s) => Err(serde::de::Error::custom(format!("expected a number or \"inf\", got {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DriftOutcome {
    pub drift: i64,
    pub first_rendezvous: Option<u64>,
    pub channels: Vec<u32>,
}

/// Outcome of every drift in `drifts`, in order.
pub fn per_drift(a: &ChSequence, b: &ChSequence, drifts: &[i64], horizon: u64) -> Vec<DriftOutcome> {
    drifts
        .par_iter()
        .map(|&drift| {
            let found = rendezvous_slots(a, b, ClockDrift(drift), horizon);
            DriftOutcome {
                drift,
                first_rendezvous: found.first(),
                channels: found.channels.iter().map(|c| c.get()).collect(),
            }
        })
        .collect()
}

/// `max over drifts of min rendezvous slot`, `Infinite` if any drift misses.
pub fn mttr(a: &ChSequence, b: &ChSequence, drifts: &[i64], horizon: u64) -> Result<Ttr, MetricsError> {
    if drifts.is_empty() {
        return Err(MetricsError::EmptyDriftDomain);
    }
    Ok(drifts
        .par_iter()
        .map(|&d| Ttr::from(first_rendezvous(a, b, ClockDrift(d), horizon)))
        .max()
        .expect("non-empty"))
}

/// `min over drifts of |rendezvous channels| / N`, with `N` taken from `a`.
pub fn diversity_rate(a: &ChSequence, b: &ChSequence, drifts: &[i64], horizon: u64) -> Result<Ratio<u64>, MetricsError> {
    if drifts.is_empty() {
        return Err(MetricsError::EmptyDriftDomain);
    }
    let fewest = per_drift(a, b, drifts, horizon)
        .iter()
        .map(|o| o.channels.len() as u64)
        .min()
        .expect("non-empty");
    Ok(Ratio::new(fewest, a.channels().n() as u64))
}

/// Drifts `0..lcm(τa, τb)`, enough to see every relative phase of two
/// periodic sequences.
pub fn joint_drift_window(a: &ChSequence, b: &ChSequence) -> Option<Vec<i64>> {
    let joint = a.period()?.lcm(&b.period()?);
    Some((0..joint as i64).collect())
}

/// Monte Carlo ATTR estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttrEstimate {
    pub trials: u64,
    pub censored: u64,
    /// Mean first-rendezvous slot of the uncensored trials.
    pub mean_ttr0: f64,
    /// Half-width of the normal-approximation 95% interval.
    pub ci95: f64,
    /// Largest uncensored TTR observed.
    pub max_ttr0: Option<u64>,
}

impl AttrEstimate {
    pub fn mean_ttr1(&self) -> f64 {
        self.mean_ttr0 + 1.0
    }

    pub fn censored_fraction(&self) -> f64 {
        self.censored as f64 / self.trials as f64
    }

    /// Builds the estimate from per-trial outcomes; `None` is censored.
    pub fn from_outcomes(outcomes: &[Option<u64>]) -> Self {
        let observed: Vec<f64> = outcomes.iter().flatten().map(|&t| t as f64).collect();
        let (mean, ci95) = mean_and_ci95(&observed);
        AttrEstimate {
            trials: outcomes.len() as u64,
            censored: (outcomes.len() - observed.len()) as u64,
            mean_ttr0: mean,
            ci95,
            max_ttr0: outcomes.iter().flatten().copied().max(),
        }
    }
}

/// Sample mean and the 1.96-sigma half-width of its normal interval.
pub fn mean_and_ci95(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    if samples.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = samples.iter().sum::<f64>() / n;
    if samples.len() < 2 {
        return (mean, 0.0);
    }
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, 1.96 * (var / n).sqrt())
}

/// Seeds handed to the two sequence factories for one trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrialSeeds {
    pub a: u64,
    pub b: u64,
}

/// ATTR by Monte Carlo. Each trial draws a drift uniformly from `drifts`,
/// builds fresh sequences from the factories and records the first
/// rendezvous within `horizon`. Trial `i` depends only on
/// `(master_seed, i)`, so results do not depend on thread scheduling.
pub fn attr<F, G>(
    make_a: F,
    make_b: G,
    drifts: &[i64],
    trials: u64,
    horizon: u64,
    master_seed: u64,
) -> Result<AttrEstimate, MetricsError>
where
    F: Fn(u64) -> ChSequence + Sync,
    G: Fn(u64) -> ChSequence + Sync,
{
    if drifts.is_empty() {
        return Err(MetricsError::EmptyDriftDomain);
    }
    if trials == 0 {
        return Err(MetricsError::NoTrials);
    }
    let outcomes: Vec<Option<u64>> = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let drift = drifts[rng::stream_rng(master_seed, trial).random_range(0..drifts.len())];
            let seeds = TrialSeeds {
                a: rng::derive_seed(master_seed, &[trial, 0]),
                b: rng::derive_seed(master_seed, &[trial, 1]),
            };
            first_rendezvous(&make_a(seeds.a), &make_b(seeds.b), ClockDrift(drift), horizon)
        })
        .collect();
    Ok(AttrEstimate::from_outcomes(&outcomes))
}

/// `B/T · ATTR_base + (1 - B/T) · N` for a drift whose schedule overlap is
/// `B` out of `T`.
pub fn predict_hybrid_attr(base_attr: f64, overlap: u64, period: u64, channels: ChannelSet) -> f64 {
    assert!(overlap <= period && period > 0, "overlap must lie in 0..=period");
    let awake_share = overlap as f64 / period as f64;
    awake_share * base_attr + (1.0 - awake_share) * channels.n() as f64
}

/// Serialized metric report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub mttr: Ttr,
    pub attr_ttr0: f64,
    pub attr_ttr1: f64,
    pub ci95: f64,
    pub diversity_rate: f64,
    /// The diversity rate as an exact fraction `a/b`.
    pub diversity_exact: String,
    pub censored_fraction: f64,
    pub trials: u64,
    pub per_drift: Vec<DriftOutcome>,
}

impl MetricReport {
    /// Exhaustive report over `drifts`: drift is the only randomness, so
    /// ATTR is the exact mean over the domain and `ci95` is 0.
    pub fn exhaustive(a: &ChSequence, b: &ChSequence, drifts: &[i64], horizon: u64) -> Result<Self, MetricsError> {
        if drifts.is_empty() {
            return Err(MetricsError::EmptyDriftDomain);
        }
        let outcomes = per_drift(a, b, drifts, horizon);
        let mttr = outcomes
            .iter()
            .map(|o| Ttr::from(o.first_rendezvous))
            .max()
            .expect("non-empty");
        let fewest = outcomes.iter().map(|o| o.channels.len() as u64).min().expect("non-empty");
        let diversity = Ratio::new(fewest, a.channels().n() as u64);
        let firsts: Vec<Option<u64>> = outcomes.iter().map(|o| o.first_rendezvous).collect();
        let estimate = AttrEstimate::from_outcomes(&firsts);
        Ok(MetricReport {
            mttr,
            attr_ttr0: estimate.mean_ttr0,
            attr_ttr1: estimate.mean_ttr1(),
            ci95: 0.0,
            diversity_rate: ratio_to_f64(diversity),
            diversity_exact: format!("{}/{}", diversity.numer(), diversity.denom()),
            censored_fraction: estimate.censored_fraction(),
            trials: drifts.len() as u64,
            per_drift: outcomes,
        })
    }

    /// Replaces the ATTR fields with a Monte Carlo estimate.
    pub fn with_attr(mut self, estimate: &AttrEstimate) -> Self {
        self.attr_ttr0 = estimate.mean_ttr0;
        self.attr_ttr1 = estimate.mean_ttr1();
        self.ci95 = estimate.ci95;
        self.censored_fraction = estimate.censored_fraction();
        self.trials = estimate.trials;
        self
    }
}

pub fn ratio_to_f64(r: Ratio<u64>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}
