//! Experiment configuration files.
//!
//! ```toml
//! seed = 1
//!
//! [network]
//! channels = 11
//! pairs = 20
//! slot_ms = 10.0
//!
//! [protocol]
//! base = "crseq"
//! period = 14
//! duty_cycles = ["5/14", "7/14", "9/14", "13/14", "1"]
//!
//! [pu]
//! transmitters = 10
//! busy_slots = 5
//! intensity = [0.25, 0.5]     # or idle_mean_slots = [14.49, 4.48]
//!
//! [run]
//! trials_per_pair = 100
//! ```
//!
//! Every key is optional. `pu.intensity` and `pu.idle_mean_slots` are
//! mutually exclusive and accept a number or a list; each entry becomes one
//! sweep column. [`ExperimentConfig::resolve`] fills in the derived
//! defaults so the printed configuration reproduces the run exactly.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::ChannelSet;
use crate::interleave::{AliasPolicy, HybridProtocol};
use crate::protocols::{NodeId, ProtocolKind};
use crate::pumodel::PuTrafficConfig;
use crate::sequence::RandomPolicy;
use crate::wakeup::generate_schedule;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error(transparent)]
    Toml(#[from] toml::de::Error),
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}

/// A duty cycle written `a/b` (or `1`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Duty(pub Ratio<u64>);

impl Duty {
    pub fn is_full(self) -> bool {
        self.0 == Ratio::from_integer(1)
    }

    pub fn value(self) -> f64 {
        *self.0.numer() as f64 / *self.0.denom() as f64
    }
}

impl FromStr for Duty {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let r: Ratio<u64> = s.trim().parse().map_err(|_| format!("bad duty cycle {s:?}, expected a/b"))?;
        if r == Ratio::from_integer(0) || r > Ratio::from_integer(1) {
            return Err(format!("duty cycle {s} must lie in (0, 1]"));
        }
        Ok(Duty(r))
    }
}

impl fmt::Display for Duty {
    /// Lowest terms: `7/14` prints as `1/2`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_integer() {
            write!(f, "{}", self.0.numer())
        } else {
            write!(f, "{}/{}", self.0.numer(), self.0.denom())
        }
    }
}

impl TryFrom<String> for Duty {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<Duty> for String {
    fn from(d: Duty) -> String {
        d.to_string()
    }
}

/// A single value or a list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Levels {
    One(f64),
    Many(Vec<f64>),
}

impl Levels {
    pub fn to_vec(&self) -> Vec<f64> {
        match self {
            Levels::One(v) => vec![*v],
            Levels::Many(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkConfig {
    pub channels: u32,
    pub pairs: u32,
    /// Slot length; recorded, never used in the arithmetic.
    pub slot_ms: f64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig {
            channels: 11,
            pairs: 20,
            slot_ms: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProtocolConfig {
    pub base: ProtocolKind,
    /// Wake-up schedule period `T`.
    pub period: usize,
    pub duty_cycles: Vec<Duty>,
    pub random_policy: RandomPolicy,
    pub alias_policy: AliasPolicy,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        ProtocolConfig {
            base: ProtocolKind::Crseq,
            period: 14,
            duty_cycles: ["5/14", "7/14", "9/14", "13/14", "1"]
                .iter()
                .map(|s| s.parse().expect("valid default"))
                .collect(),
            random_policy: RandomPolicy::Uniform,
            alias_policy: AliasPolicy::Bound,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PuConfig {
    /// `X`; defaults to `N - 1`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub transmitters: Option<u32>,
    pub busy_slots: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub intensity: Option<Levels>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub idle_mean_slots: Option<Levels>,
}

impl Default for PuConfig {
    fn default() -> Self {
        PuConfig {
            transmitters: None,
            busy_slots: 5,
            intensity: None,
            idle_mean_slots: None,
        }
    }
}

/// One PU traffic column of a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PuLevel {
    /// The intensity the column is labelled with: the configured one, or
    /// `b / (b + l)` when the idle mean was given directly.
    pub intensity: f64,
    pub traffic: PuTrafficConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub trials_per_pair: u64,
    /// Slots simulated per trial before it counts as censored.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub horizon: Option<u64>,
    /// Slots over which rendezvous channels are counted for diversity.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diversity_window: Option<u64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            trials_per_pair: 100,
            horizon: None,
            diversity_window: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub network: NetworkConfig,
    pub protocol: ProtocolConfig,
    pub pu: PuConfig,
    pub run: RunConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 1,
            network: NetworkConfig::default(),
            protocol: ProtocolConfig::default(),
            pu: PuConfig::default(),
            run: RunConfig::default(),
        }
    }
}

/// Shortest horizon filled in by [`ExperimentConfig::resolve`].
pub const MIN_DEFAULT_HORIZON: u64 = 10_000;
/// Default horizon as a multiple of the largest guaranteed bound.
pub const HORIZON_BOUND_FACTOR: u64 = 8;

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn channel_set(&self) -> Result<ChannelSet, ConfigError> {
        ChannelSet::new(self.network.channels).map_err(|e| invalid(e.to_string()))
    }

    /// Checks ranges and fills every derived default: transmitters
    /// `N - 1`, intensities `[0.25, 0.5]`, the horizon and the diversity
    /// window.
    pub fn resolve(mut self) -> Result<Self, ConfigError> {
        let channels = self.channel_set()?;
        let n = channels.n();
        if self.network.pairs == 0 {
            return Err(invalid("network.pairs must be at least 1"));
        }
        if self.run.trials_per_pair == 0 {
            return Err(invalid("run.trials_per_pair must be at least 1"));
        }
        if self.protocol.period == 0 {
            return Err(invalid("protocol.period must be at least 1"));
        }
        if self.protocol.duty_cycles.is_empty() {
            return Err(invalid("protocol.duty_cycles must not be empty"));
        }
        if self.pu.intensity.is_some() && self.pu.idle_mean_slots.is_some() {
            return Err(invalid("pu.intensity and pu.idle_mean_slots are mutually exclusive"));
        }
        let transmitters = *self.pu.transmitters.get_or_insert(n - 1);
        if transmitters >= n {
            return Err(invalid(format!("pu.transmitters must be below the {n} channels")));
        }
        if self.pu.intensity.is_none() && self.pu.idle_mean_slots.is_none() {
            self.pu.intensity = Some(Levels::Many(vec![0.25, 0.5]));
        }
        for levels in [&mut self.pu.intensity, &mut self.pu.idle_mean_slots].into_iter().flatten() {
            *levels = Levels::Many(levels.to_vec());
        }
        let levels = self.pu_levels()?;
        if levels.is_empty() {
            return Err(invalid("at least one PU traffic level is required"));
        }
        if self.run.diversity_window.is_none() {
            self.run.diversity_window = Some(default_diversity_window(channels));
        }
        if self.run.horizon.is_none() {
            self.run.horizon = Some(self.default_horizon(channels));
        }
        if self.run.horizon == Some(0) || self.run.diversity_window == Some(0) {
            return Err(invalid("run.horizon and run.diversity_window must be positive"));
        }
        Ok(self)
    }

    /// The PU traffic columns, in configured order.
    pub fn pu_levels(&self) -> Result<Vec<PuLevel>, ConfigError> {
        let transmitters = self.pu.transmitters.unwrap_or(self.network.channels.saturating_sub(1));
        let busy = self.pu.busy_slots;
        if let Some(means) = &self.pu.idle_mean_slots {
            return means
                .to_vec()
                .into_iter()
                .map(|l| {
                    let traffic = PuTrafficConfig::new(transmitters, busy, l).map_err(|e| invalid(e.to_string()))?;
                    Ok(PuLevel {
                        intensity: traffic.analytic_intensity(),
                        traffic,
                    })
                })
                .collect();
        }
        let intensities = self.pu.intensity.as_ref().map(Levels::to_vec).unwrap_or_default();
        intensities
            .into_iter()
            .map(|p| {
                let traffic =
                    PuTrafficConfig::from_intensity(transmitters, busy, p).map_err(|e| invalid(e.to_string()))?;
                Ok(PuLevel { intensity: p, traffic })
            })
            .collect()
    }

    /// `8x` the largest guaranteed rendezvous bound over the duty cycles,
    /// and at least [`MIN_DEFAULT_HORIZON`].
    fn default_horizon(&self, channels: ChannelSet) -> u64 {
        let base = self.protocol.base;
        let node = NodeId::new(1).expect("nonzero");
        let bounds = self.protocol.duty_cycles.iter().filter_map(|&duty| {
            if duty.is_full() {
                return base.period(channels);
            }
            let schedule = generate_schedule(self.protocol.period, duty.0).ok()?;
            HybridProtocol::new(base, channels, node, schedule, 0).ok()?.ttr_bound()
        });
        bounds
            .max()
            .map_or(MIN_DEFAULT_HORIZON, |b| (b * HORIZON_BOUND_FACTOR).max(MIN_DEFAULT_HORIZON))
    }
}

/// `N^2` slots: long enough for about `N` rendezvous at the random-hopping
/// rate `1/N`, short enough that distinct-channel counts have not yet
/// saturated at `N` for every protocol.
pub fn default_diversity_window(channels: ChannelSet) -> u64 {
    (channels.n() as u64).pow(2)
}
