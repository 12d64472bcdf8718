//! Primary-user traffic.
//!
//! Each of `X` licensed channels carries an independent on/off process:
//! busy runs of exactly `b` slots alternate with idle runs of
//! `ceil(Exp(l))` slots (at least 1). The discretized idle length is
//! geometric with mean `E = 1 / (1 - e^{-1/l})`, so the long-run busy
//! fraction is `b / (b + E)`; the analytic `b / (b + l)` is reported
//! alongside it.

use rand::seq::index;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{ChannelId, ChannelSet};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PuError {
    #[error("busy run length must be at least one slot")]
    ZeroBusy,
    #[error("mean idle length must be positive and finite, got {0}")]
    BadIdleMean(f64),
    #[error("intensity {intensity} is outside [0, {max}) for busy runs of {busy} slots")]
    BadIntensity { intensity: f64, busy: u32, max: f64 },
    #[error("{transmitters} transmitters need more than {n} channels")]
    TooManyTransmitters { transmitters: u32, n: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PuTrafficConfig {
    /// `X`, the number of channels carrying primary-user traffic.
    pub transmitters: u32,
    /// `b`, the fixed busy-run length.
    pub busy_slots: u32,
    /// `l`, the mean of the exponential idle duration before rounding up.
    pub idle_mean: f64,
}

impl PuTrafficConfig {
    pub fn new(transmitters: u32, busy_slots: u32, idle_mean: f64) -> Result<Self, PuError> {
        if busy_slots == 0 {
            return Err(PuError::ZeroBusy);
        }
        if !(idle_mean.is_finite() && idle_mean > 0.0) {
            return Err(PuError::BadIdleMean(idle_mean));
        }
        Ok(PuTrafficConfig {
            transmitters,
            busy_slots,
            idle_mean,
        })
    }

    /// No primary users at all.
    pub fn silent() -> Self {
        PuTrafficConfig {
            transmitters: 0,
            busy_slots: 1,
            idle_mean: 1.0,
        }
    }

    /// Chooses `l` so the discretized busy fraction `b / (b + E)` equals
    /// `intensity` exactly. Intensity 0 gives [`silent`](Self::silent).
    pub fn from_intensity(transmitters: u32, busy_slots: u32, intensity: f64) -> Result<Self, PuError> {
        if busy_slots == 0 {
            return Err(PuError::ZeroBusy);
        }
        let b = busy_slots as f64;
        // Idle runs last at least one slot, so E > 1.
        let max = b / (b + 1.0);
        if !(0.0..max).contains(&intensity) {
            return Err(PuError::BadIntensity {
                intensity,
                busy: busy_slots,
                max,
            });
        }
        if intensity == 0.0 {
            return Ok(Self::silent());
        }
        let idle = b * (1.0 - intensity) / intensity;
        let l = -1.0 / (1.0 - 1.0 / idle).ln();
        Self::new(transmitters, busy_slots, l)
    }

    pub fn is_silent(&self) -> bool {
        self.transmitters == 0
    }

    /// `E[ceil(Exp(l))]`, the mean idle run in whole slots.
    pub fn discretized_idle_mean(&self) -> f64 {
        1.0 / (1.0 - (-1.0 / self.idle_mean).exp())
    }

    /// `b / (b + l)`.
    pub fn analytic_intensity(&self) -> f64 {
        let b = self.busy_slots as f64;
        b / (b + self.idle_mean)
    }

    /// `b / (b + E)`, the long-run busy fraction of a simulated channel.
    pub fn discretized_intensity(&self) -> f64 {
        let b = self.busy_slots as f64;
        b / (b + self.discretized_idle_mean())
    }

    fn idle_run(&self, rng: &mut impl Rng) -> u64 {
        let exp = Exp::new(1.0 / self.idle_mean).expect("idle mean validated");
        let x: f64 = exp.sample(rng);
        (x.ceil() as u64).max(1)
    }
}

/// The on/off process of one channel, generated lazily as slots are
/// queried in non-decreasing order.
///
/// The process starts in its stationary regime: busy with probability
/// `b / (b + E)` with a uniform residual of `1..=b` slots, otherwise in an
/// idle run (geometric, hence memoryless, so a fresh run is already
/// stationary).
#[derive(Debug, Clone)]
pub struct PuChannel {
    cfg: PuTrafficConfig,
    rng: ChaCha8Rng,
    busy: bool,
    /// First slot after the current run.
    run_end: u64,
}

impl PuChannel {
    pub fn new(cfg: &PuTrafficConfig, channel: ChannelId, seed: u64) -> Self {
        let mut rng = rng::stream_rng(rng::derive_seed(seed, &[channel.get() as u64]), 0);
        let busy = rng.random_bool(cfg.discretized_intensity());
        let run_end = if busy {
            rng.random_range(1..=cfg.busy_slots as u64)
        } else {
            cfg.idle_run(&mut rng)
        };
        PuChannel {
            cfg: *cfg,
            rng,
            busy,
            run_end,
        }
    }

    /// Whether the primary user transmits in slot `t`. Queries must not go
    /// back in time.
    pub fn busy_at(&mut self, t: u64) -> bool {
        while t >= self.run_end {
            self.busy = !self.busy;
            self.run_end += if self.busy {
                self.cfg.busy_slots as u64
            } else {
                self.cfg.idle_run(&mut self.rng)
            };
        }
        self.busy
    }
}

/// Busy/idle trace of one channel over `[0, horizon)`: `true` where the
/// channel is available.
pub fn pu_trace(cfg: &PuTrafficConfig, channel: ChannelId, horizon: u64, seed: u64) -> Vec<bool> {
    let mut process = PuChannel::new(cfg, channel, seed);
    (0..horizon).map(|t| !process.busy_at(t)).collect()
}

/// The `X` distinct channels carrying traffic, uniform over `channels`,
/// in ascending order.
pub fn occupied_channels(cfg: &PuTrafficConfig, channels: ChannelSet, seed: u64) -> Result<Vec<ChannelId>, PuError> {
    let n = channels.n();
    if cfg.transmitters >= n && cfg.transmitters > 0 {
        return Err(PuError::TooManyTransmitters {
            transmitters: cfg.transmitters,
            n,
        });
    }
    let mut rng = rng::stream_rng(seed, u64::MAX);
    let mut picked: Vec<u32> = index::sample(&mut rng, n as usize, cfg.transmitters as usize)
        .into_iter()
        .map(|i| i as u32 + 1)
        .collect();
    picked.sort_unstable();
    Ok(picked.into_iter().map(|c| channels.fold(c)).collect())
}

/// Availability of every channel over `[0, horizon)`; slots past the
/// horizon count as available.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChannelAvailability {
    /// Indexed by `channel - 1`; `None` for channels without a transmitter.
    traces: Vec<Option<Vec<bool>>>,
}

impl ChannelAvailability {
    pub fn always(channels: ChannelSet) -> Self {
        ChannelAvailability {
            traces: vec![None; channels.n() as usize],
        }
    }

    pub fn generate(cfg: &PuTrafficConfig, channels: ChannelSet, horizon: u64, seed: u64) -> Result<Self, PuError> {
        let mut avail = Self::always(channels);
        for c in occupied_channels(cfg, channels, seed)? {
            avail.traces[c.get() as usize - 1] = Some(pu_trace(cfg, c, horizon, seed));
        }
        Ok(avail)
    }

    /// Builds availability from explicit traces, e.g. for degenerate tests.
    pub fn from_traces(traces: Vec<Option<Vec<bool>>>) -> Self {
        ChannelAvailability { traces }
    }

    pub fn available(&self, c: ChannelId, t: u64) -> bool {
        match self.traces.get(c.get() as usize - 1) {
            Some(Some(trace)) => trace.get(t as usize).copied().unwrap_or(true),
            _ => true,
        }
    }

    pub fn occupied(&self) -> impl Iterator<Item = u32> + '_ {
        self.traces
            .iter()
            .enumerate()
            .filter(|(_, t)| t.is_some())
            .map(|(i, _)| i as u32 + 1)
    }
}

/// Availability generated on the fly for slots visited in non-decreasing
/// order; agrees slot for slot with [`ChannelAvailability::generate`].
#[derive(Debug, Clone)]
pub struct AvailabilityCursor {
    processes: Vec<Option<PuChannel>>,
}

impl AvailabilityCursor {
    pub fn new(cfg: &PuTrafficConfig, channels: ChannelSet, seed: u64) -> Result<Self, PuError> {
        let mut processes = vec![None; channels.n() as usize];
        for c in occupied_channels(cfg, channels, seed)? {
            processes[c.get() as usize - 1] = Some(PuChannel::new(cfg, c, seed));
        }
        Ok(AvailabilityCursor { processes })
    }

    pub fn available(&mut self, c: ChannelId, t: u64) -> bool {
        match self.processes.get_mut(c.get() as usize - 1) {
            Some(Some(process)) => !process.busy_at(t),
            _ => true,
        }
    }
}
