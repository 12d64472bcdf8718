//! Pairwise rendezvous experiments under primary-user traffic.
//!
//! A sweep crosses the configured duty cycles with the PU traffic levels.
//! In every cell, each of the `pairs` node pairs runs `trials_per_pair`
//! trials. A trial draws a clock drift uniformly from the cell's joint
//! window, builds both nodes' sequences and scans slots until the nodes
//! share a channel that no primary user occupies.
//!
//! Randomness is addressed, never streamed: trial `(pair, i)` takes its
//! node seeds and drift from `(seed, 0, pair, i)` and its PU traffic from
//! `(seed, 1, pair, i)`. The same trial therefore sees the same drift and
//! the same random hops in every cell, and adding PU traffic can only
//! delay it. Results do not depend on thread scheduling.

use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::channel::{ChannelId, ChannelSet, ClockDrift};
use crate::config::{ConfigError, Duty, ExperimentConfig, PuLevel};
use crate::interleave::{HybridProtocol, InterleaveError};
use crate::metrics::{mean_and_ci95, Ttr};
use crate::protocols::{NodeId, ProtocolKind};
use crate::pumodel::{AvailabilityCursor, ChannelAvailability, PuError, PuTrafficConfig};
use crate::rng;
use crate::sequence::ChSequence;
use crate::wakeup::{generate_schedule, WakeUpSchedule, WakeupError};

#[derive(Debug, Error)]
pub enum SimulationError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Pu(#[from] PuError),
    #[error("cannot write {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

/// Channel availability as seen by a trial scanning slots in order.
pub trait Availability {
    fn available(&mut self, c: ChannelId, t: u64) -> bool;
}

impl Availability for AvailabilityCursor {
    fn available(&mut self, c: ChannelId, t: u64) -> bool {
        AvailabilityCursor::available(self, c, t)
    }
}

impl Availability for ChannelAvailability {
    fn available(&mut self, c: ChannelId, t: u64) -> bool {
        ChannelAvailability::available(self, c, t)
    }
}

/// Result of one trial.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub drift: i64,
    /// First PU-free rendezvous slot; `None` when censored.
    pub first_rendezvous: Option<u64>,
    /// Distinct PU-free rendezvous channels within the diversity window.
    pub channels: Vec<u32>,
}

/// Scans slots `0..` until the first PU-free rendezvous and the end of the
/// diversity window have both passed, or the horizon runs out.
pub fn scan_pair(
    a: &ChSequence,
    b: &ChSequence,
    drift: ClockDrift,
    avail: &mut impl Availability,
    horizon: u64,
    window: u64,
) -> TrialOutcome {
    let n = a.channels().n() as usize;
    let mut seen = vec![false; n];
    let mut first = None;
    for t in 0..horizon {
        if first.is_some() && t >= window {
            break;
        }
        let (ta, tb) = drift.align(t);
        let (ha, hb) = (a.hop_at(ta), b.hop_at(tb));
        if ha.meets(&hb) && avail.available(ha.channel, t) {
            first.get_or_insert(t);
            if t < window {
                seen[ha.channel.get() as usize - 1] = true;
            }
        }
    }
    TrialOutcome {
        drift: drift.sigma(),
        first_rendezvous: first,
        channels: (1..=n as u32).filter(|&c| seen[c as usize - 1]).collect(),
    }
}

/// How the nodes of one cell hop.
#[derive(Debug, Clone)]
enum CellProtocol {
    /// Duty cycle 1: the base protocol itself.
    Pure,
    Hybrid { schedule: WakeUpSchedule, padded_n: u32, bound: u64 },
}

/// One grid cell, prepared once and shared by all its trials.
#[derive(Debug, Clone)]
pub struct PreparedCell {
    pub index: usize,
    pub duty: Duty,
    pub level: PuLevel,
    channels: ChannelSet,
    protocol: CellProtocol,
    /// Per pair, the two nodes' hybrid protocols (empty for pure cells).
    hybrids: Vec<(HybridProtocol, HybridProtocol)>,
    base: ProtocolKind,
    pairs: u32,
    drift_window: u64,
    seed: u64,
    trials_per_pair: u64,
    horizon: u64,
    diversity_window: u64,
}

/// Why a cell was not run.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SkipReason {
    #[error(transparent)]
    Schedule(#[from] WakeupError),
    #[error(transparent)]
    Padding(#[from] InterleaveError),
}

/// IDs of the two nodes of `pair`: `2p + 1` and `2p + 2`.
pub fn pair_nodes(pair: u32) -> (NodeId, NodeId) {
    let base = 2 * pair as u64;
    (NodeId::new(base + 1).expect("nonzero"), NodeId::new(base + 2).expect("nonzero"))
}

impl PreparedCell {
    /// `cfg` must be resolved.
    pub fn new(cfg: &ExperimentConfig, index: usize, duty: Duty, level: PuLevel) -> Result<Self, SkipReason> {
        let channels = cfg.channel_set().expect("resolved config");
        let base = cfg.protocol.base;
        let pairs = cfg.network.pairs;
        let (protocol, hybrids) = if duty.is_full() {
            (CellProtocol::Pure, Vec::new())
        } else {
            let schedule = generate_schedule(cfg.protocol.period, duty.0)?;
            let (a, _) = pair_nodes(0);
            let template = HybridProtocol::new(base, channels, a, schedule.clone(), 0)?
                .with_random_policy(cfg.protocol.random_policy)
                .with_alias_policy(cfg.protocol.alias_policy);
            let hybrids = (0..pairs)
                .map(|p| {
                    let (a, b) = pair_nodes(p);
                    let node = |id| HybridProtocol {
                        node: id,
                        ..template.clone()
                    };
                    (node(a), node(b))
                })
                .collect();
            let bound = template.ttr_bound().unwrap_or(0);
            let protocol = CellProtocol::Hybrid {
                schedule,
                padded_n: template.padded.padded.n(),
                bound,
            };
            (protocol, hybrids)
        };
        let drift_window = match &protocol {
            CellProtocol::Pure => base.period(channels),
            CellProtocol::Hybrid { bound, .. } => (*bound > 0).then_some(*bound),
        }
        .unwrap_or(channels.n() as u64);
        Ok(PreparedCell {
            index,
            duty,
            level,
            channels,
            protocol,
            hybrids,
            base,
            pairs,
            drift_window,
            seed: cfg.seed,
            trials_per_pair: cfg.run.trials_per_pair,
            horizon: cfg.run.horizon.expect("resolved config"),
            diversity_window: cfg.run.diversity_window.expect("resolved config"),
        })
    }

    pub fn schedule(&self) -> Option<&WakeUpSchedule> {
        match &self.protocol {
            CellProtocol::Pure => None,
            CellProtocol::Hybrid { schedule, .. } => Some(schedule),
        }
    }

    /// `τ T` for a hybrid, `τ` for a pure deterministic base.
    pub fn mttr_bound(&self) -> Option<u64> {
        match &self.protocol {
            CellProtocol::Pure => self.base.period(self.channels),
            CellProtocol::Hybrid { bound, .. } => (*bound > 0).then_some(*bound),
        }
    }

    pub fn padded_n(&self) -> u32 {
        match &self.protocol {
            CellProtocol::Pure => self.channels.n(),
            CellProtocol::Hybrid { padded_n, .. } => *padded_n,
        }
    }

    /// Drifts are drawn uniformly from `0..drift_window`.
    pub fn drift_window(&self) -> u64 {
        self.drift_window
    }

    /// The two sequences and the drift of trial `trial` of `pair`.
    pub fn trial_setup(&self, pair: u32, trial: u64) -> (ChSequence, ChSequence, ClockDrift) {
        let su = rng::derive_seed(self.seed, &[0, pair as u64, trial]);
        let (seed_a, seed_b) = (rng::derive_seed(su, &[0]), rng::derive_seed(su, &[1]));
        let drift = rng::stream_rng(su, 0).random_range(0..self.drift_window) as i64;
        let (a, b) = match &self.protocol {
            CellProtocol::Pure => {
                let (na, nb) = pair_nodes(pair);
                (
                    self.base.sequence(self.channels, na, seed_a),
                    self.base.sequence(self.channels, nb, seed_b),
                )
            }
            CellProtocol::Hybrid { .. } => {
                let (ha, hb) = &self.hybrids[pair as usize];
                (ha.clone().with_seed(seed_a).sequence(), hb.clone().with_seed(seed_b).sequence())
            }
        };
        (a, b, ClockDrift(drift))
    }

    /// Seed of the PU traffic seen by trial `trial` of `pair`.
    pub fn pu_seed(&self, pair: u32, trial: u64) -> u64 {
        rng::derive_seed(self.seed, &[1, pair as u64, trial])
    }

    /// One trial under this cell's PU traffic.
    pub fn run_pair(&self, pair: u32, trial: u64) -> Result<TrialOutcome, PuError> {
        self.run_pair_with(pair, trial, &self.level.traffic)
    }

    /// One trial with the traffic replaced, keeping all other randomness.
    pub fn run_pair_with(&self, pair: u32, trial: u64, traffic: &PuTrafficConfig) -> Result<TrialOutcome, PuError> {
        let (a, b, drift) = self.trial_setup(pair, trial);
        let mut avail = AvailabilityCursor::new(traffic, self.channels, self.pu_seed(pair, trial))?;
        Ok(scan_pair(&a, &b, drift, &mut avail, self.horizon, self.diversity_window))
    }

    /// All trials of all pairs, ordered by `(pair, trial)`.
    pub fn run(&self) -> Result<Vec<TrialOutcome>, PuError> {
        let per_pair = self.trials_per_pair;
        (0..self.pairs as u64 * per_pair)
            .into_par_iter()
            .map(|k| self.run_pair((k / per_pair) as u32, k % per_pair))
            .collect()
    }

    fn row(&self, period: usize, outcomes: &[TrialOutcome]) -> CellRow {
        let mut row = CellRow::header(self, period);
        let n = self.channels.n() as f64;
        let firsts: Vec<f64> = outcomes.iter().filter_map(|o| o.first_rendezvous).map(|t| t as f64).collect();
        let censored = outcomes.len() - firsts.len();
        let (attr, attr_ci) = mean_and_ci95(&firsts);
        let rates: Vec<f64> = outcomes.iter().map(|o| o.channels.len() as f64 / n).collect();
        let (div, div_ci) = mean_and_ci95(&rates);
        row.status = CellStatus::Ok;
        row.mttr_observed = Some(if censored > 0 {
            Ttr::Infinite
        } else {
            Ttr::Finite(outcomes.iter().filter_map(|o| o.first_rendezvous).max().unwrap_or(0))
        });
        if !firsts.is_empty() {
            row.attr_ttr0 = Some(attr);
            row.attr_ttr1 = Some(attr + 1.0);
            row.attr_ci95 = Some(attr_ci);
        }
        row.diversity_mean = Some(div);
        row.diversity_ci95 = Some(div_ci);
        row.diversity_min = rates.iter().copied().reduce(f64::min);
        row.censored_fraction = Some(censored as f64 / outcomes.len() as f64);
        row.trials = outcomes.len() as u64;
        row
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellStatus {
    Ok,
    Skipped,
}

/// One row of the sweep table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRow {
    pub cell: usize,
    pub base: ProtocolKind,
    /// Awake slots over the schedule period, e.g. `5/14`; `1` for the pure
    /// base protocol.
    pub duty: String,
    pub duty_value: f64,
    pub intensity: f64,
    pub intensity_discretized: f64,
    pub idle_mean: Option<f64>,
    pub transmitters: u32,
    pub status: CellStatus,
    pub skip_reason: Option<String>,
    pub schedule: Option<String>,
    pub padded_n: Option<u32>,
    pub mttr_bound: Option<u64>,
    pub mttr_observed: Option<Ttr>,
    pub attr_ttr0: Option<f64>,
    pub attr_ttr1: Option<f64>,
    pub attr_ci95: Option<f64>,
    pub diversity_mean: Option<f64>,
    pub diversity_ci95: Option<f64>,
    pub diversity_min: Option<f64>,
    pub censored_fraction: Option<f64>,
    pub trials: u64,
}

impl CellRow {
    fn header(cell: &PreparedCell, period: usize) -> Self {
        let mut row = CellRow::skipped(cell.index, cell.base, cell.duty, &cell.level, period, String::new());
        row.skip_reason = None;
        row.schedule = cell.schedule().map(|x| x.to_string());
        row.padded_n = Some(cell.padded_n());
        row.mttr_bound = cell.mttr_bound();
        row
    }

    fn skipped(index: usize, base: ProtocolKind, duty: Duty, level: &PuLevel, period: usize, reason: String) -> Self {
        let traffic = &level.traffic;
        let slots = duty.0 * num_rational::Ratio::from_integer(period as u64);
        CellRow {
            cell: index,
            base,
            duty: if duty.is_full() {
                "1".to_string()
            } else if slots.is_integer() {
                format!("{}/{period}", slots.to_integer())
            } else {
                duty.to_string()
            },
            duty_value: duty.value(),
            intensity: level.intensity,
            intensity_discretized: if traffic.is_silent() { 0.0 } else { traffic.discretized_intensity() },
            idle_mean: (!traffic.is_silent()).then_some(traffic.idle_mean),
            transmitters: traffic.transmitters,
            status: CellStatus::Skipped,
            skip_reason: Some(reason),
            schedule: None,
            padded_n: None,
            mttr_bound: None,
            mttr_observed: None,
            attr_ttr0: None,
            attr_ttr1: None,
            attr_ci95: None,
            diversity_mean: None,
            diversity_ci95: None,
            diversity_min: None,
            censored_fraction: None,
            trials: 0,
        }
    }
}

/// Per-pair aggregate kept in the JSON output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRow {
    pub cell: usize,
    pub pair: u32,
    pub nodes: (u64, u64),
    pub trials: u64,
    pub censored: u64,
    pub attr_ttr0: Option<f64>,
    pub max_ttr0: Option<u64>,
    pub diversity_mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    /// The resolved configuration the rows were produced from.
    pub config: ExperimentConfig,
    pub config_hash: String,
    pub rows: Vec<CellRow>,
    pub pairs: Vec<PairRow>,
}

/// First 16 hex digits of the SHA-256 of the resolved configuration.
pub fn config_hash(cfg: &ExperimentConfig) -> String {
    let digest = Sha256::digest(cfg.to_toml().as_bytes());
    hex::encode(&digest[..8])
}

/// Runs every `(intensity, duty)` cell of the grid, intensity-major.
pub fn sweep(cfg: &ExperimentConfig) -> Result<ExperimentResult, SimulationError> {
    let cfg = cfg.clone().resolve()?;
    let levels = cfg.pu_levels()?;
    let period = cfg.protocol.period;
    let n = cfg.network.channels as f64;
    let mut rows = Vec::new();
    let mut pairs = Vec::new();
    for level in &levels {
        for &duty in &cfg.protocol.duty_cycles {
            let index = rows.len();
            let cell = match PreparedCell::new(&cfg, index, duty, *level) {
                Ok(cell) => cell,
                Err(reason) => {
                    rows.push(CellRow::skipped(index, cfg.protocol.base, duty, level, period, reason.to_string()));
                    continue;
                }
            };
            let outcomes = cell.run()?;
            rows.push(cell.row(period, &outcomes));
            for (p, chunk) in outcomes.chunks(cfg.run.trials_per_pair as usize).enumerate() {
                let firsts: Vec<f64> = chunk.iter().filter_map(|o| o.first_rendezvous).map(|t| t as f64).collect();
                let (na, nb) = pair_nodes(p as u32);
                pairs.push(PairRow {
                    cell: index,
                    pair: p as u32,
                    nodes: (na.get(), nb.get()),
                    trials: chunk.len() as u64,
                    censored: (chunk.len() - firsts.len()) as u64,
                    attr_ttr0: (!firsts.is_empty()).then(|| mean_and_ci95(&firsts).0),
                    max_ttr0: chunk.iter().filter_map(|o| o.first_rendezvous).max(),
                    diversity_mean: chunk.iter().map(|o| o.channels.len() as f64 / n).sum::<f64>() / chunk.len() as f64,
                });
            }
        }
    }
    Ok(ExperimentResult {
        config_hash: config_hash(&cfg),
        config: cfg,
        rows,
        pairs,
    })
}

impl ExperimentResult {
    /// One line per cell, columns as in [`CellRow`].
    pub fn to_csv(&self) -> String {
        let mut writer = csv::Writer::from_writer(Vec::new());
        for row in &self.rows {
            writer.serialize(row).expect("rows serialize");
        }
        String::from_utf8(writer.into_inner().expect("in-memory writer")).expect("utf-8")
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("result serializes");
        text.push('\n');
        text
    }

    /// Writes `<stem>-<hash>.<ext>` into `dir` for each requested format.
    pub fn write(&self, dir: &Path, stem: &str, formats: &[OutputFormat]) -> Result<Vec<PathBuf>, SimulationError> {
        let io = |path: &Path| {
            let path = path.display().to_string();
            move |source| SimulationError::Io { path, source }
        };
        fs::create_dir_all(dir).map_err(io(dir))?;
        formats
            .iter()
            .map(|format| {
                let path = dir.join(format!("{stem}-{}.{}", self.config_hash, format.extension()));
                let body = match format {
                    OutputFormat::Csv => self.to_csv(),
                    OutputFormat::Json => self.to_json(),
                };
                fs::write(&path, body).map_err(io(&path))?;
                Ok(path)
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

impl OutputFormat {
    pub fn extension(self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rendezvous::first_rendezvous;

    fn small(base: &str, period: usize, duties: &[&str], intensity: &[f64]) -> ExperimentConfig {
        let text = format!(
            "seed = 5\n[network]\nchannels = 5\npairs = 3\n[protocol]\nbase = \"{base}\"\nperiod = {period}\nduty_cycles = {duties:?}\n[pu]\nintensity = {intensity:?}\n[run]\ntrials_per_pair = 40\n"
        );
        ExperimentConfig::from_toml(&text).unwrap().resolve().unwrap()
    }

    fn cell(cfg: &ExperimentConfig, duty: &str) -> PreparedCell {
        let level = cfg.pu_levels().unwrap()[0];
        PreparedCell::new(cfg, 0, duty.parse().unwrap(), level).unwrap()
    }

    #[test]
    fn silent_traffic_matches_plain_first_rendezvous() {
        let cfg = small("jumpstay", 3, &["2/3", "1"], &[0.0]);
        for duty in ["2/3", "1"] {
            let c = cell(&cfg, duty);
            for trial in 0..30 {
                let (a, b, drift) = c.trial_setup(1, trial);
                let expected = first_rendezvous(&a, &b, drift, cfg.run.horizon.unwrap());
                assert_eq!(c.run_pair(1, trial).unwrap().first_rendezvous, expected);
            }
        }
    }

    #[test]
    fn permanently_busy_channels_censor() {
        let cfg = small("jumpstay", 3, &["1"], &[0.0]);
        let c = cell(&cfg, "1");
        let (a, b, drift) = c.trial_setup(0, 0);
        let mut blocked = ChannelAvailability::from_traces(vec![Some(vec![false; 5000]); 5]);
        let out = scan_pair(&a, &b, drift, &mut blocked, 5000, 100);
        assert_eq!(out.first_rendezvous, None);
        assert!(out.channels.is_empty());
    }

    #[test]
    fn traffic_only_delays_rendezvous() {
        let cfg = small("jumpstay", 3, &["2/3"], &[0.0]);
        let c = cell(&cfg, "2/3");
        let busy = PuTrafficConfig::new(4, 1, 3.0).unwrap();
        let (mut free_sum, mut busy_sum) = (0u64, 0u64);
        for trial in 0..1000 {
            let free = c.run_pair(0, trial).unwrap();
            let blocked = c.run_pair_with(0, trial, &busy).unwrap();
            let (f, b) = (free.first_rendezvous.unwrap(), blocked.first_rendezvous.unwrap());
            assert!(b >= f, "trial {trial}: {b} < {f}");
            assert!(blocked.channels.len() <= free.channels.len());
            free_sum += f;
            busy_sum += b;
        }
        assert!(busy_sum >= free_sum);
    }

    #[test]
    fn full_duty_cell_is_the_base_protocol() {
        let cfg = small("jumpstay", 3, &["1"], &[0.0]);
        let result = sweep(&cfg).unwrap();
        let row = &result.rows[0];
        assert_eq!(row.status, CellStatus::Ok);
        assert_eq!(row.schedule, None);
        assert_eq!(row.mttr_bound, Some(15));
        // Without traffic the pure base never misses its period.
        assert!(matches!(row.mttr_observed, Some(Ttr::Finite(m)) if m < 15));
        let c = cell(&cfg, "1");
        let (a, _, _) = c.trial_setup(0, 0);
        assert_eq!(a.take(15), ProtocolKind::JumpStay.sequence(ChannelSet::new(5).unwrap(), pair_nodes(0).0, 0).take(15));
    }

    #[test]
    fn unpaddable_cells_are_skipped() {
        // Jump-Stay periods are multiples of 3, so A = 3 never pads.
        let cfg = small("jumpstay", 4, &["3/4", "1"], &[0.25]);
        let result = sweep(&cfg).unwrap();
        assert_eq!(result.rows[0].status, CellStatus::Skipped);
        assert!(result.rows[0].skip_reason.as_deref().unwrap().contains("coprime"));
        assert_eq!(result.rows[1].status, CellStatus::Ok);
    }

    #[test]
    fn sweeps_are_deterministic() {
        let cfg = small("crseq", 3, &["2/3", "1"], &[0.25, 0.5]);
        let (r1, r2) = (sweep(&cfg).unwrap(), sweep(&cfg).unwrap());
        assert_eq!(r1.rows.len(), 4);
        assert_eq!(r1.to_csv(), r2.to_csv());
        assert_eq!(r1.to_json(), r2.to_json());
        let other = ExperimentConfig { seed: 6, ..cfg.clone() };
        assert_ne!(config_hash(&cfg), config_hash(&other));
        assert_ne!(sweep(&other).unwrap().to_csv(), r1.to_csv());
    }

    #[test]
    fn writes_hash_named_files() {
        let cfg = small("crseq", 3, &["1"], &[0.25]);
        let result = sweep(&cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let paths = result.write(dir.path(), "sweep", &[OutputFormat::Csv, OutputFormat::Json]).unwrap();
        assert_eq!(paths.len(), 2);
        assert!(paths[0].file_name().unwrap().to_str().unwrap().contains(&result.config_hash));
        let csv = fs::read_to_string(&paths[0]).unwrap();
        assert_eq!(csv.lines().count(), 2);
        assert!(csv.starts_with("cell,base,duty,"));
        let back: ExperimentResult = serde_json::from_str(&fs::read_to_string(&paths[1]).unwrap()).unwrap();
        assert_eq!(back.rows, result.rows);
    }
}
