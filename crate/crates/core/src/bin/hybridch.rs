//! `hybridch` command-line front end.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 configuration error, 3
//! infeasible or non-discovering schedule. The resolved configuration of
//! every run is printed to stderr before it starts.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use hybridch::config::{Duty, ExperimentConfig, Levels};
use hybridch::dump::SequenceDump;
use hybridch::interleave::{AliasPolicy, HybridProtocol, InterleaveError};
use hybridch::metrics::{self, MetricReport};
use hybridch::protocols::detect_period;
use hybridch::simulator::{self, ExperimentResult, OutputFormat, SimulationError};
use hybridch::wakeup::{self, WakeupError};
use hybridch::{ChannelSet, ChSequence, NodeId, ProtocolKind, RandomPolicy, WakeUpSchedule};

#[derive(Debug, Parser, Serialize)]
#[command(name = "hybridch", version, about = "Hybrid channel-hopping rendezvous toolkit")]
struct Cli {
    /// Master seed for every random draw.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file (gen-seq, gen-schedule, metrics) or results directory
    /// (simulate, sweep).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Format {
    Csv,
    Json,
}

impl From<Format> for OutputFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => OutputFormat::Csv,
            Format::Json => OutputFormat::Json,
        }
    }
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Command {
    /// Dump a node's channel-hopping sequence.
    GenSeq(GenSeq),
    /// Generate a self-discovering wake-up schedule.
    GenSchedule(GenSchedule),
    /// Check a wake-up schedule's discovery property or a sequence dump's period.
    Verify(Verify),
    /// MTTR, ATTR and diversity rate of a node pair.
    Metrics(Metrics),
    /// Run one duty cycle at one PU intensity.
    Simulate(Simulate),
    /// Run the duty cycle x PU intensity grid.
    Sweep(Sweep),
}

/// The hopping protocol of a node: a base protocol, optionally
/// interleaved with random hopping through a wake-up schedule.
#[derive(Debug, Args, Serialize)]
struct ProtocolArgs {
    /// Base protocol: random, crseq, jumpstay or modular.
    #[arg(long, value_parser = parse_protocol)]
    base: ProtocolKind,
    /// Number of channels `N`.
    #[arg(long)]
    n: u32,
    /// Wake-up duty cycle `a/b`; needs `--period`.
    #[arg(long, value_parser = parse_duty, requires = "period", conflicts_with = "schedule_file")]
    duty: Option<Duty>,
    /// Wake-up schedule period `T`.
    #[arg(long, requires = "duty")]
    period: Option<usize>,
    /// File holding one line of 0/1 schedule bits.
    #[arg(long)]
    schedule_file: Option<PathBuf>,
    /// Asleep slots never rendezvous (worst-case analysis).
    #[arg(long)]
    adversarial: bool,
    /// Alias channels introduced by padding resolve per protocol (`bound`)
    /// or per emission (`fresh`).
    #[arg(long, value_enum, default_value = "bound")]
    alias: AliasArg,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum AliasArg {
    Bound,
    Fresh,
}

#[derive(Debug, Args, Serialize)]
struct GenSeq {
    #[command(flatten)]
    protocol: ProtocolArgs,
    /// Node ID (at least 1).
    #[arg(long, default_value_t = 1)]
    id: u64,
    /// Number of slots to dump.
    #[arg(long)]
    slots: u64,
}

#[derive(Debug, Args, Serialize)]
struct GenSchedule {
    #[arg(long)]
    period: usize,
    #[arg(long, value_parser = parse_duty)]
    duty: Duty,
}

#[derive(Debug, Args, Serialize)]
#[command(group = clap::ArgGroup::new("subject").required(true).args(["schedule_file", "schedule", "sequence_file"]))]
struct Verify {
    /// File holding one line of 0/1 schedule bits.
    #[arg(long)]
    schedule_file: Option<PathBuf>,
    /// Schedule bits given inline, e.g. `11101000`.
    #[arg(long)]
    schedule: Option<String>,
    /// Second schedule to check against (defaults to the first).
    #[arg(long)]
    peer_file: Option<PathBuf>,
    /// A `gen-seq` dump whose header period is re-detected.
    #[arg(long)]
    sequence_file: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct Metrics {
    #[command(flatten)]
    protocol: ProtocolArgs,
    #[arg(long, default_value_t = 1)]
    id_a: u64,
    #[arg(long, default_value_t = 2)]
    id_b: u64,
    /// Monte Carlo trials for ATTR when the pair hops randomly.
    #[arg(long, default_value_t = 10_000)]
    trials: u64,
    /// Slots scanned per drift or trial.
    #[arg(long)]
    horizon: Option<u64>,
}

#[derive(Debug, Args, Serialize)]
struct ExperimentArgs {
    /// TOML experiment configuration; defaults apply to missing keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides `protocol.base`.
    #[arg(long, value_parser = parse_protocol)]
    base: Option<ProtocolKind>,
    /// Trials per node pair.
    #[arg(long)]
    trials: Option<u64>,
    /// Overrides `network.pairs`.
    #[arg(long)]
    pairs: Option<u32>,
}

#[derive(Debug, Args, Serialize)]
struct Simulate {
    #[command(flatten)]
    experiment: ExperimentArgs,
    /// Duty cycle of the single cell (default: the first configured).
    #[arg(long, value_parser = parse_duty)]
    duty: Option<Duty>,
    /// PU intensity of the single cell (default: the first configured).
    #[arg(long)]
    intensity: Option<f64>,
}

#[derive(Debug, Args, Serialize)]
struct Sweep {
    #[command(flatten)]
    experiment: ExperimentArgs,
}

fn parse_protocol(s: &str) -> Result<ProtocolKind, String> {
    s.parse().map_err(|e: hybridch::protocols::ProtocolError| e.to_string())
}

fn parse_duty(s: &str) -> Result<Duty, String> {
    s.parse()
}

/// Failure classes, one per exit code.
#[derive(Debug)]
enum Failure {
    Io(String),
    Config(String),
    Infeasible(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Io(_) => 1,
            Failure::Config(_) => 2,
            Failure::Infeasible(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Io(m) | Failure::Config(m) | Failure::Infeasible(m) => m,
        }
    }
}

impl From<WakeupError> for Failure {
    fn from(e: WakeupError) -> Self {
        match e {
            WakeupError::Infeasible { .. } => Failure::Infeasible(e.to_string()),
            other => Failure::Config(other.to_string()),
        }
    }
}

impl From<InterleaveError> for Failure {
    fn from(e: InterleaveError) -> Self {
        match e {
            InterleaveError::NoDiscovery { .. } => Failure::Infeasible(e.to_string()),
            other => Failure::Config(other.to_string()),
        }
    }
}

impl From<SimulationError> for Failure {
    fn from(e: SimulationError) -> Self {
        match e {
            SimulationError::Io { .. } => Failure::Io(e.to_string()),
            other => Failure::Config(other.to_string()),
        }
    }
}

fn config_error(e: impl std::fmt::Display) -> Failure {
    Failure::Config(e.to_string())
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| Failure::Io(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn announce<T: Serialize>(resolved: &T) {
    let text = toml::to_string(resolved).unwrap_or_else(|e| format!("# unprintable configuration: {e}\n"));
    eprintln!("# resolved configuration");
    for line in text.lines() {
        eprintln!("#   {line}");
    }
}

fn load_schedule(path: &Path) -> Result<WakeUpSchedule, Failure> {
    read(path)?.parse().map_err(config_error)
}

impl ProtocolArgs {
    fn channels(&self) -> Result<ChannelSet, Failure> {
        ChannelSet::new(self.n).map_err(config_error)
    }

    fn schedule(&self) -> Result<Option<WakeUpSchedule>, Failure> {
        if let Some(path) = &self.schedule_file {
            return load_schedule(path).map(Some);
        }
        match (self.duty, self.period) {
            (Some(duty), Some(period)) => Ok(Some(wakeup::generate_schedule(period, duty.0)?)),
            _ => Ok(None),
        }
    }

    fn policy(&self) -> RandomPolicy {
        if self.adversarial {
            RandomPolicy::Adversarial
        } else {
            RandomPolicy::Uniform
        }
    }

    /// The node's sequence and, for a hybrid, its protocol.
    fn build(&self, id: u64, seed: u64) -> Result<(ChSequence, Option<HybridProtocol>), Failure> {
        let channels = self.channels()?;
        let node = NodeId::new(id).map_err(config_error)?;
        match self.schedule()? {
            None => Ok((self.base.sequence(channels, node, seed).with_policy(self.policy()), None)),
            Some(schedule) => {
                if !schedule.discovers_itself() {
                    return Err(Failure::Infeasible(format!("schedule {schedule} does not discover itself")));
                }
                let alias = match self.alias {
                    AliasArg::Bound => AliasPolicy::Bound,
                    AliasArg::Fresh => AliasPolicy::Fresh,
                };
                let h = HybridProtocol::new(self.base, channels, node, schedule, seed)?
                    .with_random_policy(self.policy())
                    .with_alias_policy(alias);
                Ok((h.sequence(), Some(h)))
            }
        }
    }
}

fn gen_seq(cli: &Cli, args: &GenSeq) -> Result<(), Failure> {
    let seed = cli.seed.unwrap_or(0);
    let (seq, hybrid) = args.protocol.build(args.id, seed)?;
    #[derive(Serialize)]
    struct Resolved<'a> {
        seed: u64,
        id: u64,
        slots: u64,
        base: ProtocolKind,
        n: u32,
        schedule: Option<String>,
        padded_n: Option<u32>,
        random_policy: RandomPolicy,
        out: Option<&'a Path>,
    }
    announce(&Resolved {
        seed,
        id: args.id,
        slots: args.slots,
        base: args.protocol.base,
        n: args.protocol.n,
        schedule: hybrid.as_ref().map(|h| h.schedule.to_string()),
        padded_n: hybrid.as_ref().map(|h| h.padded.padded.n()),
        random_policy: args.protocol.policy(),
        out: cli.out.as_deref(),
    });
    emit(cli.out.as_deref(), &SequenceDump::capture(&seq, args.slots).render())
}

fn gen_schedule(cli: &Cli, args: &GenSchedule) -> Result<(), Failure> {
    announce(&args);
    let x = wakeup::generate_schedule(args.period, args.duty.0)?;
    emit(cli.out.as_deref(), &format!("{x}\n"))
}

fn verify(cli: &Cli, args: &Verify) -> Result<(), Failure> {
    announce(&args);
    if let Some(path) = &args.sequence_file {
        let dump = SequenceDump::parse(&read(path)?).map_err(config_error)?;
        let seq = dump.to_sequence().ok_or_else(|| config_error("sequence dump has no slots"))?;
        // Only periods seen at least twice in the dump count as detected.
        let detected = detect_period(&seq, dump.channels.len() as u64 / 2);
        let show = |p: Option<u64>| p.map_or("none".to_string(), |p| p.to_string());
        let text = format!("declared period: {}\ndetected period: {}\n", show(dump.period), show(detected));
        emit(cli.out.as_deref(), &text)?;
        return match dump.period {
            Some(p) if detected != Some(p) => Err(Failure::Config(format!(
                "declared period {p} but detected {}",
                show(detected)
            ))),
            _ => Ok(()),
        };
    }
    let x = match (&args.schedule_file, &args.schedule) {
        (Some(path), _) => load_schedule(path)?,
        (None, Some(bits)) => bits.parse().map_err(config_error)?,
        (None, None) => unreachable!("clap requires a subject"),
    };
    let y = match &args.peer_file {
        Some(path) => load_schedule(path)?,
        None => x.clone(),
    };
    let Some(cert) = wakeup::verify_discovery(&x, &y) else {
        return Err(Failure::Infeasible(format!("{x} and {y} miss each other under some rotation")));
    };
    let mut text = format!(
        "schedule: {x}\npeer: {y}\nduty cycle: {}\nrotations checked: {}\nstatus: ok\n",
        x.duty_cycle(),
        cert.horizon()
    );
    text.push_str("rotation\tfirst_overlap\toverlap_count\n");
    for (k, (w, b)) in cert.witnesses.iter().zip(&cert.overlaps).enumerate() {
        text.push_str(&format!("{k}\t{w}\t{b}\n"));
    }
    emit(cli.out.as_deref(), &text)
}

fn run_metrics(cli: &Cli, args: &Metrics) -> Result<(), Failure> {
    let seed = cli.seed.unwrap_or(0);
    let p = &args.protocol;
    let (a, ha) = p.build(args.id_a, hybridch::rng::derive_seed(seed, &[0]))?;
    let (b, _) = p.build(args.id_b, hybridch::rng::derive_seed(seed, &[1]))?;
    let channels = p.channels()?;
    let bound = match &ha {
        Some(h) => h.ttr_bound(),
        None => p.base.period(channels),
    };
    let window = bound.unwrap_or(channels.n() as u64);
    let horizon = args
        .horizon
        .unwrap_or_else(|| bound.map_or(10_000, |b| (b * 8).max(10_000)));
    let format = cli.format.unwrap_or(Format::Json);
    #[derive(Serialize)]
    struct Resolved<'a> {
        seed: u64,
        base: ProtocolKind,
        n: u32,
        id_a: u64,
        id_b: u64,
        schedule: Option<String>,
        padded_n: Option<u32>,
        random_policy: RandomPolicy,
        drift_window: u64,
        horizon: u64,
        trials: u64,
        format: Format,
        out: Option<&'a Path>,
    }
    announce(&Resolved {
        seed,
        base: p.base,
        n: p.n,
        id_a: args.id_a,
        id_b: args.id_b,
        schedule: ha.as_ref().map(|h| h.schedule.to_string()),
        padded_n: ha.as_ref().map(|h| h.padded.padded.n()),
        random_policy: p.policy(),
        drift_window: window,
        horizon,
        trials: args.trials,
        format,
        out: cli.out.as_deref(),
    });
    let drifts: Vec<i64> = (0..window as i64).collect();
    let mut report = MetricReport::exhaustive(&a, &b, &drifts, horizon).map_err(config_error)?;
    if a.kind() == hybridch::SequenceKind::Randomized {
        let make = |id: u64| move |s: u64| p.build(id, s).map(|(seq, _)| seq).expect("built once already");
        let estimate = metrics::attr(make(args.id_a), make(args.id_b), &drifts, args.trials, horizon, seed)
            .map_err(config_error)?;
        report = report.with_attr(&estimate);
    }
    let text = match format {
        Format::Json => serde_json::to_string_pretty(&report).expect("report serializes") + "\n",
        Format::Csv => {
            let mut text = String::from("drift,first_rendezvous,channels\n");
            for o in &report.per_drift {
                let first = o.first_rendezvous.map_or("inf".into(), |t| t.to_string());
                text.push_str(&format!("{},{},{}\n", o.drift, first, o.channels.len()));
            }
            text
        }
    };
    emit(cli.out.as_deref(), &text)
}

impl ExperimentArgs {
    fn load(&self, seed: Option<u64>) -> Result<ExperimentConfig, Failure> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::from_toml(&read(path)?).map_err(config_error)?,
            None => ExperimentConfig::default(),
        };
        if let Some(seed) = seed {
            cfg.seed = seed;
        }
        if let Some(base) = self.base {
            cfg.protocol.base = base;
        }
        if let Some(trials) = self.trials {
            cfg.run.trials_per_pair = trials;
        }
        if let Some(pairs) = self.pairs {
            cfg.network.pairs = pairs;
        }
        Ok(cfg)
    }
}

fn finish(cli: &Cli, stem: &str, result: &ExperimentResult) -> Result<(), Failure> {
    let format = cli.format.unwrap_or(Format::Csv);
    let dir = cli.out.clone().unwrap_or_else(|| PathBuf::from("results"));
    let paths = result.write(&dir, stem, &[OutputFormat::Csv, OutputFormat::Json])?;
    for path in &paths {
        eprintln!("# wrote {}", path.display());
    }
    match format {
        Format::Csv => print!("{}", result.to_csv()),
        Format::Json => print!("{}", result.to_json()),
    }
    Ok(())
}

fn resolve(cfg: ExperimentConfig) -> Result<ExperimentConfig, Failure> {
    let cfg = cfg.resolve().map_err(config_error)?;
    announce(&cfg);
    Ok(cfg)
}

fn simulate(cli: &Cli, args: &Simulate) -> Result<(), Failure> {
    let mut cfg = args.experiment.load(cli.seed)?;
    let duty = match args.duty {
        Some(d) => d,
        None => *cfg.protocol.duty_cycles.first().ok_or_else(|| config_error("no duty cycle configured"))?,
    };
    cfg.protocol.duty_cycles = vec![duty];
    if let Some(p) = args.intensity {
        cfg.pu.intensity = Some(Levels::One(p));
        cfg.pu.idle_mean_slots = None;
    }
    let mut cfg = cfg.resolve().map_err(config_error)?;
    for levels in [&mut cfg.pu.intensity, &mut cfg.pu.idle_mean_slots].into_iter().flatten() {
        *levels = Levels::Many(levels.to_vec().into_iter().take(1).collect());
    }
    let cfg = resolve(cfg)?;
    let result = simulator::sweep(&cfg)?;
    if let Some(reason) = result.rows.first().and_then(|r| r.skip_reason.clone()) {
        return Err(Failure::Infeasible(reason));
    }
    finish(cli, "simulate", &result)
}

fn sweep(cli: &Cli, args: &Sweep) -> Result<(), Failure> {
    let cfg = resolve(args.experiment.load(cli.seed)?)?;
    let result = simulator::sweep(&cfg)?;
    finish(cli, "sweep", &result)
}

fn run(cli: &Cli) -> Result<(), Failure> {
    match &cli.command {
        Command::GenSeq(args) => gen_seq(cli, args),
        Command::GenSchedule(args) => gen_schedule(cli, args),
        Command::Verify(args) => verify(cli, args),
        Command::Metrics(args) => run_metrics(cli, args),
        Command::Simulate(args) => simulate(cli, args),
        Command::Sweep(args) => sweep(cli, args),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {}", failure.message());
            ExitCode::from(failure.code())
        }
    }
}
