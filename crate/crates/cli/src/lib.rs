// SPDX-License-Identifier: Apache-2.0

//! `coop-sdn` command implementations.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::Context as _;
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use coop_sdn_core::scenario::{presets, ConfigError, LoadError, MetricsFormat, ProfileConfig, TransportMode};
use coop_sdn_core::sim::{
    summarize, timeline, to_csv, InMemoryTransport, MetricRecord, MetricSummary, RunOutput, Scenario, Simulation,
    Transport, UdpTransport,
};
use coop_sdn_core::ScenarioConfig;

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_IO: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "coop-sdn", version, about = "Cooperative SDN attack-blocking simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a scenario file without running it.
    Validate { path: PathBuf },
    /// Run trials and write metrics.
    Run(RunArgs),
    /// Print the workflow timeline of one trial.
    Trace(TraceArgs),
}

#[derive(Debug, Clone, Args)]
#[group(required = true, multiple = false)]
pub struct Source {
    /// Embedded scenario preset.
    #[arg(long, value_name = "NAME")]
    pub preset: Option<String>,
    /// Scenario file.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProfileArg {
    Geni,
    Hardware,
    Zero,
}

impl ProfileArg {
    fn name(self) -> &'static str {
        match self {
            ProfileArg::Geni => "geni",
            ProfileArg::Hardware => "hardware",
            ProfileArg::Zero => "zero",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Csv,
    Structured,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TransportArg {
    Memory,
    Udp,
}

#[derive(Debug, Clone, Args)]
pub struct Overrides {
    #[command(flatten)]
    pub source: Source,
    /// Replace the scenario's latency profile.
    #[arg(long, value_enum)]
    pub profile: Option<ProfileArg>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub transport: Option<TransportArg>,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub common: Overrides,
    #[arg(long)]
    pub trials: Option<u32>,
    /// Metrics file; printed to stdout when absent.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
    /// Directory for one trace file per trial.
    #[arg(long, value_name = "PATH")]
    pub trace_dir: Option<PathBuf>,
    /// Run trials on worker threads.
    #[arg(long)]
    pub parallel: bool,
}

#[derive(Debug, Clone, Args)]
pub struct TraceArgs {
    #[command(flatten)]
    pub common: Overrides,
    #[arg(long, default_value_t = 0)]
    pub trial: u32,
    /// Print every trace record instead of the milestones.
    #[arg(long)]
    pub full: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{}", render_errors(.0))]
    Validation(Vec<ConfigError>),
    #[error("{0}")]
    Io(String),
    #[error("{0:#}")]
    Runtime(anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => EXIT_VALIDATION,
            CliError::Io(_) => EXIT_IO,
            CliError::Runtime(_) => EXIT_RUNTIME,
        }
    }
}

fn render_errors(errors: &[ConfigError]) -> String {
    errors.iter().map(|e| format!("error: {e}")).collect::<Vec<_>>().join("\n")
}

impl From<LoadError> for CliError {
    fn from(e: LoadError) -> Self {
        match e {
            LoadError::Io { .. } => CliError::Io(e.to_string()),
            LoadError::Parse(err) => CliError::Validation(vec![err]),
        }
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn main_with<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
            let rendered = e.render().to_string();
            if e.use_stderr() {
                let _ = write!(stderr, "{rendered}");
            } else {
                let _ = write!(stdout, "{rendered}");
            }
            return code;
        }
    };
    match execute(&cli.command, stdout, stderr) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(stderr, "{e}");
            e.exit_code()
        }
    }
}

pub fn execute(command: &Command, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<(), CliError> {
    match command {
        Command::Validate { path } => cmd_validate(path, stdout),
        Command::Run(args) => cmd_run(args, stdout, stderr),
        Command::Trace(args) => cmd_trace(args, stdout),
    }
}

pub fn cmd_validate(path: &Path, stdout: &mut dyn Write) -> Result<(), CliError> {
    let cfg = ScenarioConfig::load(path)?;
    cfg.validate().map_err(CliError::Validation)?;
    let _ = writeln!(stdout, "{}: ok", path.display());
    Ok(())
}

fn load(common: &Overrides) -> Result<(String, ScenarioConfig), CliError> {
    let (label, mut cfg) = match (&common.source.preset, &common.source.config) {
        (Some(name), _) => {
            let cfg = presets::scenario(name).ok_or_else(|| {
                CliError::Validation(vec![ConfigError::new(
                    "--preset",
                    format!("unknown preset `{name}` (known: {})", presets::SCENARIOS.join(", ")),
                )])
            })?;
            (name.clone(), cfg)
        }
        (None, Some(path)) => {
            let cfg = ScenarioConfig::load(path)?;
            let label = cfg.name.clone().unwrap_or_else(|| path.display().to_string());
            (label, cfg)
        }
        (None, None) => unreachable!("clap requires a source"),
    };
    if let Some(profile) = common.profile {
        cfg.profile = ProfileConfig::Preset(profile.name().into());
    }
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    match common.transport {
        Some(TransportArg::Memory) => cfg.transport.mode = TransportMode::Memory,
        Some(TransportArg::Udp) => cfg.transport.mode = TransportMode::Udp,
        None => {}
    }
    Ok((label, cfg))
}

fn run_trial(scenario: &Scenario, cfg: &ScenarioConfig, trial: u32) -> anyhow::Result<RunOutput> {
    let seed = cfg.seed.wrapping_add(u64::from(trial));
    let transport: Box<dyn Transport> = match cfg.transport.mode {
        TransportMode::Memory => Box::new(InMemoryTransport),
        TransportMode::Udp => Box::new(UdpTransport::new(cfg.transport.base_port)),
    };
    let sim = Simulation::new(scenario, seed)?.with_transport(transport);
    sim.run(trial).with_context(|| format!("trial {trial} (seed {seed})"))
}

#[derive(Serialize)]
struct StructuredRecord {
    name: String,
    trial: u32,
    value_ms: f64,
}

#[derive(Serialize)]
struct StructuredReport<'a> {
    scenario: &'a str,
    profile: &'a str,
    seed: u64,
    trials: u32,
    summary: &'a [MetricSummary],
    records: Vec<StructuredRecord>,
}

pub fn render_metrics(
    format: MetricsFormat,
    label: &str,
    profile: &str,
    seed: u64,
    trials: u32,
    records: &[MetricRecord],
) -> String {
    match format {
        MetricsFormat::Csv => to_csv(records),
        MetricsFormat::Structured => {
            let summary = summarize(records);
            let report = StructuredReport {
                scenario: label,
                profile,
                seed,
                trials,
                summary: &summary,
                records: records
                    .iter()
                    .map(|r| StructuredRecord { name: r.name.to_string(), trial: r.trial, value_ms: r.value_ms() })
                    .collect(),
            };
            serde_yaml::to_string(&report).expect("reports serialize")
        }
    }
}

pub fn cmd_run(args: &RunArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<(), CliError> {
    let (label, mut cfg) = load(&args.common)?;
    if let Some(trials) = args.trials {
        cfg.trials = trials;
    }
    if let Some(format) = args.format {
        cfg.outputs.format = match format {
            FormatArg::Csv => MetricsFormat::Csv,
            FormatArg::Structured => MetricsFormat::Structured,
        };
    }
    if args.out.is_some() {
        cfg.outputs.metrics = args.out.clone();
    }
    if args.trace_dir.is_some() {
        cfg.outputs.trace_dir = args.trace_dir.clone();
    }
    let scenario = cfg.compile().map_err(CliError::Validation)?;
    if args.parallel && cfg.transport.mode == TransportMode::Udp && cfg.transport.base_port != 0 {
        return Err(CliError::Validation(vec![ConfigError::new(
            "transport.base_port",
            "parallel UDP trials need ephemeral ports (base_port: 0)",
        )]));
    }

    log::info!("running {} trial(s) of {label} with profile {}", cfg.trials, scenario.profile.name);
    let outputs: Vec<RunOutput> = if args.parallel {
        (0..cfg.trials).into_par_iter().map(|t| run_trial(&scenario, &cfg, t)).collect::<Result<_, _>>()
    } else {
        (0..cfg.trials).map(|t| run_trial(&scenario, &cfg, t)).collect::<Result<_, _>>()
    }
    .map_err(CliError::Runtime)?;

    if let Some(dir) = &cfg.outputs.trace_dir {
        fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;
        for (trial, out) in outputs.iter().enumerate() {
            write_file(&dir.join(format!("trial-{trial}.trace")), &out.trace.export())?;
        }
    }

    let records: Vec<MetricRecord> = outputs.iter().flat_map(|o| o.metrics.iter().copied()).collect();
    let rendered =
        render_metrics(cfg.outputs.format, &label, &scenario.profile.name, cfg.seed, cfg.trials, &records);
    let summary_sink: &mut dyn Write = match &cfg.outputs.metrics {
        Some(path) => {
            write_file(path, &rendered)?;
            stdout
        }
        None => {
            let _ = write!(stdout, "{rendered}");
            stderr
        }
    };
    let _ = writeln!(summary_sink, "{label}: {} trial(s), profile {}", cfg.trials, scenario.profile.name);
    for s in summarize(&records) {
        let _ = writeln!(summary_sink, "  {:<18} mean {:>10.3} ms  (n={})", s.name.as_str(), s.mean_ms, s.count);
    }
    Ok(())
}

pub fn cmd_trace(args: &TraceArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let (label, cfg) = load(&args.common)?;
    let scenario = cfg.compile().map_err(CliError::Validation)?;
    let out = run_trial(&scenario, &cfg, args.trial).map_err(CliError::Runtime)?;
    if args.full {
        let _ = write!(stdout, "{}", out.trace.export());
        return Ok(());
    }
    let _ = writeln!(
        stdout,
        "{label} trial {} (seed {}), profile {}",
        args.trial,
        cfg.seed.wrapping_add(u64::from(args.trial)),
        scenario.profile.name
    );
    for entry in timeline(&out.trace, &out.local_switches) {
        let _ = writeln!(stdout, "{entry}");
    }
    Ok(())
}
