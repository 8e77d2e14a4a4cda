//! `swipt-sim`: run outage estimates, sweeps, `M` searches and policy
//! comparisons, and replay traces.
//!
//! Exit status is 0 on success, 1 for invalid input or I/O failures and 2
//! when the simulator trips an internal invariant.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use swipt_core::{ConfigError, Harness, SimError, SlotTrace, TrialOptions};

pub mod output;
pub mod settings;

use output::{Manifest, OutputFormat, Table, Written};
use settings::{Mode, Settings};

/// Environment variable overriding the default output directory.
pub const OUT_DIR_ENV: &str = "SWIPT_OUT_DIR";
pub const DEFAULT_OUT_DIR: &str = "results";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{key}: {reason}")]
    Invalid { key: String, reason: String },
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Sim(SimError),
    #[error("trace diverges from its replay at slot {0}")]
    Diverged(usize),
}

impl CliError {
    pub fn invalid(key: &str, reason: impl Into<String>) -> Self {
        CliError::Invalid { key: key.to_string(), reason: reason.into() }
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.to_path_buf(), source }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Sim(SimError::Invariant { .. }) => 2,
            _ => 1,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Invalid { key: e.key.to_string(), reason: e.reason }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Config(c) => c.into(),
            other => CliError::Sim(other),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "swipt-sim", version, about = "Energy-harvesting relay selection outage simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate the outage probability of one scenario.
    Run {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[command(flatten)]
        output: OutputArgs,
        /// Write a per-slot trace of trial 0 to this file.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Estimate outage over a grid of rates, efficiencies, relay counts and M.
    Sweep {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[command(flatten)]
        output: OutputArgs,
        /// Comma-separated target rates.
        #[arg(long)]
        rates: Option<String>,
        #[arg(long)]
        etas: Option<String>,
        #[arg(long)]
        ns: Option<String>,
        /// Comma-separated MRS pre-selection sizes.
        #[arg(long)]
        ms: Option<String>,
        /// Give every grid point its own gain stream.
        #[arg(long)]
        no_crn: bool,
    },
    /// Find the MRS pre-selection size with the lowest outage.
    #[command(name = "opt-m")]
    OptM {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[command(flatten)]
        output: OutputArgs,
        /// Candidate sizes; defaults to 1..=n.
        #[arg(long)]
        ms: Option<String>,
    },
    /// Compare SRS, MRS with M = 1 and MRS with the best M over a rate grid.
    Compare {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[command(flatten)]
        output: OutputArgs,
        #[arg(long, default_value = "0.25,0.5,1,1.5,2,2.5,3")]
        rates: String,
    },
    /// Recompute a trace from its recorded gains and check it matches.
    Replay { trace: PathBuf },
    /// Re-run the command recorded in a manifest.
    Rerun {
        manifest: PathBuf,
        /// Output directory; defaults to the one recorded in the manifest.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Default, Args)]
pub struct ScenarioArgs {
    /// Flat `key = value` config file; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// srs or mrs.
    #[arg(long)]
    pub policy: Option<String>,
    /// Number of relays.
    #[arg(long)]
    pub n: Option<String>,
    /// MRS pre-selection size.
    #[arg(long)]
    pub m: Option<String>,
    /// Energy conversion efficiency in [0, 1].
    #[arg(long)]
    pub eta: Option<String>,
    /// Target rate, bits/s/Hz.
    #[arg(long)]
    pub rate: Option<String>,
    /// Source transmit power, dBW.
    #[arg(long)]
    pub ps_dbw: Option<String>,
    /// Fixed SRS relay transmit power, dBW.
    #[arg(long)]
    pub pr_dbw: Option<String>,
    /// Noise variance, watts.
    #[arg(long)]
    pub sigma2: Option<String>,
    /// Hop distance, metres.
    #[arg(long)]
    pub distance: Option<String>,
    /// Slot length, seconds.
    #[arg(long)]
    pub slot_duration: Option<String>,
    /// Starting battery per relay in joules, or `auto` for 10·P_r·T.
    #[arg(long)]
    pub initial_energy: Option<String>,
    /// Received energy below this is not harvested, joules.
    #[arg(long)]
    pub sense_threshold: Option<String>,
    /// Messages per trial.
    #[arg(long)]
    pub messages: Option<String>,
    /// Leading messages per trial left out of the count.
    #[arg(long)]
    pub warmup: Option<String>,
    /// Independent trials per estimate.
    #[arg(long)]
    pub trials: Option<String>,
    /// Base RNG seed.
    #[arg(long)]
    pub seed: Option<String>,
    /// pipelined or framed.
    #[arg(long)]
    pub schedule: Option<String>,
}

impl ScenarioArgs {
    fn pairs(&self) -> Vec<(&'static str, &Option<String>)> {
        vec![
            ("policy", &self.policy),
            ("n", &self.n),
            ("m", &self.m),
            ("eta", &self.eta),
            ("rate", &self.rate),
            ("ps_dbw", &self.ps_dbw),
            ("pr_dbw", &self.pr_dbw),
            ("sigma2", &self.sigma2),
            ("distance", &self.distance),
            ("slot_duration", &self.slot_duration),
            ("initial_energy", &self.initial_energy),
            ("sense_threshold", &self.sense_threshold),
            ("messages", &self.messages),
            ("warmup", &self.warmup),
            ("trials", &self.trials),
            ("seed", &self.seed),
            ("schedule", &self.schedule),
        ]
    }

    /// Config file first, then flags.
    pub fn settings(&self, extra: &[(&'static str, Option<String>)]) -> Result<Settings, CliError> {
        let mut s = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
                Settings::parse(&text)?
            }
            None => Settings::default(),
        };
        let mut flags = Settings::default();
        for (k, v) in self.pairs() {
            if let Some(v) = v {
                flags.set(k, v.clone())?;
            }
        }
        for (k, v) in extra {
            if let Some(v) = v {
                flags.set(k, v.clone())?;
            }
        }
        s.merge(flags);
        Ok(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Csv,
    Json,
}

#[derive(Debug, Clone, Default, Args)]
pub struct OutputArgs {
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Option<FormatArg>,
    /// Output directory (default: $SWIPT_OUT_DIR or ./results).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// File stem for outputs; defaults to the command name.
    #[arg(long)]
    pub name: Option<String>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    pub threads: Option<usize>,
    /// Normal quantile for confidence intervals.
    #[arg(long, default_value_t = 3.0)]
    pub z: f64,
}

impl OutputArgs {
    fn out_dir(&self) -> PathBuf {
        self.out
            .clone()
            .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
    }

    fn harness(&self) -> Result<Harness, CliError> {
        if !(self.z.is_finite() && self.z > 0.0) {
            return Err(CliError::invalid("z", format!("must be positive, got {}", self.z)));
        }
        Ok(Harness { threads: self.threads, z: self.z })
    }

    fn format(&self) -> OutputFormat {
        match self.format.unwrap_or(FormatArg::Csv) {
            FormatArg::Csv => OutputFormat::Csv,
            FormatArg::Json => OutputFormat::Json,
        }
    }
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(lines) => {
            for l in lines {
                println!("{l}");
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Runs one command and returns the summary lines it would print.
pub fn execute(command: Command) -> Result<Vec<String>, CliError> {
    match command {
        Command::Run { scenario, output, trace } => {
            let settings = scenario.settings(&[])?;
            let mut lines = dispatch(Mode::Run, &settings, &output)?;
            if let Some(path) = trace {
                let cfg = settings.scenario(Mode::Run)?;
                let run = swipt_core::run_trial_with(&cfg, 0, TrialOptions { audit: true, trace: true })?;
                let file = std::fs::File::create(&path).map_err(|e| CliError::io(&path, e))?;
                run.trace
                    .expect("trace requested")
                    .write_jsonl(std::io::BufWriter::new(file))
                    .map_err(|e| CliError::io(&path, e))?;
                lines.push(format!("trace: {}", path.display()));
            }
            Ok(lines)
        }
        Command::Sweep { scenario, output, rates, etas, ns, ms, no_crn } => {
            let crn = no_crn.then(|| "false".to_string());
            let settings =
                scenario.settings(&[("rates", rates), ("etas", etas), ("ns", ns), ("ms", ms), ("crn", crn)])?;
            dispatch(Mode::Sweep, &settings, &output)
        }
        Command::OptM { scenario, output, ms } => {
            let settings = scenario.settings(&[("ms", ms)])?;
            dispatch(Mode::OptM, &settings, &output)
        }
        Command::Compare { scenario, output, rates } => {
            let settings = scenario.settings(&[("rates", Some(rates))])?;
            dispatch(Mode::Compare, &settings, &output)
        }
        Command::Replay { trace } => {
            let file = std::fs::File::open(&trace).map_err(|e| CliError::io(&trace, e))?;
            let t = SlotTrace::read_jsonl(std::io::BufReader::new(file))?;
            match swipt_core::replay_check(&t) {
                swipt_core::ReplayVerdict::Match => Ok(vec![format!("replay ok: {} slots", t.records.len())]),
                swipt_core::ReplayVerdict::Diverged { slot } => Err(CliError::Diverged(slot)),
            }
        }
        Command::Rerun { manifest, out } => {
            let text = std::fs::read_to_string(&manifest).map_err(|e| CliError::io(&manifest, e))?;
            let m = Manifest::from_json(&text)?;
            let mode = m.mode()?;
            let settings = Settings::from_map(m.settings.clone())?;
            let output = OutputArgs {
                format: Some(if m.format == "json" { FormatArg::Json } else { FormatArg::Csv }),
                out: Some(out.unwrap_or_else(|| PathBuf::from(&m.out_dir))),
                name: Some(m.name.clone()),
                threads: m.threads,
                z: m.z,
            };
            dispatch(mode, &settings, &output)
        }
    }
}

fn dispatch(mode: Mode, settings: &Settings, output: &OutputArgs) -> Result<Vec<String>, CliError> {
    let harness = output.harness()?;
    let (table, resolved) = match mode {
        Mode::Run => {
            let cfg = settings.scenario(mode)?;
            let estimate = harness.estimate(&cfg)?;
            let resolved = to_json(&cfg);
            (Table::Points(vec![swipt_core::SweepPoint { config: cfg, estimate }]), resolved)
        }
        Mode::Sweep => {
            let spec = settings.sweep_spec()?;
            (Table::Points(harness.sweep(&spec)?), to_json(&spec))
        }
        Mode::OptM => {
            let cfg = settings.scenario(mode)?;
            let ms = settings.ms()?.unwrap_or_else(|| (1..=cfg.n_relays).collect());
            (Table::Search(harness.optimize_m(&cfg, &ms)?), to_json(&cfg))
        }
        Mode::Compare => {
            let cfg = settings.scenario(mode)?;
            let rates = settings.rates()?.expect("compare always sets rates");
            (Table::Comparison(harness.compare(&cfg, &rates)?), to_json(&cfg))
        }
    };
    let manifest = Manifest::new(mode, settings, output, &output.out_dir(), resolved);
    let written: Written = table.write(manifest, output.format())?;
    Ok(written.summary)
}

fn to_json<T: serde::Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).expect("plain data serialises")
}
