//! Experiment runner for `orwalk-core`: named experiments driven by strict
//! JSON configs, with reproducible CSV/JSON artifacts.

pub mod compare;
pub mod config;
pub mod experiments;
pub mod output;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use orwalk_core::parallel;

use crate::config::{ConfigFile, EffectiveConfig, Experiment, Format, Overrides};
use crate::output::ResultFile;

/// Exit codes of the `orwalk` binary.
pub mod exit {
    pub const SUCCESS: i32 = 0;
    pub const CHECK_FAILED: i32 = 1;
    pub const CONFIG: i32 = 2;
    pub const RUNTIME: i32 = 3;
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("runtime error: {0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => exit::CONFIG,
            CliError::Runtime(_) => exit::RUNTIME,
        }
    }
}

impl From<orwalk_core::Error> for CliError {
    fn from(e: orwalk_core::Error) -> Self {
        match e {
            orwalk_core::Error::InvalidArgument(msg) => CliError::Config(msg),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "orwalk", version, about = "Random walks on oriented lattices: experiments and checks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a named experiment.
    Run(RunArgs),
    /// Compare the statistics of two runs.
    Compare {
        run_a: PathBuf,
        run_b: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// One of: simulate, returns, speed, skeleton-check, delta-lemmas,
    /// series-L, series-H, series-O, tail-events, dp-oracle, green-check,
    /// resolvent-check. May be omitted when the config names it.
    pub experiment: Option<String>,
    /// JSON config file; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Environment: alternate, half-plane, random:SEED, periodic:+,-,... or JSON.
    #[arg(long)]
    pub env: Option<String>,
    /// Master seed (default: ORWALK_SEED, else 0).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Comma-separated environment seeds.
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    /// Samples, walkers or graphs, depending on the experiment.
    #[arg(long)]
    pub samples: Option<u64>,
    /// Comma-separated increasing horizons (checkpoints).
    #[arg(long, value_delimiter = ',')]
    pub horizon: Option<Vec<u64>>,
    /// Steps, terms or skeleton length, depending on the experiment.
    #[arg(long)]
    pub n: Option<u64>,
    /// Longest excursion enumerated exhaustively.
    #[arg(long)]
    pub max_len: Option<u64>,
    /// Step cap for a skeleton sample before it is censored.
    #[arg(long)]
    pub cap: Option<u64>,
    /// Tolerance override `name=value`; repeatable.
    #[arg(long = "tol")]
    pub tolerances: Vec<String>,
    /// Graph JSON for resolvent-check.
    #[arg(long)]
    pub graph: Option<PathBuf>,
    /// Worker threads (default: available parallelism); never changes results.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Output directory (default: orwalk-runs/<experiment>).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Data file format: csv or json.
    #[arg(long)]
    pub format: Option<String>,
}

impl RunArgs {
    fn overrides(&self) -> Result<Overrides, CliError> {
        let tolerances = self
            .tolerances
            .iter()
            .map(|t| {
                let (k, v) = t
                    .split_once('=')
                    .ok_or_else(|| CliError::Config(format!("--tol expects name=value, got `{t}`")))?;
                let v: f64 = v
                    .parse()
                    .map_err(|_| CliError::Config(format!("tolerance `{k}` is not a number: `{v}`")))?;
                Ok((k.to_string(), v))
            })
            .collect::<Result<_, CliError>>()?;
        Ok(Overrides {
            env: self.env.clone(),
            seed: self.seed,
            seeds: self.seeds.clone(),
            horizons: self.horizon.clone(),
            n: self.n,
            n_samples: self.samples,
            max_len: self.max_len,
            cap: self.cap,
            tolerances,
            output_dir: self.out.clone(),
            format: self.format.as_deref().map(str::parse::<Format>).transpose()?,
            graph: self.graph.clone(),
        })
    }

    pub fn effective_config(&self) -> Result<EffectiveConfig, CliError> {
        let experiment = self.experiment.as_deref().map(str::parse::<Experiment>).transpose()?;
        let file = match &self.config {
            Some(p) => ConfigFile::load(p)?,
            None => ConfigFile::default(),
        };
        EffectiveConfig::resolve(experiment, file, self.overrides()?)
    }
}

/// Runs an experiment, writes its artifacts and returns the result record.
pub fn run_config(cfg: &EffectiveConfig, workers: Option<usize>) -> Result<ResultFile, CliError> {
    let out = parallel::with_workers(workers, || experiments::run(cfg))?;
    let result = output::write_run(cfg, &out)?;
    println!("{}: {}", cfg.experiment, out.headline);
    for c in &out.checks {
        println!("  [{}] {}: {}", if c.passed { "pass" } else { "FAIL" }, c.name, c.detail);
    }
    eprintln!("[orwalk] wrote {}", cfg.output_dir.display());
    Ok(result)
}

/// Entry point shared by the binary and the tests; returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let mut args: Vec<std::ffi::OsString> = args.into_iter().map(Into::into).collect();
    // `orwalk <experiment> ...` is shorthand for `orwalk run <experiment> ...`
    if let Some(first) = args.get(1).and_then(|a| a.to_str()) {
        if first.parse::<Experiment>().is_ok() {
            args.insert(1, "run".into());
        }
    }
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => exit::SUCCESS,
                _ => exit::CONFIG,
            };
        }
    };
    let result = match cli.command {
        Command::Run(args) => args
            .effective_config()
            .and_then(|cfg| run_config(&cfg, args.workers))
            .map(|r| if r.passed { exit::SUCCESS } else { exit::CHECK_FAILED }),
        Command::Compare { run_a, run_b } => output::read_result(&run_a)
            .and_then(|a| Ok((a, output::read_result(&run_b)?)))
            .and_then(|(a, b)| compare::compare(&a, &b))
            .map(|report| {
                println!("{}", serde_json::to_string_pretty(&report).expect("report serialises"));
                exit::SUCCESS
            }),
    };
    result.unwrap_or_else(|e| {
        eprintln!("orwalk: {e}");
        e.exit_code()
    })
}
