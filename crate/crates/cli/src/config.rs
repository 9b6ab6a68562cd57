//! Experiment configuration: strict JSON files, flag overrides and the
//! fully materialised effective configuration persisted with every run.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use orwalk_core::expansions::GraphInput;
use orwalk_core::EnvironmentSpec;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Simulate,
    Returns,
    Speed,
    SkeletonCheck,
    DeltaLemmas,
    #[serde(rename = "series-L")]
    SeriesL,
    #[serde(rename = "series-H")]
    SeriesH,
    #[serde(rename = "series-O")]
    SeriesO,
    TailEvents,
    DpOracle,
    GreenCheck,
    ResolventCheck,
}

impl Experiment {
    pub const ALL: [Experiment; 12] = [
        Experiment::Simulate,
        Experiment::Returns,
        Experiment::Speed,
        Experiment::SkeletonCheck,
        Experiment::DeltaLemmas,
        Experiment::SeriesL,
        Experiment::SeriesH,
        Experiment::SeriesO,
        Experiment::TailEvents,
        Experiment::DpOracle,
        Experiment::GreenCheck,
        Experiment::ResolventCheck,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Simulate => "simulate",
            Experiment::Returns => "returns",
            Experiment::Speed => "speed",
            Experiment::SkeletonCheck => "skeleton-check",
            Experiment::DeltaLemmas => "delta-lemmas",
            Experiment::SeriesL => "series-L",
            Experiment::SeriesH => "series-H",
            Experiment::SeriesO => "series-O",
            Experiment::TailEvents => "tail-events",
            Experiment::DpOracle => "dp-oracle",
            Experiment::GreenCheck => "green-check",
            Experiment::ResolventCheck => "resolvent-check",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| CliError::Config(format!("unknown experiment `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            _ => Err(CliError::Config(format!("unknown format `{s}` (expected csv or json)"))),
        }
    }
}

/// An environment given either as a short form (`"alternate"`, `"random:7"`)
/// or as the full JSON object.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
enum EnvField {
    Short(String),
    Full(serde_json::Value),
}

impl EnvField {
    fn resolve(self) -> Result<EnvironmentSpec, CliError> {
        match self {
            EnvField::Short(s) => s.parse().map_err(|e| CliError::Config(format!("env: {e}"))),
            EnvField::Full(v) => serde_json::from_value(v).map_err(|e| CliError::Config(format!("env: {e}"))),
        }
    }
}

/// Configuration file contents; every key is optional and unknown keys are rejected.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    experiment: Option<Experiment>,
    env: Option<EnvField>,
    seed: Option<u64>,
    seeds: Option<Vec<u64>>,
    horizons: Option<Vec<u64>>,
    n: Option<u64>,
    n_samples: Option<u64>,
    max_len: Option<u64>,
    cap: Option<u64>,
    tolerances: Option<BTreeMap<String, f64>>,
    output_dir: Option<PathBuf>,
    format: Option<Format>,
    graph: Option<GraphInput>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<ConfigFile, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<ConfigFile, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }
}

/// Values given on the command line; they take precedence over the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub env: Option<String>,
    pub seed: Option<u64>,
    pub seeds: Option<Vec<u64>>,
    pub horizons: Option<Vec<u64>>,
    pub n: Option<u64>,
    pub n_samples: Option<u64>,
    pub max_len: Option<u64>,
    pub cap: Option<u64>,
    pub tolerances: Vec<(String, f64)>,
    pub output_dir: Option<PathBuf>,
    pub format: Option<Format>,
    pub graph: Option<PathBuf>,
}

/// The configuration a run actually used, with every default filled in.
///
/// The worker count is deliberately absent: it never changes results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EffectiveConfig {
    pub experiment: Experiment,
    pub env: EnvironmentSpec,
    /// Master seed of the Monte Carlo streams.
    pub seed: u64,
    /// Environment seeds; when non-empty the run averages over the random
    /// environments they define instead of using `env`.
    pub seeds: Vec<u64>,
    pub horizons: Vec<u64>,
    pub n: u64,
    pub n_samples: u64,
    pub max_len: u64,
    pub cap: u64,
    pub tolerances: BTreeMap<String, f64>,
    pub output_dir: PathBuf,
    pub format: Format,
    pub graph: Option<GraphInput>,
}

struct Defaults {
    env: EnvironmentSpec,
    seeds: Vec<u64>,
    horizons: Vec<u64>,
    n: u64,
    n_samples: u64,
    max_len: u64,
    cap: u64,
    tolerances: &'static [(&'static str, f64)],
}

fn defaults(e: Experiment) -> Defaults {
    let base = Defaults {
        env: EnvironmentSpec::Alternate,
        seeds: Vec::new(),
        horizons: Vec::new(),
        n: 0,
        n_samples: 0,
        max_len: 0,
        cap: 0,
        tolerances: &[],
    };
    match e {
        Experiment::Simulate => Defaults { n: 100, n_samples: 10, ..base },
        Experiment::Returns => Defaults {
            horizons: vec![1_000, 10_000, 100_000],
            n_samples: 1_000,
            ..base
        },
        Experiment::Speed => Defaults {
            horizons: vec![10_000, 100_000, 1_000_000],
            n_samples: 1_000,
            ..base
        },
        Experiment::SkeletonCheck => Defaults { n: 200, n_samples: 10_000, ..base },
        Experiment::DeltaLemmas => Defaults { max_len: 16, n: 200, n_samples: 100_000, ..base },
        Experiment::SeriesL => Defaults {
            n: 4096,
            n_samples: 0,
            cap: 1_000_000,
            horizons: vec![32, 2048],
            tolerances: &[("term", 1e-10), ("min_increment", 0.05), ("max_spread", 0.2), ("z", 4.0)],
            ..base
        },
        Experiment::SeriesH => Defaults {
            n: 16_384,
            n_samples: 0,
            cap: 1_000_000,
            horizons: vec![256],
            tolerances: &[("term", 1e-10), ("cauchy", 1e-4), ("richardson", 1e-3), ("z", 4.0)],
            ..base
        },
        Experiment::SeriesO => Defaults {
            env: EnvironmentSpec::random(0),
            seeds: (0..30).collect(),
            n: 20,
            n_samples: 1_000,
            cap: 100_000,
            ..base
        },
        Experiment::TailEvents => Defaults {
            env: EnvironmentSpec::random(0),
            horizons: vec![1_000, 4_000],
            n_samples: 10_000,
            tolerances: &[("delta1", 0.2), ("delta2", 0.2), ("delta3", 0.2), ("max_frequency", 0.05)],
            ..base
        },
        Experiment::DpOracle => Defaults { n: 12, ..base },
        Experiment::GreenCheck => Defaults {
            tolerances: &[("agreement", 1e-8), ("closed_form", 1e-6)],
            ..base
        },
        Experiment::ResolventCheck => Defaults {
            n: 8,
            n_samples: 20,
            tolerances: &[("agreement", 1e-8)],
            ..base
        },
    }
}

/// Default master seed: `ORWALK_SEED` if set, else 0.
pub fn default_seed() -> Result<u64, CliError> {
    match std::env::var("ORWALK_SEED") {
        Ok(s) => s
            .trim()
            .parse()
            .map_err(|_| CliError::Config(format!("ORWALK_SEED must be an unsigned integer, got `{s}`"))),
        Err(_) => Ok(0),
    }
}

impl EffectiveConfig {
    /// Merges defaults, file values and overrides, in increasing precedence.
    pub fn resolve(
        experiment: Option<Experiment>,
        file: ConfigFile,
        over: Overrides,
    ) -> Result<EffectiveConfig, CliError> {
        let experiment = match (experiment, file.experiment) {
            (Some(a), Some(b)) if a != b => {
                return Err(CliError::Config(format!(
                    "experiment `{a}` requested but the config file is for `{b}`"
                )))
            }
            (Some(a), _) | (None, Some(a)) => a,
            (None, None) => return Err(CliError::Config("no experiment given".into())),
        };
        let d = defaults(experiment);
        let env_given = over.env.is_some() || file.env.is_some();
        let env = match (over.env, file.env) {
            (Some(s), _) => EnvField::Short(s).resolve()?,
            (None, Some(f)) => f.resolve()?,
            (None, None) => d.env,
        };
        let mut tolerances: BTreeMap<String, f64> =
            d.tolerances.iter().map(|&(k, v)| (k.to_string(), v)).collect();
        tolerances.extend(file.tolerances.unwrap_or_default());
        tolerances.extend(over.tolerances);
        let graph = match over.graph {
            Some(path) => {
                let text = std::fs::read_to_string(&path)
                    .map_err(|e| CliError::Config(format!("cannot read graph {}: {e}", path.display())))?;
                Some(serde_json::from_str(&text).map_err(|e| CliError::Config(format!("graph: {e}")))?)
            }
            None => file.graph,
        };
        let cfg = EffectiveConfig {
            experiment,
            env,
            seed: match over.seed.or(file.seed) {
                Some(s) => s,
                None => default_seed()?,
            },
            // an explicit environment replaces the default ensemble of random ones
            seeds: match (over.seeds, file.seeds) {
                (Some(s), _) | (None, Some(s)) => s,
                (None, None) if env_given => Vec::new(),
                (None, None) => d.seeds,
            },
            horizons: over.horizons.or(file.horizons).unwrap_or(d.horizons),
            n: over.n.or(file.n).unwrap_or(d.n),
            n_samples: over.n_samples.or(file.n_samples).unwrap_or(d.n_samples),
            max_len: over.max_len.or(file.max_len).unwrap_or(d.max_len),
            cap: over.cap.or(file.cap).unwrap_or(d.cap),
            tolerances,
            output_dir: over
                .output_dir
                .or(file.output_dir)
                .unwrap_or_else(|| PathBuf::from("orwalk-runs").join(experiment.name())),
            format: over.format.or(file.format).unwrap_or(Format::Csv),
            graph,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        for (k, v) in &self.tolerances {
            if !v.is_finite() {
                return Err(CliError::Config(format!("tolerance `{k}` must be finite")));
            }
        }
        if self.horizons.windows(2).any(|w| w[1] <= w[0]) {
            return Err(CliError::Config("horizons must be strictly increasing".into()));
        }
        Ok(())
    }

    pub fn tolerance(&self, key: &str) -> Result<f64, CliError> {
        self.tolerances
            .get(key)
            .copied()
            .ok_or_else(|| CliError::Config(format!("tolerance `{key}` is required by {}", self.experiment)))
    }

    /// The environments the run averages over.
    pub fn environments(&self) -> Vec<EnvironmentSpec> {
        if self.seeds.is_empty() {
            vec![self.env.clone()]
        } else {
            self.seeds.iter().map(|&s| EnvironmentSpec::random(s)).collect()
        }
    }

    /// Seeds of the random environments involved.
    pub fn env_seeds(&self) -> Vec<u64> {
        if self.seeds.is_empty() {
            self.env.seed().into_iter().collect()
        } else {
            self.seeds.clone()
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises") + "\n"
    }

    /// SHA-256 of the persisted configuration with the output location
    /// blanked, so a run moved or repeated elsewhere keeps its hash.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output_dir = PathBuf::new();
        hex::encode(Sha256::digest(c.to_json().as_bytes()))
    }
}
