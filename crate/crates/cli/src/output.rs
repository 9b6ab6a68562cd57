//! Run artifacts: `effective_config.json`, `result.json` and the data file.
//!
//! Nothing time- or machine-dependent is written, so identical configs give
//! byte-identical files.

use std::fs;
use std::path::Path;

use orwalk_core::Estimate;
use serde::{Deserialize, Serialize};

use crate::config::{EffectiveConfig, Format};
use crate::CliError;

pub const RESULT_SCHEMA: &str = "orwalk-result/1";
pub const RESULT_FILE: &str = "result.json";
pub const CONFIG_FILE: &str = "effective_config.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub version: String,
    pub master_seed: u64,
    pub env_seeds: Vec<u64>,
    pub config_hash: String,
}

impl Provenance {
    pub fn of(cfg: &EffectiveConfig) -> Provenance {
        Provenance {
            version: orwalk_core::VERSION.to_string(),
            master_seed: cfg.seed,
            env_seeds: cfg.env_seeds(),
            config_hash: cfg.hash(),
        }
    }
}

/// A named number with its standard error (zero for exact or numerical values).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Statistic {
    pub name: String,
    pub value: f64,
    pub std_error: f64,
}

impl Statistic {
    pub fn exact(name: impl Into<String>, value: f64) -> Statistic {
        Statistic { name: name.into(), value, std_error: 0.0 }
    }

    pub fn estimate(name: impl Into<String>, e: &Estimate) -> Statistic {
        Statistic { name: name.into(), value: e.value, std_error: e.std_error }
    }
}

/// Pass/fail of one acceptance condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Check {
        Check { name: name.into(), passed, detail: detail.into() }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Table {
        Table { columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

/// Everything an experiment produces.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub data: Table,
    pub statistics: Vec<Statistic>,
    pub summary: serde_json::Value,
    pub checks: Vec<Check>,
    /// One-line human summary printed to standard output.
    pub headline: String,
}

impl RunOutput {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResultFile {
    pub schema: String,
    pub experiment: String,
    pub provenance: Provenance,
    pub passed: bool,
    pub checks: Vec<Check>,
    pub statistics: Vec<Statistic>,
    pub summary: serde_json::Value,
    pub data_file: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct JsonData<'a> {
    provenance: &'a Provenance,
    columns: &'a [String],
    rows: &'a [Vec<String>],
}

/// Writes the three artifacts into `cfg.output_dir` and returns the result record.
pub fn write_run(cfg: &EffectiveConfig, out: &RunOutput) -> Result<ResultFile, CliError> {
    let dir = &cfg.output_dir;
    fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    let prov = Provenance::of(cfg);
    write_file(&dir.join(CONFIG_FILE), cfg.to_json().as_bytes())?;
    let data_file = match cfg.format {
        Format::Csv => {
            let name = format!("{}.csv", cfg.experiment.name());
            write_file(&dir.join(&name), &render_csv(&prov, &out.data)?)?;
            name
        }
        Format::Json => {
            let name = format!("{}.json", cfg.experiment.name());
            let doc = JsonData { provenance: &prov, columns: &out.data.columns, rows: &out.data.rows };
            write_file(&dir.join(&name), pretty(&doc).as_bytes())?;
            name
        }
    };
    let result = ResultFile {
        schema: RESULT_SCHEMA.to_string(),
        experiment: cfg.experiment.name().to_string(),
        provenance: prov,
        passed: out.passed(),
        checks: out.checks.clone(),
        statistics: out.statistics.clone(),
        summary: out.summary.clone(),
        data_file,
    };
    write_file(&dir.join(RESULT_FILE), pretty(&result).as_bytes())?;
    Ok(result)
}

fn render_csv(prov: &Provenance, table: &Table) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    buf.extend_from_slice(format!("# {}\n", prov.version).as_bytes());
    buf.extend_from_slice(format!("# master_seed={}\n", prov.master_seed).as_bytes());
    let seeds: Vec<String> = prov.env_seeds.iter().map(|s| s.to_string()).collect();
    buf.extend_from_slice(format!("# env_seeds={}\n", seeds.join(";")).as_bytes());
    buf.extend_from_slice(format!("# config_hash={}\n", prov.config_hash).as_bytes());
    let mut w = csv::Writer::from_writer(buf);
    let csv_err = |e: csv::Error| CliError::Runtime(format!("csv: {e}"));
    w.write_record(&table.columns).map_err(csv_err)?;
    for row in &table.rows {
        w.write_record(row).map_err(csv_err)?;
    }
    w.into_inner().map_err(|e| CliError::Runtime(format!("csv: {e}")))
}

fn pretty<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("serialisable") + "\n"
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| io_error(path, e))
}

fn io_error(path: &Path, e: std::io::Error) -> CliError {
    CliError::Runtime(format!("{}: {e}", path.display()))
}

/// Reads the `result.json` of a run directory (or the file itself).
pub fn read_result(path: &Path) -> Result<ResultFile, CliError> {
    let file = if path.is_dir() { path.join(RESULT_FILE) } else { path.to_path_buf() };
    let text = fs::read_to_string(&file)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", file.display())))?;
    let r: ResultFile = serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("{} is not a run result: {e}", file.display())))?;
    if r.schema != RESULT_SCHEMA {
        return Err(CliError::Config(format!(
            "{} has schema `{}`, expected `{RESULT_SCHEMA}`",
            file.display(),
            r.schema
        )));
    }
    Ok(r)
}
