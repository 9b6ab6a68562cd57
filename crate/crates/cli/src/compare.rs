//! Statistic-by-statistic comparison of two runs.

use serde::{Deserialize, Serialize};

use crate::output::ResultFile;
use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatDelta {
    pub name: String,
    pub a: f64,
    pub b: f64,
    pub delta: f64,
    /// `sqrt(se_a^2 + se_b^2)`.
    pub sigma: f64,
    /// `delta / sigma`; absent when both errors are zero and the values differ.
    pub z: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub experiment_a: String,
    pub experiment_b: String,
    pub deltas: Vec<StatDelta>,
    pub only_in_a: Vec<String>,
    pub only_in_b: Vec<String>,
    pub max_abs_z: Option<f64>,
    pub verdict_a: Option<serde_json::Value>,
    pub verdict_b: Option<serde_json::Value>,
}

/// Matches statistics by name. Runs sharing no statistic are incompatible.
pub fn compare(a: &ResultFile, b: &ResultFile) -> Result<CompareReport, CliError> {
    let mut deltas = Vec::new();
    let mut only_in_a = Vec::new();
    for sa in &a.statistics {
        match b.statistics.iter().find(|sb| sb.name == sa.name) {
            Some(sb) => {
                let delta = sa.value - sb.value;
                let sigma = sa.std_error.hypot(sb.std_error);
                let z = if delta == 0.0 {
                    Some(0.0)
                } else if sigma > 0.0 {
                    Some(delta / sigma)
                } else {
                    None
                };
                deltas.push(StatDelta { name: sa.name.clone(), a: sa.value, b: sb.value, delta, sigma, z });
            }
            None => only_in_a.push(sa.name.clone()),
        }
    }
    let only_in_b = b
        .statistics
        .iter()
        .filter(|sb| !a.statistics.iter().any(|sa| sa.name == sb.name))
        .map(|s| s.name.clone())
        .collect();
    let verdict_a = a.summary.get("verdict").cloned();
    let verdict_b = b.summary.get("verdict").cloned();
    if deltas.is_empty() && (verdict_a.is_none() || verdict_b.is_none()) {
        return Err(CliError::Config(format!(
            "runs of `{}` and `{}` share no statistics",
            a.experiment, b.experiment
        )));
    }
    let max_abs_z = deltas
        .iter()
        .map(|d| d.z.map_or(f64::INFINITY, f64::abs))
        .fold(None, |m: Option<f64>, z| Some(m.map_or(z, |m| m.max(z))));
    Ok(CompareReport {
        experiment_a: a.experiment.clone(),
        experiment_b: b.experiment.clone(),
        deltas,
        only_in_a,
        only_in_b,
        max_abs_z,
        verdict_a,
        verdict_b,
    })
}
