use std::fs;
use std::path::Path;

use serde::Serialize;

use super::{ExperimentConfig, ExperimentError};

/// One row of `losses.csv`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LossRecord {
    pub iteration: usize,
    pub critic_loss: f64,
    pub generator_loss: f64,
    pub penalty_mean: f64,
    /// Empty on environments without a tabular backup.
    pub bellman_residual: Option<f64>,
    pub wall_ms: u64,
}

/// Writes `rows` with a header row, creating parent directories.
pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), ExperimentError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Run record written next to the CSV artifacts.
#[derive(Clone, Debug, Serialize)]
pub struct Manifest<'a> {
    pub experiment: &'a str,
    pub crate_version: &'static str,
    pub seeds: Vec<u64>,
    pub config: &'a ExperimentConfig,
    pub artifacts: Vec<String>,
    pub wall_seconds: f64,
}

pub fn write_manifest(dir: &Path, manifest: &Manifest<'_>) -> Result<(), ExperimentError> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(manifest)?)?;
    Ok(())
}
