//! Preset sweeps: one run directory per parameter value plus `summary.csv`.

use std::fs;
use std::path::{Path, PathBuf};

use crate::artifacts::{run_to_dir, DirOptions, RunError};
use crate::config::ConfigError;
use crate::presets::Preset;

pub const SUMMARY: &str = "summary.csv";

/// Columns of `summary.csv`.
pub const SUMMARY_HEADER: [&str; 7] = [
    "value",
    "rounds",
    "final_accuracy",
    "final_loss",
    "wall_time_ms",
    "confirmed_tx",
    "stop",
];

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: u64,
    pub rounds: usize,
    pub final_accuracy: f64,
    pub final_loss: f64,
    pub wall_time_ms: f64,
    pub confirmed_tx: usize,
    pub stop: String,
}

#[derive(Debug, thiserror::Error)]
pub enum SweepError {
    #[error("preset {preset} value {value}: {source}")]
    Config {
        preset: String,
        value: u64,
        source: ConfigError,
    },
    #[error("preset {preset} value {value}: {source}")]
    Run {
        preset: String,
        value: u64,
        source: RunError,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

fn value_dir(preset: &Preset, value: u64) -> String {
    let leaf = preset
        .parameter
        .rsplit('.')
        .next()
        .unwrap_or(&preset.parameter);
    format!("{leaf}_{value}")
}

/// Run every value of `preset` under `out`, optionally overriding the seed.
pub fn run_sweep(
    preset: &Preset,
    out: &Path,
    seed: Option<u64>,
) -> Result<Vec<SweepRow>, SweepError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| SweepError::Io { path, source }
    };
    fs::create_dir_all(out).map_err(io(out))?;
    let mut rows = Vec::with_capacity(preset.values.len());
    for &value in &preset.values {
        let err_ctx = (preset.name.clone(), value);
        let mut cfg = preset.config(value).map_err(|source| SweepError::Config {
            preset: err_ctx.0.clone(),
            value,
            source,
        })?;
        if let Some(s) = seed {
            cfg.sim.seed = s;
        }
        let dir = out.join(value_dir(preset, value));
        let run =
            run_to_dir(&cfg, &dir, &DirOptions::default()).map_err(|source| SweepError::Run {
                preset: err_ctx.0,
                value,
                source,
            })?;
        let last = run.metrics.last();
        rows.push(SweepRow {
            value,
            rounds: run.metrics.len(),
            final_accuracy: last.map_or(f64::NAN, |m| m.global_accuracy),
            final_loss: last.map_or(f64::NAN, |m| m.global_loss),
            wall_time_ms: last.map_or(0.0, |m| m.wall_time_ms),
            confirmed_tx: last.map_or(0, |m| m.confirmed_tx),
            stop: run.stop.label(),
        });
    }
    let path = out.join(SUMMARY);
    let mut w = csv::Writer::from_path(&path).map_err(|e| SweepError::Io {
        path: path.clone(),
        source: e.into(),
    })?;
    let csv_io = |e: csv::Error| SweepError::Io {
        path: path.clone(),
        source: e.into(),
    };
    w.write_record(SUMMARY_HEADER).map_err(csv_io)?;
    for r in &rows {
        w.write_record([
            r.value.to_string(),
            r.rounds.to_string(),
            r.final_accuracy.to_string(),
            r.final_loss.to_string(),
            r.wall_time_ms.to_string(),
            r.confirmed_tx.to_string(),
            r.stop.clone(),
        ])
        .map_err(csv_io)?;
    }
    w.flush().map_err(io(&path))?;
    Ok(rows)
}
