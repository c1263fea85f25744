//! Per-tick metric series and run summaries, with CSV/JSON emission.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Version guard for the CSV/JSON schemas below.
pub const SCHEMA_VERSION: u32 = 1;

pub const CSV_HEADER: &str = "t,x,y_lat,lane,v,headway,decision_lane,plan_ms";

/// One simulator tick of the ego's state and decision.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TickRow {
    pub t: f64,
    pub x: f64,
    pub y_lat: f64,
    pub lane: usize,
    pub v: f64,
    /// Gap to the nearest front vehicle in the current lane, capped at the
    /// detection range; exactly the cap when no front vehicle exists.
    pub headway: f64,
    pub decision_lane: usize,
    pub plan_ms: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSummary {
    pub schema_version: u32,
    pub policy: String,
    pub seed: u64,
    /// False when the run hit the simulation timeout.
    pub completed: bool,
    pub travel_time: f64,
    pub mean_headway: f64,
    /// Smallest same-lane bumper gap observed anywhere during the run.
    pub min_gap: f64,
    pub lane_changes: usize,
    pub plan_ms_mean: f64,
    pub plan_ms_p99: f64,
}

/// Full record of one simulation run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsLog {
    pub rows: Vec<TickRow>,
    pub summary: RunSummary,
}

impl MetricsLog {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut w = BufWriter::new(file);
        let io_err = |source| Error::Io {
            path: path.to_path_buf(),
            source,
        };
        writeln!(w, "{CSV_HEADER}").map_err(io_err)?;
        for r in &self.rows {
            writeln!(
                w,
                "{:.3},{:.6},{:.6},{},{:.6},{:.6},{},{:.4}",
                r.t, r.x, r.y_lat, r.lane, r.v, r.headway, r.decision_lane, r.plan_ms
            )
            .map_err(io_err)?;
        }
        Ok(())
    }

    pub fn write_summary(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        serde_json::to_writer_pretty(BufWriter::new(file), &self.summary)?;
        Ok(())
    }
}

/// Percentile by nearest-rank on a copy of the data; 0 for empty input.
pub fn percentile(values: &[f64], p: f64) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = ((p / 100.0) * sorted.len() as f64).ceil() as usize;
    sorted[rank.saturating_sub(1).min(sorted.len() - 1)]
}

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

/// Sample standard deviation; 0 for fewer than two values.
pub fn std_dev(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let m = mean(values);
    let var = values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (values.len() - 1) as f64;
    var.sqrt()
}
