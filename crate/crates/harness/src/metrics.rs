//! Metrics records: JSONL on disk, CSV derived from JSONL.

use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub run_id: String,
    pub mode: String,
    pub instance_label: String,
    /// Epoch for flow modes, iteration for optimizers, sample index for
    /// generation.
    pub step: usize,
    pub energy: f64,
    pub best_energy: f64,
    /// `|best_energy - E_exact|` when the reference is known.
    pub error_vs_exact: Option<f64>,
    pub cumulative_evaluations: u64,
    pub loss: Option<f64>,
    pub wall_ms: f64,
}

pub fn write_jsonl(path: &Path, records: &[MetricsRecord]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|source| HarnessError::File {
        path: path.to_path_buf(),
        source,
    })?;
    let mut w = BufWriter::new(file);
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_jsonl(path: &Path) -> Result<Vec<MetricsRecord>> {
    let file = std::fs::File::open(path).map_err(|source| HarnessError::File {
        path: path.to_path_buf(),
        source,
    })?;
    let mut out = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|source| HarnessError::Json {
            path: path.to_path_buf(),
            source,
        })?);
    }
    Ok(out)
}

/// Converts a JSONL metrics file to CSV with the same columns.
pub fn jsonl_to_csv(jsonl: &Path, csv_path: &Path) -> Result<()> {
    let records = read_jsonl(jsonl)?;
    let mut w = csv::Writer::from_path(csv_path)?;
    for r in &records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Per-instance accuracy summary recomputed from a record stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceSummary {
    pub instance_label: String,
    pub best_energy: f64,
    /// Cumulative evaluations at the first record within the threshold.
    pub n_ca: Option<u64>,
    /// Smallest error over the stream.
    pub min_error: Option<f64>,
    pub evaluations: u64,
    pub steps: usize,
}

/// Groups `records` by instance in first-appearance order.
pub fn summarize(records: &[MetricsRecord], threshold: f64) -> Vec<InstanceSummary> {
    let mut out: Vec<InstanceSummary> = Vec::new();
    for r in records {
        let idx = match out.iter().position(|s| s.instance_label == r.instance_label) {
            Some(i) => i,
            None => {
                out.push(InstanceSummary {
                    instance_label: r.instance_label.clone(),
                    best_energy: f64::INFINITY,
                    n_ca: None,
                    min_error: None,
                    evaluations: 0,
                    steps: 0,
                });
                out.len() - 1
            }
        };
        let s = &mut out[idx];
        s.best_energy = s.best_energy.min(r.best_energy);
        s.evaluations = s.evaluations.max(r.cumulative_evaluations);
        s.steps += 1;
        if let Some(e) = r.error_vs_exact {
            s.min_error = Some(s.min_error.map_or(e, |m: f64| m.min(e)));
            if s.n_ca.is_none() && e <= threshold {
                s.n_ca = Some(r.cumulative_evaluations);
            }
        }
    }
    out
}
