use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{QmtError, Result};
use crate::probe::fmt_f64;

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub iter: usize,
    pub loss: f64,
    pub avg_frobenius: Option<f64>,
    pub avg_wasserstein: Option<f64>,
    /// Wall-clock time spent in this iteration.
    pub elapsed_ms: f64,
}

/// Per-iteration convergence history of one fit.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TraceLog {
    records: Vec<TraceRecord>,
}

impl TraceLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, record: TraceRecord) {
        if let Some(last) = self.records.last() {
            assert!(record.iter > last.iter, "trace iterations must increase");
        }
        self.records.push(record);
    }

    pub fn records(&self) -> &[TraceRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&TraceRecord> {
        self.records.last()
    }

    /// Records that carry metric snapshots.
    pub fn snapshots(&self) -> impl Iterator<Item = &TraceRecord> {
        self.records.iter().filter(|r| r.avg_frobenius.is_some())
    }

    pub fn total_ms(&self) -> f64 {
        self.records.iter().map(|r| r.elapsed_ms).sum()
    }

    /// CSV with header `iter,loss,avg_frobenius,avg_wasserstein,elapsed_ms`.
    /// Unsampled metrics are empty; with `include_timing == false` the
    /// timing column is left empty as well so the file is reproducible.
    pub fn to_csv(&self, include_timing: bool) -> String {
        let mut out = String::from("iter,loss,avg_frobenius,avg_wasserstein,elapsed_ms\n");
        let opt = |x: Option<f64>| x.map(fmt_f64).unwrap_or_default();
        for r in &self.records {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                r.iter,
                fmt_f64(r.loss),
                opt(r.avg_frobenius),
                opt(r.avg_wasserstein),
                if include_timing { format!("{:.3}", r.elapsed_ms) } else { String::new() }
            );
        }
        out
    }

    pub fn save_csv(&self, path: &Path, include_timing: bool) -> Result<()> {
        fs::write(path, self.to_csv(include_timing)).map_err(|e| QmtError::io(path, e))
    }
}
