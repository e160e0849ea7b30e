//! Summary tables.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use qmt_core::probe::fmt_f64;

use crate::error::CliError;
use crate::runner::{ensure_parent, with_suffix, RunRecord, RunReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

impl ReportFormat {
    pub fn parse(s: &str) -> Result<Self, CliError> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            _ => Err(CliError::Config(format!("unknown report format '{s}'"))),
        }
    }

    fn extension(self) -> &'static str {
        match self {
            Self::Csv => "csv",
            Self::Json => "json",
        }
    }
}

pub const SUMMARY_HEADER: &str = "scenario,param,method,repeat,mean_frob,std_frob,mean_wass,std_wass,iters,seconds";

/// Summary rows in CSV form. Seconds are left empty when `deterministic`.
pub fn summary_csv<'a>(runs: impl IntoIterator<Item = &'a RunRecord>, deterministic: bool) -> String {
    let mut out = format!("{SUMMARY_HEADER}\n");
    for r in runs {
        let m = &r.metrics;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.scenario,
            r.param,
            r.method,
            r.repeat,
            fmt_f64(m.mean_frobenius),
            fmt_f64(m.std_frobenius),
            fmt_f64(m.mean_wasserstein),
            fmt_f64(m.std_wasserstein),
            r.iters,
            if deterministic { String::new() } else { fmt_f64(r.seconds) }
        );
    }
    out
}

/// The same rows as a JSON array; numbers keep the 17-digit formatting and
/// seconds become `null` when `deterministic`.
pub fn summary_json<'a>(runs: impl IntoIterator<Item = &'a RunRecord>, deterministic: bool) -> String {
    let quote = |s: &str| serde_json::to_string(s).expect("string serializes");
    let rows: Vec<String> = runs
        .into_iter()
        .map(|r| {
            let m = &r.metrics;
            format!(
                "  {{\"scenario\": {}, \"param\": {}, \"method\": {}, \"repeat\": {}, \"mean_frob\": {}, \"std_frob\": {}, \"mean_wass\": {}, \"std_wass\": {}, \"iters\": {}, \"seconds\": {}}}",
                quote(&r.scenario),
                quote(&r.param),
                quote(&r.method),
                r.repeat,
                json_number(m.mean_frobenius),
                json_number(m.std_frobenius),
                json_number(m.mean_wasserstein),
                json_number(m.std_wasserstein),
                r.iters,
                if deterministic { "null".to_string() } else { json_number(r.seconds) }
            )
        })
        .collect();
    if rows.is_empty() {
        "[]\n".into()
    } else {
        format!("[\n{}\n]\n", rows.join(",\n"))
    }
}

fn json_number(x: f64) -> String {
    if x.is_finite() {
        fmt_f64(x)
    } else {
        "null".into()
    }
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    ensure_parent(path)?;
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

/// Writes `<out>_summary.<ext>` and returns its path.
pub fn emit_report(report: &RunReport, format: ReportFormat) -> Result<PathBuf, CliError> {
    let path = with_suffix(&report.config.out_prefix(), &format!("_summary.{}", format.extension()));
    emit_rows(&report.runs, report.deterministic(), format, &path)?;
    Ok(path)
}

/// One combined table for all grid points of a sweep.
pub fn emit_sweep_report(
    reports: &[RunReport],
    prefix: &Path,
    deterministic: bool,
    format: ReportFormat,
) -> Result<PathBuf, CliError> {
    let path = with_suffix(prefix, &format!("_sweep_summary.{}", format.extension()));
    let runs: Vec<RunRecord> = reports.iter().flat_map(|r| r.runs.iter().cloned()).collect();
    emit_rows(&runs, deterministic, format, &path)?;
    Ok(path)
}

fn emit_rows(runs: &[RunRecord], deterministic: bool, format: ReportFormat, path: &Path) -> Result<(), CliError> {
    let text = match format {
        ReportFormat::Csv => summary_csv(runs, deterministic),
        ReportFormat::Json => summary_json(runs, deterministic),
    };
    write(path, &text)
}
