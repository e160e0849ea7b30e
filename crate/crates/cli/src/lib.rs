//! Reproducible experiment runner for measurement tomography fits.
//!
//! An [`ExperimentConfig`] (TOML) names a scenario, an optional noise model,
//! optimizer settings, the methods to compare and a repeat count. The
//! runner builds the true POVM and probes, simulates data, fits, scores the
//! estimate against the truth and writes traces, POVMs, metric tables and a
//! summary table under the configured path prefix.

pub mod config;
pub mod error;
pub mod report;
pub mod runner;
pub mod scenario;

pub use config::{apply_override, parse_method, ExperimentConfig, Scenario, SweepSpec};
pub use error::CliError;
pub use report::{emit_report, emit_sweep_report, summary_csv, summary_json, ReportFormat, SUMMARY_HEADER};
pub use runner::{expand_sweep, run_experiment, run_sweep, RunRecord, RunReport};
pub use scenario::{build_instance, Instance};
