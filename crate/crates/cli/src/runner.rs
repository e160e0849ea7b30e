//! End-to-end pipelines: build → simulate → fit → score → persist.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use qmt_core::probe::generate_dataset;
use qmt_core::sgd::Fitter;
use qmt_core::{score_reconstruction, MetricRecord, OptimConfig};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{ExperimentConfig, Scenario};
use crate::error::CliError;
use crate::scenario::build_instance;

/// One (repeat, method) fit.
#[derive(Debug, Clone, Serialize)]
pub struct RunRecord {
    pub scenario: String,
    pub param: String,
    pub method: String,
    pub repeat: usize,
    pub seed: u64,
    pub metrics: MetricRecord,
    pub iters: usize,
    pub final_loss: f64,
    pub seconds: f64,
    pub trace_path: PathBuf,
    pub povm_path: PathBuf,
    pub metrics_path: PathBuf,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub config: ExperimentConfig,
    pub runs: Vec<RunRecord>,
    pub total_seconds: f64,
    /// seed_r for each repeat r.
    pub seeds: Vec<u64>,
}

impl RunReport {
    pub fn deterministic(&self) -> bool {
        self.config.deterministic
    }
}

pub fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

pub fn ensure_parent(path: &Path) -> Result<(), CliError> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e)),
        _ => Ok(()),
    }
}

fn param_tag(config: &ExperimentConfig) -> String {
    let base = config.scenario.param_tag();
    match config.noise.strength() {
        l if l > 0.0 => format!("{base};lambda={l}"),
        _ => base,
    }
}

fn run_repeat(config: &ExperimentConfig, methods: &[OptimConfig], repeat: usize) -> Result<Vec<RunRecord>, CliError> {
    let seed = config.seed_for_repeat(repeat);
    let inst = build_instance(&config.scenario, seed)?;
    let table = generate_dataset(&inst.truth, &inst.probes, config.noise)?;
    let prefix = config.out_prefix();
    let mut records = Vec::with_capacity(methods.len());
    for method in methods {
        let opt = OptimConfig { seed, ..method.clone() };
        let started = Instant::now();
        let fitter = Fitter::new(&table, &inst.probes, &opt, None)?.with_reference(&inst.truth, &inst.probes);
        let (est, trace) = fitter.run()?;
        let seconds = started.elapsed().as_secs_f64();
        let metrics = score_reconstruction(&inst.truth, &est, &inst.probes)?;

        let stem = format!("_{}_r{repeat}", opt.method_name());
        let trace_path = with_suffix(&prefix, &format!("{stem}_trace.csv"));
        let povm_path = with_suffix(&prefix, &format!("{stem}_povm.json"));
        let metrics_path = with_suffix(&prefix, &format!("{stem}_metrics.csv"));
        ensure_parent(&trace_path)?;
        trace.save_csv(&trace_path, !config.deterministic)?;
        est.save_json(&povm_path)?;
        metrics.save_csv(&metrics_path)?;

        records.push(RunRecord {
            scenario: config.scenario.name().to_string(),
            param: param_tag(config),
            method: opt.method_name(),
            repeat,
            seed,
            metrics,
            iters: trace.len(),
            final_loss: trace.last().map(|r| r.loss).unwrap_or(f64::NAN),
            seconds,
            trace_path,
            povm_path,
            metrics_path,
        });
    }
    Ok(records)
}

/// Runs every repeat of every configured method. Repeats run in parallel;
/// each fit is sequential and seeded with `base_seed + repeat`, so results
/// do not depend on scheduling.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunReport, CliError> {
    config.validate()?;
    let methods = config.method_configs()?;
    let started = Instant::now();
    let per_repeat = (0..config.repeats)
        .into_par_iter()
        .map(|r| run_repeat(config, &methods, r))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(RunReport {
        config: config.clone(),
        runs: per_repeat.into_iter().flatten().collect(),
        total_seconds: started.elapsed().as_secs_f64(),
        seeds: (0..config.repeats).map(|r| config.seed_for_repeat(r)).collect(),
    })
}

/// Expands the sweep grid of `config` into plain experiment configs.
pub fn expand_sweep(config: &ExperimentConfig) -> Result<Vec<ExperimentConfig>, CliError> {
    let spec = config.sweep.clone().unwrap_or_default();
    let qubit_axis: Vec<Option<usize>> = if spec.n_qubits.is_empty() {
        vec![None]
    } else {
        spec.n_qubits.iter().map(|&n| Some(n)).collect()
    };
    let k_axis: Vec<Option<usize>> = if spec.k.is_empty() {
        vec![None]
    } else {
        spec.k.iter().map(|&k| Some(k)).collect()
    };
    let lambda_axis: Vec<Option<f64>> = if spec.lambda.is_empty() {
        vec![None]
    } else {
        spec.lambda.iter().map(|&l| Some(l)).collect()
    };
    let methods = if spec.methods.is_empty() {
        config.methods.clone()
    } else {
        spec.methods.clone()
    };

    let mut out = Vec::new();
    for &k in &k_axis {
        for &n in &qubit_axis {
            for &lambda in &lambda_axis {
                let mut sub = config.clone();
                sub.sweep = None;
                sub.methods = methods.clone();
                let mut tag = String::new();
                if let Some(n) = n {
                    match &mut sub.scenario {
                        Scenario::RandomPovm { n_qubits, .. }
                        | Scenario::PauliProjective { n_qubits, .. }
                        | Scenario::ComputationalBasis { n_qubits } => *n_qubits = n,
                        _ => return Err(CliError::Config("n_qubits sweep needs a qubit scenario".into())),
                    }
                    if let Scenario::PauliProjective { pauli, .. } = &mut sub.scenario {
                        *pauli = None;
                    }
                    tag.push_str(&format!("_N{n}"));
                }
                if let Some(k) = k {
                    match &mut sub.scenario {
                        Scenario::RandomPovm { k: kk, .. } => *kk = k,
                        _ => return Err(CliError::Config("k sweep needs the random_povm scenario".into())),
                    }
                    tag.push_str(&format!("_k{k}"));
                }
                if let Some(l) = lambda {
                    sub.noise = qmt_core::NoiseSpec::depolarizing(l).map_err(|e| CliError::Config(e.to_string()))?;
                    tag.push_str(&format!("_lambda{l}"));
                }
                sub.name = format!("{}{tag}", config.name);
                sub.out = Some(with_suffix(&config.out_prefix(), &tag));
                sub.validate()?;
                out.push(sub);
            }
        }
    }
    Ok(out)
}

/// Runs every grid point of a sweep in order.
pub fn run_sweep(config: &ExperimentConfig) -> Result<Vec<RunReport>, CliError> {
    expand_sweep(config)?.iter().map(run_experiment).collect()
}
