//! Experiment configuration files.

use std::fs;
use std::path::{Path, PathBuf};

use qmt_core::{Loss, NoiseSpec, OptimConfig, Parameterization};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Measurement and probe family of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Scenario {
    /// Haar-like random POVM with `k` outcomes on `n_qubits`, qubit probes.
    RandomPovm { n_qubits: usize, k: usize },
    /// Tensor products of single-qubit Pauli projectors. Without an explicit
    /// string, each repeat draws one uniformly from {X, Y, Z}^N.
    PauliProjective {
        n_qubits: usize,
        #[serde(default)]
        pauli: Option<String>,
    },
    ComputationalBasis { n_qubits: usize },
    PhotonDetection {
        dim: usize,
        alpha_max: f64,
        #[serde(default = "default_grid")]
        grid_points: usize,
    },
    PhotonCounting {
        dim: usize,
        alpha_max: f64,
        #[serde(default = "default_grid")]
        grid_points: usize,
    },
}

fn default_grid() -> usize {
    32
}

impl Scenario {
    pub fn name(&self) -> &'static str {
        match self {
            Scenario::RandomPovm { .. } => "random_povm",
            Scenario::PauliProjective { .. } => "pauli_projective",
            Scenario::ComputationalBasis { .. } => "computational_basis",
            Scenario::PhotonDetection { .. } => "photon_detection",
            Scenario::PhotonCounting { .. } => "photon_counting",
        }
    }

    /// Compact parameter tag used in summary rows, e.g. `N=3;k=16`.
    pub fn param_tag(&self) -> String {
        match self {
            Scenario::RandomPovm { n_qubits, k } => format!("N={n_qubits};k={k}"),
            Scenario::PauliProjective { n_qubits, pauli } => match pauli {
                Some(p) => format!("N={n_qubits};pauli={p}"),
                None => format!("N={n_qubits}"),
            },
            Scenario::ComputationalBasis { n_qubits } => format!("N={n_qubits}"),
            Scenario::PhotonDetection { dim, alpha_max, grid_points }
            | Scenario::PhotonCounting { dim, alpha_max, grid_points } => {
                format!("dim={dim};alpha_max={alpha_max};grid={grid_points}")
            }
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        match self {
            Scenario::RandomPovm { n_qubits, k } => {
                check_qubits(*n_qubits)?;
                if *k < 2 {
                    return bad(format!("random_povm needs k >= 2, got {k}"));
                }
            }
            Scenario::PauliProjective { n_qubits, pauli } => {
                check_qubits(*n_qubits)?;
                if let Some(p) = pauli {
                    if p.chars().count() != *n_qubits {
                        return bad(format!("pauli string '{p}' does not have {n_qubits} letters"));
                    }
                }
            }
            Scenario::ComputationalBasis { n_qubits } => check_qubits(*n_qubits)?,
            Scenario::PhotonDetection { dim, alpha_max, grid_points }
            | Scenario::PhotonCounting { dim, alpha_max, grid_points } => {
                if *dim < 2 {
                    return bad(format!("{} needs dim >= 2, got {dim}", self.name()));
                }
                if !(alpha_max.is_finite() && *alpha_max >= 0.0) {
                    return bad(format!("alpha_max must be a non-negative number, got {alpha_max}"));
                }
                if *grid_points == 0 {
                    return bad("grid_points must be at least 1".into());
                }
            }
        }
        Ok(())
    }
}

fn check_qubits(n: usize) -> Result<(), CliError> {
    if !(1..=6).contains(&n) {
        return Err(CliError::Config(format!("n_qubits must lie in 1..=6, got {n}")));
    }
    Ok(())
}

/// Grid expanded by `sweep`. Empty axes keep the base value.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSpec {
    pub n_qubits: Vec<usize>,
    pub k: Vec<usize>,
    pub lambda: Vec<f64>,
    pub methods: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_name")]
    pub name: String,
    pub scenario: Scenario,
    #[serde(default)]
    pub noise: NoiseSpec,
    #[serde(default)]
    pub optimizer: OptimConfig,
    /// Methods such as "HONEST-MLE"; empty means the optimizer's own.
    #[serde(default)]
    pub methods: Vec<String>,
    #[serde(default = "default_repeats")]
    pub repeats: usize,
    #[serde(default)]
    pub base_seed: u64,
    /// Path prefix for every file written by the run.
    #[serde(default)]
    pub out: Option<PathBuf>,
    /// Leave timing fields empty so outputs are byte-reproducible.
    #[serde(default)]
    pub deterministic: bool,
    #[serde(default)]
    pub sweep: Option<SweepSpec>,
}

fn default_name() -> String {
    "experiment".into()
}

fn default_repeats() -> usize {
    5
}

impl ExperimentConfig {
    pub fn new(scenario: Scenario, optimizer: OptimConfig) -> Self {
        Self {
            name: default_name(),
            scenario,
            noise: NoiseSpec::none(),
            optimizer,
            methods: Vec::new(),
            repeats: 1,
            base_seed: 0,
            out: None,
            deterministic: false,
            sweep: None,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let value: toml::Value = toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_value(value)
    }

    pub fn from_value(value: toml::Value) -> Result<Self, CliError> {
        let cfg: Self = value.try_into().map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.repeats == 0 {
            return Err(CliError::Config("repeats must be at least 1".into()));
        }
        self.scenario.validate()?;
        self.noise.validate().map_err(|e| CliError::Config(e.to_string()))?;
        self.optimizer.validate().map_err(|e| CliError::Config(e.to_string()))?;
        for m in &self.methods {
            parse_method(m)?;
        }
        if let Some(s) = &self.sweep {
            for m in &s.methods {
                parse_method(m)?;
            }
            if s.lambda.iter().any(|l| !(0.0..=1.0).contains(l)) {
                return Err(CliError::Config("sweep lambdas must lie in [0, 1]".into()));
            }
        }
        Ok(())
    }

    /// Optimizer settings for each configured method, in order.
    pub fn method_configs(&self) -> Result<Vec<OptimConfig>, CliError> {
        if self.methods.is_empty() {
            return Ok(vec![self.optimizer.clone()]);
        }
        self.methods
            .iter()
            .map(|m| {
                let (p, l) = parse_method(m)?;
                Ok(OptimConfig {
                    parameterization: p,
                    loss: l,
                    ..self.optimizer.clone()
                })
            })
            .collect()
    }

    pub fn out_prefix(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("results").join(&self.name))
    }

    pub fn seed_for_repeat(&self, repeat: usize) -> u64 {
        self.base_seed.wrapping_add(repeat as u64)
    }
}

/// Parses "HONEST-MLE", "sm_mse" and similar.
pub fn parse_method(s: &str) -> Result<(Parameterization, Loss), CliError> {
    let (p, l) = s
        .split_once(['-', '_', ':'])
        .ok_or_else(|| CliError::Config(format!("method '{s}' should look like HONEST-MLE")))?;
    let p = Parameterization::parse(p).map_err(|e| CliError::Config(e.to_string()))?;
    let l = Loss::parse(l).map_err(|e| CliError::Config(e.to_string()))?;
    Ok((p, l))
}

/// Sets `dotted.key = value` in a TOML tree. The value is parsed as TOML
/// when possible and taken as a plain string otherwise.
pub fn apply_override(root: &mut toml::Value, assignment: &str) -> Result<(), CliError> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override '{assignment}' is not key=value")))?;
    let key = key.trim();
    let raw = raw.trim();
    let value = parse_scalar(raw);
    let mut node = root;
    let parts: Vec<&str> = key.split('.').collect();
    for (n, part) in parts.iter().enumerate() {
        if part.is_empty() {
            return Err(CliError::Config(format!("override key '{key}' is malformed")));
        }
        let table = node
            .as_table_mut()
            .ok_or_else(|| CliError::Config(format!("'{key}' does not address a table")))?;
        if n + 1 == parts.len() {
            table.insert(part.to_string(), value);
            return Ok(());
        }
        node = table
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(Default::default()));
    }
    Ok(())
}

fn parse_scalar(raw: &str) -> toml::Value {
    let wrapped = format!("v = {raw}");
    match toml::from_str::<toml::Table>(&wrapped) {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.into())),
        Err(_) => toml::Value::String(raw.into()),
    }
}
