//! Probe ensembles, depolarizing noise and Born-rule data synthesis.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{QmtError, Result};
use crate::linalg::{kron_product, trace_product_hermitian, CMatrix, C64, ONE, ZERO};
use crate::povm::{check_square_family, matrix_list_from_json, matrix_list_to_json, PovmSet};

/// Ordered list of density matrices used to probe the device.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeEnsemble {
    dim: usize,
    states: Vec<CMatrix>,
    label: String,
}

impl ProbeEnsemble {
    pub fn new(states: Vec<CMatrix>, label: impl Into<String>) -> Result<Self> {
        let dim = check_square_family(&states, "probe state")?;
        Ok(Self {
            dim,
            states,
            label: label.into(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[CMatrix] {
        &self.states
    }

    pub fn state(&self, j: usize) -> &CMatrix {
        &self.states[j]
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Applies the depolarizing channel to every state.
    pub fn depolarized(&self, lambda: f64) -> Result<ProbeEnsemble> {
        let states = self
            .states
            .iter()
            .map(|r| depolarize(r, lambda))
            .collect::<Result<Vec<_>>>()?;
        ProbeEnsemble::new(states, format!("{}-depol{lambda}", self.label))
    }

    pub fn to_json(&self) -> String {
        matrix_list_to_json(self.dim, &self.states)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let (_, states) = matrix_list_from_json(text)?;
        ProbeEnsemble::new(states, "loaded")
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()).map_err(|e| QmtError::io(path, e))
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| QmtError::io(path, e))?;
        Self::from_json(&text)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    #[default]
    None,
    Depolarizing,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct NoiseSpec {
    #[serde(default)]
    pub kind: NoiseKind,
    #[serde(default)]
    pub lambda: f64,
}

impl NoiseSpec {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn depolarizing(lambda: f64) -> Result<Self> {
        let spec = Self {
            kind: NoiseKind::Depolarizing,
            lambda,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(QmtError::InvalidArgument(format!(
                "noise strength must lie in [0, 1], got {}",
                self.lambda
            )));
        }
        Ok(())
    }

    /// Effective channel strength (zero when no noise is configured).
    pub fn strength(&self) -> f64 {
        match self.kind {
            NoiseKind::None => 0.0,
            NoiseKind::Depolarizing => self.lambda,
        }
    }
}

/// Outcome probabilities `p_ij`, `k` rows (outcomes) by `J` columns (probes).
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityTable {
    k: usize,
    n_probes: usize,
    values: Vec<f64>,
}

impl ProbabilityTable {
    pub fn from_rows(k: usize, n_probes: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != k * n_probes {
            return Err(QmtError::Dimension(format!(
                "table {k}x{n_probes} needs {} values, got {}",
                k * n_probes,
                values.len()
            )));
        }
        Ok(Self { k, n_probes, values })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n_probes(&self) -> usize {
        self.n_probes
    }

    #[inline]
    pub fn get(&self, outcome: usize, probe: usize) -> f64 {
        self.values[outcome * self.n_probes + probe]
    }

    pub fn column(&self, probe: usize) -> Vec<f64> {
        (0..self.k).map(|i| self.get(i, probe)).collect()
    }

    pub fn row(&self, outcome: usize) -> &[f64] {
        &self.values[outcome * self.n_probes..(outcome + 1) * self.n_probes]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Largest |Σ_i p_ij − 1| over probes.
    pub fn max_column_defect(&self) -> f64 {
        (0..self.n_probes)
            .map(|j| ((0..self.k).map(|i| self.get(i, j)).sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// CSV with header `outcome,probe,probability`, outcome-major.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("outcome,probe,probability\n");
        for i in 0..self.k {
            for j in 0..self.n_probes {
                let _ = writeln!(out, "{i},{j},{}", fmt_f64(self.get(i, j)));
            }
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        match lines.next() {
            Some(h) if h.trim() == "outcome,probe,probability" => {}
            other => {
                return Err(QmtError::Parse(format!(
                    "expected header 'outcome,probe,probability', found {other:?}"
                )))
            }
        }
        let mut entries = Vec::new();
        for (n, line) in lines.enumerate() {
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 3 {
                return Err(QmtError::Parse(format!("line {}: expected 3 fields", n + 2)));
            }
            let parse_err = |what: &str| QmtError::Parse(format!("line {}: bad {what}", n + 2));
            let i: usize = fields[0].parse().map_err(|_| parse_err("outcome"))?;
            let j: usize = fields[1].parse().map_err(|_| parse_err("probe"))?;
            let p: f64 = fields[2].parse().map_err(|_| parse_err("probability"))?;
            entries.push((i, j, p));
        }
        let k = entries.iter().map(|e| e.0 + 1).max().unwrap_or(0);
        let n_probes = entries.iter().map(|e| e.1 + 1).max().unwrap_or(0);
        if entries.len() != k * n_probes {
            return Err(QmtError::Parse(format!(
                "expected {} rows for a {k}x{n_probes} table, found {}",
                k * n_probes,
                entries.len()
            )));
        }
        let mut values = vec![f64::NAN; k * n_probes];
        for (i, j, p) in entries {
            values[i * n_probes + j] = p;
        }
        if values.iter().any(|v| v.is_nan()) {
            return Err(QmtError::Parse("duplicate (outcome, probe) rows".into()));
        }
        Self::from_rows(k, n_probes, values)
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv()).map_err(|e| QmtError::io(path, e))
    }

    pub fn load_csv(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| QmtError::io(path, e))?;
        Self::from_csv(&text)
    }
}

/// 17 significant digits, scientific notation.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// The four single-qubit probes |0⟩⟨0|, |1⟩⟨1|, |+⟩⟨+|, |+i⟩⟨+i|.
pub fn single_qubit_probes() -> [CMatrix; 4] {
    let half = C64::new(0.5, 0.0);
    let i_half = C64::new(0.0, 0.5);
    [
        CMatrix::from_real_diagonal(&[1.0, 0.0]),
        CMatrix::from_real_diagonal(&[0.0, 1.0]),
        CMatrix::from_vec(2, 2, vec![half, half, half, half]).expect("2x2"),
        CMatrix::from_vec(2, 2, vec![half, -i_half, i_half, half]).expect("2x2"),
    ]
}

/// All 4^N tensor products of the single-qubit probe set, lexicographic in
/// the per-qubit indices (first qubit most significant).
pub fn dv_probe_ensemble(n_qubits: usize) -> Result<ProbeEnsemble> {
    if n_qubits == 0 {
        return Err(QmtError::InvalidArgument("need at least one qubit".into()));
    }
    let single = single_qubit_probes();
    let mut states = vec![CMatrix::identity(1)];
    for _ in 0..n_qubits {
        states = states
            .iter()
            .flat_map(|s| single.iter().map(move |p| kron_product(s, p)))
            .collect();
    }
    ProbeEnsemble::new(states, format!("dv-{n_qubits}q"))
}

/// Fock amplitudes e^{−|α|²/2} αⁿ/√(n!) for n < dim, without renormalization.
pub fn coherent_coefficients(alpha: C64, dim: usize) -> Vec<C64> {
    let mut out = Vec::with_capacity(dim);
    let mut c = C64::new((-0.5 * alpha.norm_sqr()).exp(), 0.0);
    for n in 0..dim {
        if n > 0 {
            c = c * alpha / (n as f64).sqrt();
        }
        out.push(c);
    }
    out
}

/// Truncated coherent state |α⟩⟨α|, renormalized to unit trace.
pub fn coherent_state(alpha: C64, dim: usize) -> CMatrix {
    let mut c = coherent_coefficients(alpha, dim);
    let norm = c.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    for z in &mut c {
        *z /= norm;
    }
    CMatrix::projector(&c)
}

/// Equally spaced points on [−a, a]; a single point sits at the origin.
fn linspace_symmetric(a: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![0.0];
    }
    (0..n).map(|i| -a + 2.0 * a * i as f64 / (n - 1) as f64).collect()
}

/// Coherent probes on a square grid α = x + iy, row-major over (x, y).
pub fn coherent_probe_grid(alpha_max: f64, points_per_axis: usize, dim: usize) -> Result<ProbeEnsemble> {
    if points_per_axis == 0 || dim == 0 {
        return Err(QmtError::InvalidArgument(format!(
            "coherent grid needs points ≥ 1 and dim ≥ 1, got points={points_per_axis}, dim={dim}"
        )));
    }
    if !(alpha_max >= 0.0) || !alpha_max.is_finite() {
        return Err(QmtError::InvalidArgument(format!("invalid alpha_max {alpha_max}")));
    }
    let axis = linspace_symmetric(alpha_max, points_per_axis);
    let states = axis
        .iter()
        .flat_map(|&x| axis.iter().map(move |&y| C64::new(x, y)))
        .map(|alpha| coherent_state(alpha, dim))
        .collect();
    ProbeEnsemble::new(states, format!("coherent-a{alpha_max}-p{points_per_axis}-d{dim}"))
}

/// (1−λ)ρ + λ I/d
pub fn depolarize(rho: &CMatrix, lambda: f64) -> Result<CMatrix> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(QmtError::InvalidArgument(format!(
            "depolarizing strength must lie in [0, 1], got {lambda}"
        )));
    }
    if !rho.is_square() {
        return Err(QmtError::Dimension("density matrix must be square".into()));
    }
    let d = rho.rows();
    let mut out = rho.scale_real(1.0 - lambda);
    for i in 0..d {
        out[(i, i)] += C64::new(lambda / d as f64, 0.0);
    }
    Ok(out)
}

/// Exact Born-rule probabilities Tr(Π_i ρ̃_j), where ρ̃_j is ρ_j after the
/// configured noise channel.
pub fn generate_dataset(povm: &PovmSet, probes: &ProbeEnsemble, noise: NoiseSpec) -> Result<ProbabilityTable> {
    if povm.dim() != probes.dim() {
        return Err(QmtError::Dimension(format!(
            "POVM acts on dimension {} but probes live in dimension {}",
            povm.dim(),
            probes.dim()
        )));
    }
    noise.validate()?;
    let noisy;
    let states = match noise.kind {
        NoiseKind::Depolarizing if noise.lambda > 0.0 => {
            noisy = probes.depolarized(noise.lambda)?;
            noisy.states()
        }
        _ => probes.states(),
    };
    let k = povm.k();
    let n_probes = states.len();
    let values: Vec<f64> = (0..k * n_probes)
        .into_par_iter()
        .map(|idx| {
            let (i, j) = (idx / n_probes, idx % n_probes);
            trace_product_hermitian(povm.element(i), &states[j])
        })
        .collect();
    ProbabilityTable::from_rows(k, n_probes, values)
}

/// Born-rule column for a single probe state.
pub fn born_column(povm: &PovmSet, rho: &CMatrix) -> Vec<f64> {
    povm.elements().iter().map(|p| trace_product_hermitian(p, rho)).collect()
}

/// |n⟩ as a vector of length dim.
pub fn fock_vector(n: usize, dim: usize) -> Vec<C64> {
    let mut v = vec![ZERO; dim];
    v[n] = ONE;
    v
}
