//! POVM sets: construction for each measurement scenario, validity checks
//! and the JSON matrix-list format.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{QmtError, Result};
use crate::linalg::{herm_eig, kron_product, kron_vec, CMatrix, C64, ONE, ZERO};
use crate::rng;
use crate::sgd::HonestFactors;

pub const DEFAULT_VALIDITY_TOL: f64 = 1e-8;

/// Ordered list of `k` effects acting on a `dim`-dimensional space.
#[derive(Debug, Clone, PartialEq)]
pub struct PovmSet {
    dim: usize,
    elements: Vec<CMatrix>,
    label: String,
}

impl PovmSet {
    /// Wraps a list of square matrices of a common size. Validity (positivity
    /// and completeness) is not enforced here; use [`validate_povm`].
    pub fn new(elements: Vec<CMatrix>, label: impl Into<String>) -> Result<Self> {
        let dim = check_square_family(&elements, "POVM element")?;
        Ok(Self {
            dim,
            elements,
            label: label.into(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn k(&self) -> usize {
        self.elements.len()
    }

    pub fn elements(&self) -> &[CMatrix] {
        &self.elements
    }

    pub fn element(&self, i: usize) -> &CMatrix {
        &self.elements[i]
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn into_elements(self) -> Vec<CMatrix> {
        self.elements
    }

    /// Σ_i Π_i
    pub fn sum(&self) -> CMatrix {
        let mut acc = CMatrix::zeros(self.dim, self.dim);
        for e in &self.elements {
            acc += e;
        }
        acc
    }

    /// Π̃_i = (1−λ)Π_i + λ Tr(Π_i) I/d, the effects that see clean probes the
    /// way the original effects see depolarized ones.
    pub fn depolarized_dual(&self, lambda: f64) -> Result<PovmSet> {
        if !(0.0..=1.0).contains(&lambda) {
            return Err(QmtError::InvalidArgument(format!(
                "depolarizing strength must lie in [0, 1], got {lambda}"
            )));
        }
        let d = self.dim as f64;
        let elements = self
            .elements
            .iter()
            .map(|p| {
                let mut out = p.scale_real(1.0 - lambda);
                let shift = lambda * p.trace().re / d;
                for i in 0..self.dim {
                    out[(i, i)] += shift;
                }
                out
            })
            .collect();
        PovmSet::new(elements, format!("{}-dual", self.label))
    }

    pub fn to_json(&self) -> String {
        matrix_list_to_json(self.dim, &self.elements)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let (_, elements) = matrix_list_from_json(text)?;
        PovmSet::new(elements, "loaded")
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()).map_err(|e| QmtError::io(path, e))
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| QmtError::io(path, e))?;
        Self::from_json(&text)
    }
}

pub(crate) fn check_square_family(mats: &[CMatrix], what: &str) -> Result<usize> {
    let dim = match mats.first() {
        Some(m) => m.rows(),
        None => return Err(QmtError::InvalidArgument(format!("at least one {what} is required"))),
    };
    for (i, m) in mats.iter().enumerate() {
        if m.rows() != dim || m.cols() != dim {
            return Err(QmtError::Dimension(format!(
                "{what} {i} is {}x{}, expected {dim}x{dim}",
                m.rows(),
                m.cols()
            )));
        }
    }
    Ok(dim)
}

/// Worst-case defects of a candidate POVM.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ValidityReport {
    /// max_i ‖Π_i − Π_i†‖∞
    pub hermiticity_defect: f64,
    /// Most negative eigenvalue over all effects.
    pub min_eigenvalue: f64,
    /// ‖Σ_i Π_i − I‖∞
    pub completeness_defect: f64,
    pub is_valid: bool,
}

pub fn validate_povm(set: &PovmSet, tol: f64) -> Result<ValidityReport> {
    validate_elements(set.elements(), tol)
}

pub fn validate_elements(elements: &[CMatrix], tol: f64) -> Result<ValidityReport> {
    if !(tol > 0.0) {
        return Err(QmtError::InvalidArgument(format!("tolerance must be positive, got {tol}")));
    }
    let dim = check_square_family(elements, "POVM element")?;
    let mut herm = 0.0f64;
    let mut min_eig = f64::INFINITY;
    let mut sum = CMatrix::zeros(dim, dim);
    for e in elements {
        herm = herm.max(e.hermiticity_defect());
        let eig = herm_eig(e)?;
        min_eig = min_eig.min(eig.eigenvalues[0]);
        sum += e;
    }
    let completeness = (&sum - &CMatrix::identity(dim)).max_abs();
    Ok(ValidityReport {
        hermiticity_defect: herm,
        min_eigenvalue: min_eig,
        completeness_defect: completeness,
        is_valid: herm <= tol && min_eig >= -tol && completeness <= tol,
    })
}

/// A full-rank random POVM: Ginibre factors pushed through the `S^{-1/2}`
/// normalization.
pub fn random_povm_set(k: usize, d: usize, seed: u64) -> Result<PovmSet> {
    if k == 0 || d == 0 {
        return Err(QmtError::InvalidArgument(format!(
            "random POVM needs k ≥ 1 and d ≥ 1, got k={k}, d={d}"
        )));
    }
    let mut rng = rng::seeded(seed);
    let factors: Vec<CMatrix> = (0..k).map(|_| rng::ginibre(&mut rng, d, d)).collect();
    let honest = HonestFactors::new(factors)?;
    let set = honest.to_povm(1e-14)?;
    Ok(set.with_label(format!("random-k{k}-d{d}")))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PauliBasis {
    X,
    Y,
    Z,
}

impl PauliBasis {
    pub fn parse(c: char) -> Result<Self> {
        match c.to_ascii_uppercase() {
            'X' => Ok(PauliBasis::X),
            'Y' => Ok(PauliBasis::Y),
            'Z' => Ok(PauliBasis::Z),
            other => Err(QmtError::InvalidArgument(format!("invalid Pauli basis label '{other}'"))),
        }
    }

    pub fn as_char(self) -> char {
        match self {
            PauliBasis::X => 'X',
            PauliBasis::Y => 'Y',
            PauliBasis::Z => 'Z',
        }
    }

    /// Eigenvectors ordered (+1, −1).
    pub fn eigenvectors(self) -> [[C64; 2]; 2] {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let i = C64::new(0.0, h);
        let r = C64::new(h, 0.0);
        match self {
            PauliBasis::Z => [[ONE, ZERO], [ZERO, ONE]],
            PauliBasis::X => [[r, r], [r, -r]],
            PauliBasis::Y => [[r, i], [r, -i]],
        }
    }
}

/// Rank-1 projectors onto the product eigenbasis of a Pauli string, ordered
/// lexicographically by per-qubit eigenvalue with +1 before −1 and the first
/// qubit most significant.
pub fn pauli_projector_set(pauli_string: &str, n_qubits: usize) -> Result<PovmSet> {
    let bases: Vec<PauliBasis> = pauli_string.chars().map(PauliBasis::parse).collect::<Result<_>>()?;
    if bases.len() != n_qubits || n_qubits == 0 {
        return Err(QmtError::InvalidArgument(format!(
            "Pauli string '{pauli_string}' does not describe {n_qubits} qubit(s)"
        )));
    }
    let mut vectors: Vec<Vec<C64>> = vec![vec![ONE]];
    for basis in &bases {
        let evs = basis.eigenvectors();
        vectors = vectors
            .iter()
            .flat_map(|v| evs.iter().map(move |e| kron_vec(v, e)))
            .collect();
    }
    let elements = vectors.iter().map(|v| CMatrix::projector(v)).collect();
    PovmSet::new(elements, format!("pauli-{pauli_string}"))
}

/// {|0⟩⟨0|, |1⟩⟨1|}^{⊗N}
pub fn computational_basis_set(n_qubits: usize) -> Result<PovmSet> {
    let s: String = "Z".repeat(n_qubits);
    Ok(pauli_projector_set(&s, n_qubits)?.with_label(format!("computational-{n_qubits}q")))
}

/// Vacuum projector and its complement ("no click" / "click").
pub fn photon_detection_povm(dim: usize) -> Result<PovmSet> {
    if dim < 2 {
        return Err(QmtError::InvalidArgument(format!(
            "photon detection needs truncation dim ≥ 2, got {dim}"
        )));
    }
    let mut vacuum = vec![0.0; dim];
    vacuum[0] = 1.0;
    let mut click = vec![1.0; dim];
    click[0] = 0.0;
    PovmSet::new(
        vec![CMatrix::from_real_diagonal(&vacuum), CMatrix::from_real_diagonal(&click)],
        format!("photon-detection-{dim}"),
    )
}

/// Fock-state projectors |n⟩⟨n| for n = 0..dim.
pub fn photon_counting_povm(dim: usize) -> Result<PovmSet> {
    if dim == 0 {
        return Err(QmtError::InvalidArgument("photon counting needs dim ≥ 1".into()));
    }
    let elements = (0..dim)
        .map(|n| {
            let mut m = CMatrix::zeros(dim, dim);
            m[(n, n)] = ONE;
            m
        })
        .collect();
    PovmSet::new(elements, format!("photon-counting-{dim}"))
}

/// Tensor product of two POVMs, outcome order (i, j) with i major.
pub fn tensor_povm(a: &PovmSet, b: &PovmSet) -> Result<PovmSet> {
    let mut elements = Vec::with_capacity(a.k() * b.k());
    for x in a.elements() {
        for y in b.elements() {
            elements.push(kron_product(x, y));
        }
    }
    PovmSet::new(elements, format!("{}x{}", a.label(), b.label()))
}

#[derive(Serialize, Deserialize)]
struct MatrixListJson {
    dim: usize,
    k: usize,
    elements: Vec<Vec<[f64; 2]>>,
}

/// `{dim, k, elements: [[[re, im], ...], ...]}` with each matrix flattened
/// row-major.
pub(crate) fn matrix_list_to_json(dim: usize, mats: &[CMatrix]) -> String {
    let doc = MatrixListJson {
        dim,
        k: mats.len(),
        elements: mats
            .iter()
            .map(|m| m.as_slice().iter().map(|z| [z.re, z.im]).collect())
            .collect(),
    };
    serde_json::to_string(&doc).expect("matrix list serializes")
}

pub(crate) fn matrix_list_from_json(text: &str) -> Result<(usize, Vec<CMatrix>)> {
    let doc: MatrixListJson = serde_json::from_str(text).map_err(|e| QmtError::Parse(e.to_string()))?;
    if doc.k != doc.elements.len() {
        return Err(QmtError::Parse(format!(
            "header says k={} but {} matrices are present",
            doc.k,
            doc.elements.len()
        )));
    }
    let mats = doc
        .elements
        .into_iter()
        .map(|flat| {
            let data = flat.into_iter().map(|[re, im]| C64::new(re, im)).collect();
            CMatrix::from_vec(doc.dim, doc.dim, data)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((doc.dim, mats))
}
