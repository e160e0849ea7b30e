//! The two POVM parameterizations.

use crate::error::{QmtError, Result};
use crate::linalg::{herm_eig, inv_sqrt_psd, orthonormalize_columns, CMatrix, EigenDecomposition};
use crate::povm::PovmSet;
use crate::rng::{self, QmtRng};

/// Factors `T_i` stacked vertically into a matrix with orthonormal columns.
/// Block `i` has `block_rows[i]` rows (d for full rank).
#[derive(Debug, Clone, PartialEq)]
pub struct StiefelPoint {
    block_rows: Vec<usize>,
    stacked: CMatrix,
}

impl StiefelPoint {
    pub const MEMBERSHIP_TOL: f64 = 1e-6;

    pub fn new(stacked: CMatrix, block_rows: Vec<usize>) -> Result<Self> {
        if block_rows.is_empty() || block_rows.contains(&0) {
            return Err(QmtError::InvalidArgument("every block needs at least one row".into()));
        }
        let total: usize = block_rows.iter().sum();
        if total != stacked.rows() {
            return Err(QmtError::Dimension(format!(
                "block rows sum to {total} but the stacked matrix has {} rows",
                stacked.rows()
            )));
        }
        let point = Self { block_rows, stacked };
        let defect = point.manifold_defect();
        if defect > Self::MEMBERSHIP_TOL {
            return Err(QmtError::InvalidArgument(format!(
                "stacked factors are not column-orthonormal (defect {defect:.3e})"
            )));
        }
        Ok(point)
    }

    /// Full-rank point with `k` blocks of size d×d.
    pub fn from_stacked(stacked: CMatrix, k: usize) -> Result<Self> {
        let d = stacked.cols();
        Self::new(stacked, vec![d; k])
    }

    /// Every block equal to I/√k, i.e. Π_i = I/k.
    pub fn uniform(k: usize, d: usize) -> Self {
        let block = CMatrix::identity(d).scale_real(1.0 / (k as f64).sqrt());
        let stacked = CMatrix::vstack(&vec![block; k]).expect("equal widths");
        Self {
            block_rows: vec![d; k],
            stacked,
        }
    }

    /// Orthonormalized Ginibre matrix.
    pub fn random(k: usize, d: usize, rank: Option<usize>, rng: &mut QmtRng) -> Result<Self> {
        let r = rank.unwrap_or(d);
        if k * r < d {
            return Err(QmtError::InvalidArgument(format!(
                "{k} blocks of rank {r} cannot hold {d} orthonormal columns"
            )));
        }
        let g = rng::ginibre(rng, k * r, d);
        Ok(Self {
            block_rows: vec![r; k],
            stacked: orthonormalize_columns(&g)?,
        })
    }

    pub fn k(&self) -> usize {
        self.block_rows.len()
    }

    pub fn d(&self) -> usize {
        self.stacked.cols()
    }

    pub fn stacked(&self) -> &CMatrix {
        &self.stacked
    }

    pub fn block_rows(&self) -> &[usize] {
        &self.block_rows
    }

    pub(crate) fn replace_stacked(&mut self, stacked: CMatrix) {
        debug_assert_eq!(stacked.shape(), self.stacked.shape());
        self.stacked = stacked;
    }

    pub fn blocks(&self) -> Vec<CMatrix> {
        let mut offset = 0;
        self.block_rows
            .iter()
            .map(|&r| {
                let b = self.stacked.row_block(offset, r);
                offset += r;
                b
            })
            .collect()
    }

    /// ‖𝕋†𝕋 − I‖∞
    pub fn manifold_defect(&self) -> f64 {
        let gram = self.stacked.adjoint_mul(&self.stacked).expect("same rows");
        (&gram - &CMatrix::identity(self.d())).max_abs()
    }
}

/// Free factors `T_i` (each r_i×d) for the HONEST parameterization.
#[derive(Debug, Clone, PartialEq)]
pub struct HonestFactors {
    factors: Vec<CMatrix>,
}

impl HonestFactors {
    pub fn new(factors: Vec<CMatrix>) -> Result<Self> {
        let d = match factors.first() {
            Some(f) => f.cols(),
            None => return Err(QmtError::InvalidArgument("at least one factor is required".into())),
        };
        if let Some(i) = factors.iter().position(|f| f.cols() != d || f.rows() == 0) {
            return Err(QmtError::Dimension(format!(
                "factor {i} is {:?}, expected r×{d} with r ≥ 1",
                factors[i].shape()
            )));
        }
        Ok(Self { factors })
    }

    /// Ginibre factors scaled by 1/√(k·d).
    pub fn random(k: usize, d: usize, rank: Option<usize>, rng: &mut QmtRng) -> Self {
        let r = rank.unwrap_or(d);
        let scale = 1.0 / ((k * d) as f64).sqrt();
        Self {
            factors: (0..k).map(|_| rng::ginibre(rng, r, d).scale_real(scale)).collect(),
        }
    }

    pub fn k(&self) -> usize {
        self.factors.len()
    }

    pub fn d(&self) -> usize {
        self.factors[0].cols()
    }

    pub fn factors(&self) -> &[CMatrix] {
        &self.factors
    }

    pub(crate) fn factors_mut(&mut self) -> &mut [CMatrix] {
        &mut self.factors
    }

    /// S = Σ_i T_i†T_i
    pub fn gram(&self) -> CMatrix {
        let d = self.d();
        let mut s = CMatrix::zeros(d, d);
        for t in &self.factors {
            s += &t.adjoint_mul(t).expect("factor");
        }
        s.hermitian_part()
    }

    /// Π_i = S^{-1/2} T_i†T_i S^{-1/2}
    pub fn to_povm(&self, clip_delta: f64) -> Result<PovmSet> {
        let m = inv_sqrt_psd(&self.gram(), clip_delta)?;
        sandwiched_povm(&self.factors, Some(&m))
    }
}

/// `T_i ← T_i S^{-1/2}`, after which Σ T_i†T_i = I whenever S's spectrum
/// stays above the clip threshold.
pub fn honest_renormalize(factors: &HonestFactors, clip_delta: f64) -> Result<HonestFactors> {
    let m = inv_sqrt_psd(&factors.gram(), clip_delta)?;
    Ok(HonestFactors {
        factors: factors.factors.iter().map(|t| t * &m).collect(),
    })
}

/// Current optimizer parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum Params {
    Stiefel(StiefelPoint),
    Honest(HonestFactors),
}

impl Params {
    pub fn k(&self) -> usize {
        match self {
            Params::Stiefel(p) => p.k(),
            Params::Honest(h) => h.k(),
        }
    }

    pub fn d(&self) -> usize {
        match self {
            Params::Stiefel(p) => p.d(),
            Params::Honest(h) => h.d(),
        }
    }

    pub fn factors(&self) -> Vec<CMatrix> {
        match self {
            Params::Stiefel(p) => p.blocks(),
            Params::Honest(h) => h.factors().to_vec(),
        }
    }
}

/// Π_i = T_i†T_i on the Stiefel path, and the `S^{-1/2}` sandwich on the
/// HONEST path.
pub fn povm_from_params(params: &Params, clip_delta: f64) -> Result<PovmSet> {
    match params {
        Params::Stiefel(p) => sandwiched_povm(&p.blocks(), None),
        Params::Honest(h) => h.to_povm(clip_delta),
    }
}

/// (T_i M)†(T_i M) for each factor, or T_i†T_i when `m` is `None`.
pub(crate) fn sandwiched_povm(factors: &[CMatrix], m: Option<&CMatrix>) -> Result<PovmSet> {
    let elements = factors
        .iter()
        .map(|t| {
            let w = match m {
                Some(m) => t * m,
                None => t.clone(),
            };
            Ok(w.adjoint_mul(&w)?.hermitian_part())
        })
        .collect::<Result<Vec<_>>>()?;
    PovmSet::new(elements, "estimate")
}

/// Spectral data of S shared by the sandwich and its derivative.
pub(crate) struct Normalizer {
    pub eig: EigenDecomposition,
    pub inv_sqrt: CMatrix,
}

impl Normalizer {
    pub fn new(s: &CMatrix, clip_delta: f64) -> Result<Self> {
        let eig = herm_eig(s)?;
        let inv_sqrt = eig.apply_fn(|l| 1.0 / l.max(clip_delta).sqrt());
        Ok(Self { eig, inv_sqrt })
    }
}
