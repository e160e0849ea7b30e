//! Reconstruction-quality metrics.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{QmtError, Result};
use crate::linalg::CMatrix;
use crate::povm::PovmSet;
use crate::probe::{born_column, fmt_f64, ProbeEnsemble};

/// Tolerance on column normalization (and on negative entries) accepted by
/// [`wasserstein_distance`].
pub const NORMALIZATION_TOL: f64 = 1e-6;

/// Tr[(A−B)†(A−B)], the squared Frobenius norm of the difference.
pub fn frobenius_distance(a: &CMatrix, b: &CMatrix) -> Result<f64> {
    Ok(a.try_sub(b)?.frobenius_norm_sq())
}

/// Σ_{i<k} |C_ref(i) − C_est(i)| with C the running sum and unit spacing.
pub fn wasserstein_distance(p_ref: &[f64], p_est: &[f64]) -> Result<f64> {
    if p_ref.len() != p_est.len() {
        return Err(QmtError::Dimension(format!(
            "distributions have {} and {} outcomes",
            p_ref.len(),
            p_est.len()
        )));
    }
    for (name, p) in [("reference", p_ref), ("estimate", p_est)] {
        let total: f64 = p.iter().sum();
        if !total.is_finite() || (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(QmtError::InvalidArgument(format!("{name} distribution sums to {total}")));
        }
        if let Some(x) = p.iter().find(|&&x| x < -NORMALIZATION_TOL) {
            return Err(QmtError::InvalidArgument(format!("{name} distribution has negative entry {x}")));
        }
    }
    let (mut c_ref, mut c_est, mut w) = (0.0, 0.0, 0.0);
    for i in 0..p_ref.len().saturating_sub(1) {
        c_ref += p_ref[i];
        c_est += p_est[i];
        w += (c_ref - c_est).abs();
    }
    Ok(w)
}

/// Per-element and per-probe distances of one reconstruction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub frobenius: Vec<f64>,
    pub wasserstein: Vec<f64>,
    pub mean_frobenius: f64,
    pub std_frobenius: f64,
    pub mean_wasserstein: f64,
    pub std_wasserstein: f64,
}

impl MetricRecord {
    pub fn from_distances(frobenius: Vec<f64>, wasserstein: Vec<f64>) -> Self {
        let (mean_frobenius, std_frobenius) = mean_std(&frobenius);
        let (mean_wasserstein, std_wasserstein) = mean_std(&wasserstein);
        Self {
            frobenius,
            wasserstein,
            mean_frobenius,
            std_frobenius,
            mean_wasserstein,
            std_wasserstein,
        }
    }

    /// Rows `element_or_probe,kind,value`; summary rows use the index
    /// `mean` / `std`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("element_or_probe,kind,value\n");
        for (i, v) in self.frobenius.iter().enumerate() {
            let _ = writeln!(out, "{i},frobenius_sq,{}", fmt_f64(*v));
        }
        for (j, v) in self.wasserstein.iter().enumerate() {
            let _ = writeln!(out, "{j},wasserstein,{}", fmt_f64(*v));
        }
        let _ = writeln!(out, "mean,frobenius_sq,{}", fmt_f64(self.mean_frobenius));
        let _ = writeln!(out, "std,frobenius_sq,{}", fmt_f64(self.std_frobenius));
        let _ = writeln!(out, "mean,wasserstein,{}", fmt_f64(self.mean_wasserstein));
        let _ = writeln!(out, "std,wasserstein,{}", fmt_f64(self.std_wasserstein));
        out
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv()).map_err(|e| QmtError::io(path, e))
    }
}

/// Mean and population standard deviation; (0, 0) for an empty slice.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Scores `est` against `reference`. Outcomes are compared index by index.
pub fn score_reconstruction(reference: &PovmSet, est: &PovmSet, probes: &ProbeEnsemble) -> Result<MetricRecord> {
    if reference.k() != est.k() || reference.dim() != est.dim() {
        return Err(QmtError::Dimension(format!(
            "reference has k={}, d={} but estimate has k={}, d={}",
            reference.k(),
            reference.dim(),
            est.k(),
            est.dim()
        )));
    }
    if probes.dim() != reference.dim() {
        return Err(QmtError::Dimension(format!(
            "probes have dimension {} but the POVMs act on dimension {}",
            probes.dim(),
            reference.dim()
        )));
    }
    let frobenius = reference
        .elements()
        .iter()
        .zip(est.elements())
        .map(|(a, b)| frobenius_distance(a, b))
        .collect::<Result<Vec<_>>>()?;
    let wasserstein = probes
        .states()
        .par_iter()
        .map(|rho| wasserstein_distance(&born_column(reference, rho), &born_column(est, rho)))
        .collect::<Result<Vec<_>>>()?;
    Ok(MetricRecord::from_distances(frobenius, wasserstein))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::C64;
    use crate::povm::{computational_basis_set, random_povm_set};
    use crate::rng;

    #[test]
    fn frobenius_examples() {
        let p0 = CMatrix::projector(&[C64::new(1.0, 0.0), C64::new(0.0, 0.0)]);
        let p1 = CMatrix::projector(&[C64::new(0.0, 0.0), C64::new(1.0, 0.0)]);
        assert_eq!(frobenius_distance(&p0, &p0).unwrap(), 0.0);
        assert!((frobenius_distance(&p0, &p1).unwrap() - 2.0).abs() <= 1e-12);
        let mut r = rng::seeded(3);
        let a = rng::ginibre(&mut r, 4, 4);
        let b = rng::ginibre(&mut r, 4, 4);
        let entrywise: f64 = a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| (x - y).norm_sqr()).sum();
        let f = frobenius_distance(&a, &b).unwrap();
        assert!((f - entrywise).abs() <= 1e-12);
        assert!((f - frobenius_distance(&b, &a).unwrap()).abs() <= 1e-12);
        assert!(frobenius_distance(&a, &CMatrix::identity(3)).is_err());
    }

    #[test]
    fn wasserstein_examples() {
        assert_eq!(wasserstein_distance(&[0.3, 0.7], &[0.3, 0.7]).unwrap(), 0.0);
        assert!((wasserstein_distance(&[1.0, 0.0], &[0.0, 1.0]).unwrap() - 1.0).abs() <= 1e-12);
        assert!((wasserstein_distance(&[1.0, 0.0, 0.0], &[0.0, 0.0, 1.0]).unwrap() - 2.0).abs() <= 1e-12);
        assert!(wasserstein_distance(&[1.0], &[0.5, 0.5]).is_err());
        assert!(wasserstein_distance(&[0.5, 0.4], &[0.5, 0.5]).is_err());
    }

    #[test]
    fn toy_score() {
        // k=2, d=2, two probes. Reference: computational basis. Estimate:
        // Π̃_0 = diag(0.75, 0.5), Π̃_1 = diag(0.25, 0.5).
        let reference = computational_basis_set(1).unwrap();
        let est = PovmSet::new(
            vec![CMatrix::from_real_diagonal(&[0.75, 0.5]), CMatrix::from_real_diagonal(&[0.25, 0.5])],
            "toy",
        )
        .unwrap();
        let probes = ProbeEnsemble::new(
            vec![CMatrix::from_real_diagonal(&[1.0, 0.0]), CMatrix::from_real_diagonal(&[0.0, 1.0])],
            "toy",
        )
        .unwrap();
        let rec = score_reconstruction(&reference, &est, &probes).unwrap();
        // |1 − 0.75| and |0 − 0.5|
        assert!((rec.wasserstein[0] - 0.25).abs() <= 1e-12);
        assert!((rec.wasserstein[1] - 0.5).abs() <= 1e-12);
        assert!((rec.mean_wasserstein - 0.375).abs() <= 1e-12);
        assert!((rec.std_wasserstein - 0.125).abs() <= 1e-12);
        // 0.0625 + 0.25 per element
        assert!((rec.mean_frobenius - 0.3125).abs() <= 1e-12);
    }

    #[test]
    fn depolarized_dual_score() {
        let reference = random_povm_set(5, 3, 11).unwrap();
        let probes = ProbeEnsemble::new(
            (0..6).map(|s| {
                let g = rng::ginibre(&mut rng::seeded(s), 3, 3);
                let rho = g.adjoint_mul(&g).unwrap();
                let t = rho.trace().re;
                rho.scale_real(1.0 / t).hermitian_part()
            }).collect(),
            "random",
        )
        .unwrap();
        let d = 3.0;
        for lambda in [0.1, 0.5, 0.9] {
            let est = reference.depolarized_dual(lambda).unwrap();
            let rec = score_reconstruction(&reference, &est, &probes).unwrap();
            let expected: f64 = reference
                .elements()
                .iter()
                .map(|p| {
                    let shift = CMatrix::identity(3).scale_real(p.trace().re / d);
                    lambda * lambda * (p - &shift).frobenius_norm_sq()
                })
                .sum::<f64>()
                / reference.k() as f64;
            assert!((rec.mean_frobenius - expected).abs() <= 1e-12);
        }
        let same = score_reconstruction(&reference, &reference, &probes).unwrap();
        assert!(same.frobenius.iter().chain(&same.wasserstein).all(|&x| x == 0.0));
    }

    #[test]
    fn csv_has_summary_rows() {
        let rec = MetricRecord::from_distances(vec![1.0, 3.0], vec![0.5]);
        let csv = rec.to_csv();
        assert!(csv.starts_with("element_or_probe,kind,value\n0,frobenius_sq,"));
        assert!(csv.contains("mean,frobenius_sq,2.0000000000000000e0"));
        assert!(csv.contains("std,frobenius_sq,1.0000000000000000e0"));
        assert!(csv.contains("0,wasserstein,5.0000000000000000e-1"));
    }
}
