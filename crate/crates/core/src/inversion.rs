//! Unconstrained linear inversion of Born-rule data.

use nalgebra::{DMatrix, SVD};

use crate::error::{QmtError, Result};
use crate::linalg::{CMatrix, C64};
use crate::probe::{ProbabilityTable, ProbeEnsemble};

/// Least-squares estimates of every effect, without positivity or
/// completeness constraints.
#[derive(Debug, Clone)]
pub struct LinearInversion {
    pub estimates: Vec<CMatrix>,
    /// Numerical rank of the sensing matrix (d² for informationally
    /// complete probes).
    pub rank: usize,
    pub rank_deficient: bool,
    /// σ_max/σ_min of the sensing matrix; infinite when rank deficient.
    pub condition_number: f64,
}

/// Real coordinates of a d×d Hermitian matrix: the diagonal, then
/// (Re, Im) of each upper off-diagonal entry.
fn sensing_row(rho: &CMatrix) -> Vec<f64> {
    let d = rho.rows();
    let mut row = Vec::with_capacity(d * d);
    for a in 0..d {
        row.push(rho[(a, a)].re);
    }
    for a in 0..d {
        for b in a + 1..d {
            // Tr(Xρ) picks up 2 Re(x_ab ρ_ba) from the pair (a,b),(b,a).
            row.push(2.0 * rho[(a, b)].re);
            row.push(2.0 * rho[(a, b)].im);
        }
    }
    row
}

fn hermitian_from_coords(d: usize, x: &[f64]) -> CMatrix {
    let mut out = CMatrix::zeros(d, d);
    for a in 0..d {
        out[(a, a)] = C64::new(x[a], 0.0);
    }
    let mut idx = d;
    for a in 0..d {
        for b in a + 1..d {
            let z = C64::new(x[idx], x[idx + 1]);
            out[(a, b)] = z;
            out[(b, a)] = z.conj();
            idx += 2;
        }
    }
    out
}

/// Solves p_ij = Tr(Π_i ρ_j) for each outcome i in the least-squares sense.
/// Rank-deficient probe sets yield the minimum-norm solution and a flag.
pub fn linear_inversion_baseline(table: &ProbabilityTable, probes: &ProbeEnsemble) -> Result<LinearInversion> {
    if table.n_probes() != probes.len() {
        return Err(QmtError::Dimension(format!(
            "table has {} probe columns but {} probe states were given",
            table.n_probes(),
            probes.len()
        )));
    }
    let d = probes.dim();
    let n = d * d;
    let j = probes.len();
    let rows: Vec<Vec<f64>> = probes.states().iter().map(sensing_row).collect();
    let a = DMatrix::from_fn(j, n, |r, c| rows[r][c]);
    let rhs = DMatrix::from_fn(j, table.k(), |r, i| table.get(i, r));

    let svd = SVD::new(a, true, true);
    let sigma = &svd.singular_values;
    let s_max = sigma.iter().cloned().fold(0.0, f64::max);
    let tol = s_max * (j.max(n) as f64) * f64::EPSILON;
    let rank = sigma.iter().filter(|&&s| s > tol).count();
    let rank_deficient = rank < n;
    let condition_number = if rank_deficient {
        f64::INFINITY
    } else {
        s_max / sigma.iter().cloned().fold(f64::INFINITY, f64::min)
    };
    let x = svd
        .solve(&rhs, tol)
        .map_err(|e| QmtError::Numeric(format!("least-squares solve failed: {e}")))?;

    let estimates = (0..table.k())
        .map(|i| {
            let col: Vec<f64> = x.column(i).iter().cloned().collect();
            hermitian_from_coords(d, &col)
        })
        .collect();
    Ok(LinearInversion {
        estimates,
        rank,
        rank_deficient,
        condition_number,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::trace_product;
    use crate::povm::{computational_basis_set, random_povm_set};
    use crate::probe::{dv_probe_ensemble, generate_dataset, NoiseSpec};
    use crate::rng;

    #[test]
    fn coordinates_reproduce_trace() {
        let mut r = rng::seeded(5);
        let g = rng::ginibre(&mut r, 3, 3);
        let x = &g + &g.adjoint();
        let h = rng::ginibre(&mut r, 3, 3);
        let rho = &h + &h.adjoint();
        let row = sensing_row(&rho);
        // coordinates of x in the same layout
        let mut coords = vec![x[(0, 0)].re, x[(1, 1)].re, x[(2, 2)].re];
        for a in 0..3 {
            for b in a + 1..3 {
                coords.push(x[(a, b)].re);
                coords.push(x[(a, b)].im);
            }
        }
        let dot: f64 = row.iter().zip(&coords).map(|(p, q)| p * q).sum();
        assert!((dot - trace_product(&x, &rho).unwrap().re).abs() < 1e-12);
        assert!((&hermitian_from_coords(3, &coords) - &x).max_abs() < 1e-15);
    }

    #[test]
    fn one_qubit_computational_basis() {
        let povm = computational_basis_set(1).unwrap();
        let probes = dv_probe_ensemble(1).unwrap();
        let table = generate_dataset(&povm, &probes, NoiseSpec::none()).unwrap();
        let inv = linear_inversion_baseline(&table, &probes).unwrap();
        assert!(!inv.rank_deficient);
        assert_eq!(inv.rank, 4);
        assert!(inv.condition_number.is_finite());
        for (e, t) in inv.estimates.iter().zip(povm.elements()) {
            assert!((e - t).max_abs() < 1e-10);
        }
    }

    #[test]
    fn completeness_survives_inversion() {
        let povm = random_povm_set(6, 4, 3).unwrap();
        let probes = dv_probe_ensemble(2).unwrap();
        let table = generate_dataset(&povm, &probes, NoiseSpec::none()).unwrap();
        let inv = linear_inversion_baseline(&table, &probes).unwrap();
        let mut sum = CMatrix::zeros(4, 4);
        for (e, t) in inv.estimates.iter().zip(povm.elements()) {
            assert!((e - t).max_abs() < 1e-9);
            sum += e;
        }
        assert!((&sum - &CMatrix::identity(4)).max_abs() < 1e-9);
    }

    #[test]
    fn single_mixed_probe_is_flagged() {
        let povm = computational_basis_set(1).unwrap();
        let probes = ProbeEnsemble::new(vec![CMatrix::identity(2).scale_real(0.5)], "mixed").unwrap();
        let table = generate_dataset(&povm, &probes, NoiseSpec::none()).unwrap();
        let inv = linear_inversion_baseline(&table, &probes).unwrap();
        assert!(inv.rank_deficient);
        assert_eq!(inv.rank, 1);
        assert!(inv.condition_number.is_infinite());
        // minimum-norm solution still reproduces the data
        for (i, e) in inv.estimates.iter().enumerate() {
            let p = trace_product(e, probes.state(0)).unwrap().re;
            assert!((p - table.get(i, 0)).abs() < 1e-12);
        }
    }
}
