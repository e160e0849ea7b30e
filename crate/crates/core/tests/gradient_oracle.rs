//! Analytic gradients against central finite differences of the loss.
//!
//! The analytic gradient is the conjugate-coordinate derivative ∂L/∂T̄. For a
//! real loss, (∂L/∂Re T + i ∂L/∂Im T) = 2 ∂L/∂T̄, which is what the difference
//! quotients below estimate.

use qmt_core::linalg::inv_sqrt_psd;
use qmt_core::povm::random_povm_set;
use qmt_core::probe::{generate_dataset, NoiseSpec};
use qmt_core::rng::{self, QmtRng};
use qmt_core::sgd::{
    grad_eval, grad_eval_frozen, loss_eval, loss_eval_frozen, sample_minibatch, Gradient, MiniBatch, Problem,
};
use qmt_core::{CMatrix, HonestFactors, HonestGradient, Loss, OptimConfig, Params, Parameterization};
use qmt_core::{ProbabilityTable, ProbeEnsemble, StiefelPoint, C64};
use rand::Rng;

const STEP: f64 = 1e-6;
const REL_TOL: f64 = 1e-5;

fn random_probes(d: usize, count: usize, rng: &mut QmtRng) -> ProbeEnsemble {
    let states = (0..count)
        .map(|_| {
            let g = rng::ginibre(rng, d, d);
            let rho = g.adjoint_mul(&g).unwrap().hermitian_part();
            let t = rho.trace().re;
            rho.scale_real(1.0 / t)
        })
        .collect();
    ProbeEnsemble::new(states, "random").unwrap()
}

struct Instance {
    table: ProbabilityTable,
    probes: ProbeEnsemble,
    batch: MiniBatch,
    k: usize,
    d: usize,
}

fn instance(seed: u64) -> Instance {
    let mut rng = rng::seeded(seed);
    let d = rng.gen_range(1..=4);
    let k = rng.gen_range(2..=4);
    let j = rng.gen_range(3..=8);
    let truth = random_povm_set(k, d, seed + 1000).unwrap();
    let probes = random_probes(d, j, &mut rng);
    let table = generate_dataset(&truth, &probes, NoiseSpec::none()).unwrap();
    let m = rng.gen_range(1..=j);
    let n = rng.gen_range(1..=k);
    let batch = sample_minibatch(&table, m, n, &mut rng).unwrap();
    Instance { table, probes, batch, k, d }
}

/// Central differences of `f` over the real and imaginary part of every
/// entry of every factor.
fn finite_difference(factors: &[CMatrix], f: impl Fn(&[CMatrix]) -> f64) -> Vec<CMatrix> {
    factors
        .iter()
        .enumerate()
        .map(|(b, t)| {
            CMatrix::from_fn(t.rows(), t.cols(), |r, c| {
                let mut parts = [0.0; 2];
                for (p, dir) in [C64::new(STEP, 0.0), C64::new(0.0, STEP)].into_iter().enumerate() {
                    let mut plus = factors.to_vec();
                    let mut minus = factors.to_vec();
                    plus[b][(r, c)] += dir;
                    minus[b][(r, c)] -= dir;
                    parts[p] = (f(&plus) - f(&minus)) / (2.0 * STEP);
                }
                C64::new(parts[0], parts[1])
            })
        })
        .collect()
}

fn relative_error(analytic: &[CMatrix], fd: &[CMatrix]) -> f64 {
    let (mut diff, mut norm) = (0.0, 0.0);
    for (g, f) in analytic.iter().zip(fd) {
        let two_g = g.scale_real(2.0);
        diff += (&two_g - f).frobenius_norm_sq();
        norm += two_g.frobenius_norm_sq();
    }
    diff.sqrt() / norm.sqrt().max(1e-300)
}

fn stiefel_blocks(g: Gradient, rows: &[usize]) -> Vec<CMatrix> {
    let Gradient::Stiefel(stacked) = g else { panic!("expected stacked gradient") };
    let mut offset = 0;
    rows.iter()
        .map(|&r| {
            let b = stacked.row_block(offset, r);
            offset += r;
            b
        })
        .collect()
}

fn honest_blocks(g: Gradient) -> Vec<CMatrix> {
    let Gradient::Honest(gs) = g else { panic!("expected per-factor gradients") };
    gs
}

fn config(p: Parameterization, loss: Loss, seed: u64) -> OptimConfig {
    let mut cfg = OptimConfig::new(p, loss);
    if seed.is_multiple_of(3) {
        cfg.l1_weight = 0.01;
        cfg.nuclear_weight = 0.02;
    }
    cfg
}

#[test]
fn stiefel_gradient_matches_finite_differences() {
    let mut worst: f64 = 0.0;
    for seed in 0..12 {
        let inst = instance(seed);
        let problem = Problem::new(&inst.table, &inst.probes).unwrap();
        let point = StiefelPoint::random(inst.k, inst.d, None, &mut rng::seeded(seed + 50)).unwrap();
        let blocks = point.blocks();
        let identity = CMatrix::identity(inst.d);
        for loss in [Loss::MSE, Loss::MLE] {
            let mut cfg = config(Parameterization::SM, loss, seed);
            // the L1 term is not differentiable at zero entries
            cfg.l1_weight = 0.0;
            let g = grad_eval(&Params::Stiefel(point.clone()), &problem, &inst.batch, &cfg).unwrap();
            let analytic = stiefel_blocks(g, point.block_rows());
            // Π_i = T_i†T_i off the manifold is the identity-sandwich loss
            let fd = finite_difference(&blocks, |f| {
                let h = HonestFactors::new(f.to_vec()).unwrap();
                loss_eval_frozen(&h, &identity, &problem, &inst.batch, &cfg).unwrap()
            });
            let err = relative_error(&analytic, &fd);
            assert!(err <= REL_TOL, "seed {seed} {loss:?}: relative error {err:.3e}");
            worst = worst.max(err);
        }
    }
    eprintln!("SM worst relative error {worst:.3e}");
}

#[test]
fn frozen_honest_gradient_matches_finite_differences() {
    for seed in 100..112 {
        let inst = instance(seed);
        let problem = Problem::new(&inst.table, &inst.probes).unwrap();
        let h = HonestFactors::random(inst.k, inst.d, None, &mut rng::seeded(seed));
        let m = inv_sqrt_psd(&h.gram(), 1e-8).unwrap();
        for loss in [Loss::MSE, Loss::MLE] {
            let mut cfg = config(Parameterization::HONEST, loss, seed);
            cfg.l1_weight = 0.0;
            cfg.honest_gradient = HonestGradient::Frozen;
            let analytic = grad_eval_frozen(&h, &m, &problem, &inst.batch, &cfg).unwrap();
            let via_params = honest_blocks(grad_eval(&Params::Honest(h.clone()), &problem, &inst.batch, &cfg).unwrap());
            for (a, b) in analytic.iter().zip(&via_params) {
                assert!((a - b).max_abs() <= 1e-14);
            }
            let fd = finite_difference(h.factors(), |f| {
                let hf = HonestFactors::new(f.to_vec()).unwrap();
                loss_eval_frozen(&hf, &m, &problem, &inst.batch, &cfg).unwrap()
            });
            let err = relative_error(&analytic, &fd);
            assert!(err <= REL_TOL, "seed {seed} {loss:?}: relative error {err:.3e}");
        }
    }
}

#[test]
fn exact_honest_gradient_matches_finite_differences() {
    for seed in 200..212 {
        let inst = instance(seed);
        let problem = Problem::new(&inst.table, &inst.probes).unwrap();
        let h = HonestFactors::random(inst.k, inst.d, None, &mut rng::seeded(seed));
        for loss in [Loss::MSE, Loss::MLE] {
            let mut cfg = config(Parameterization::HONEST, loss, seed);
            cfg.l1_weight = 0.0;
            cfg.honest_gradient = HonestGradient::Exact;
            let analytic = honest_blocks(grad_eval(&Params::Honest(h.clone()), &problem, &inst.batch, &cfg).unwrap());
            let fd = finite_difference(h.factors(), |f| {
                let hf = HonestFactors::new(f.to_vec()).unwrap();
                loss_eval(&Params::Honest(hf), &problem, &inst.batch, &cfg).unwrap()
            });
            let err = relative_error(&analytic, &fd);
            assert!(err <= REL_TOL, "seed {seed} {loss:?}: relative error {err:.3e}");
        }
    }
}

#[test]
fn l1_gradient_away_from_zero_entries() {
    // Dense random effects have no zero entries, so the penalty is smooth.
    for seed in 300..306 {
        let inst = instance(seed);
        let problem = Problem::new(&inst.table, &inst.probes).unwrap();
        let h = HonestFactors::random(inst.k, inst.d, None, &mut rng::seeded(seed));
        let identity = CMatrix::identity(inst.d);
        let mut cfg = OptimConfig::new(Parameterization::HONEST, Loss::MSE);
        cfg.l1_weight = 0.05;
        let analytic = grad_eval_frozen(&h, &identity, &problem, &inst.batch, &cfg).unwrap();
        let fd = finite_difference(h.factors(), |f| {
            let hf = HonestFactors::new(f.to_vec()).unwrap();
            loss_eval_frozen(&hf, &identity, &problem, &inst.batch, &cfg).unwrap()
        });
        let err = relative_error(&analytic, &fd);
        assert!(err <= REL_TOL, "seed {seed}: relative error {err:.3e}");
    }
}

#[test]
fn frozen_direction_differs_from_exact_at_normalized_point() {
    // At S = I the normalizer still has a nonzero derivative, so the two
    // conventions disagree unless the data is fitted exactly.
    let inst = instance(7);
    let problem = Problem::new(&inst.table, &inst.probes).unwrap();
    let h = HonestFactors::random(inst.k.max(2), inst.d, None, &mut rng::seeded(1));
    let h = qmt_core::sgd::honest_renormalize(&h, 1e-8).unwrap();
    if h.k() != inst.k {
        return;
    }
    let mut cfg = OptimConfig::new(Parameterization::HONEST, Loss::MLE);
    let exact = honest_blocks(grad_eval(&Params::Honest(h.clone()), &problem, &inst.batch, &cfg).unwrap());
    cfg.honest_gradient = HonestGradient::Frozen;
    let frozen = honest_blocks(grad_eval(&Params::Honest(h), &problem, &inst.batch, &cfg).unwrap());
    let diff: f64 = exact.iter().zip(&frozen).map(|(a, b)| (a - b).frobenius_norm_sq()).sum();
    assert!(diff.sqrt() > 1e-6);
}
