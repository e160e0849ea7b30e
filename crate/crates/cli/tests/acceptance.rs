//! Acceptance checks. Each test prints one `[PASS]`/`[FAIL]` line with the
//! measured quantities, then asserts.

use std::fs;
use std::path::{Path, PathBuf};

use qmt_cli::{run_experiment, summary_csv, ExperimentConfig, RunRecord};
use qmt_core::inversion::linear_inversion_baseline;
use qmt_core::linalg::inv_sqrt_psd;
use qmt_core::povm::{computational_basis_set, random_povm_set, validate_povm};
use qmt_core::probe::{dv_probe_ensemble, generate_dataset};
use qmt_core::rng::{self, QmtRng};
use qmt_core::sgd::{
    grad_eval, grad_eval_frozen, loss_eval_frozen, sample_minibatch, stiefel_retract_step, Fitter, Gradient,
};
use qmt_core::{
    fit, frobenius_distance, score_reconstruction, wasserstein_distance, CMatrix, HonestFactors, HonestGradient,
    Loss, NoiseSpec, OptimConfig, Params, Parameterization, PovmSet, ProbeEnsemble, StiefelPoint, C64,
};
use rand::Rng;

fn report(id: u32, title: &str, pass: bool, detail: String) {
    println!("[{}] criterion {id:>2} {title}: {detail}", if pass { "PASS" } else { "FAIL" });
}

fn experiment(text: &str, dir: &Path) -> Vec<RunRecord> {
    let mut cfg = ExperimentConfig::from_toml(text).unwrap();
    cfg.out = Some(dir.join("run"));
    run_experiment(&cfg).unwrap().runs
}

// ---------------------------------------------------------------------------
// 1

fn random_probes(d: usize, count: usize, r: &mut QmtRng) -> ProbeEnsemble {
    let states = (0..count)
        .map(|_| {
            let g = rng::ginibre(r, d, d);
            let rho = g.adjoint_mul(&g).unwrap().hermitian_part();
            let t = rho.trace().re;
            rho.scale_real(1.0 / t)
        })
        .collect();
    ProbeEnsemble::new(states, "random").unwrap()
}

fn central_differences(factors: &[CMatrix], f: impl Fn(&[CMatrix]) -> f64) -> Vec<CMatrix> {
    let h = 1e-6;
    factors
        .iter()
        .enumerate()
        .map(|(b, t)| {
            CMatrix::from_fn(t.rows(), t.cols(), |r, c| {
                let mut parts = [0.0; 2];
                for (p, dir) in [C64::new(h, 0.0), C64::new(0.0, h)].into_iter().enumerate() {
                    let (mut plus, mut minus) = (factors.to_vec(), factors.to_vec());
                    plus[b][(r, c)] += dir;
                    minus[b][(r, c)] -= dir;
                    parts[p] = (f(&plus) - f(&minus)) / (2.0 * h);
                }
                C64::new(parts[0], parts[1])
            })
        })
        .collect()
}

#[test]
fn criterion_01_gradient_oracle() {
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    for seed in 0..24u64 {
        let mut r = rng::seeded(seed);
        let (d, k, j) = (r.gen_range(1..=4), r.gen_range(2..=4), r.gen_range(3..=8));
        let truth = random_povm_set(k, d, seed + 77).unwrap();
        let probes = random_probes(d, j, &mut r);
        let table = generate_dataset(&truth, &probes, NoiseSpec::none()).unwrap();
        let problem = qmt_core::sgd::Problem::new(&table, &probes).unwrap();
        let batch = sample_minibatch(&table, r.gen_range(1..=j), r.gen_range(1..=k), &mut r).unwrap();
        for p in [Parameterization::SM, Parameterization::HONEST] {
            for loss in [Loss::MSE, Loss::MLE] {
                let mut cfg = OptimConfig::new(p, loss);
                cfg.honest_gradient = HonestGradient::Frozen;
                let (factors, m, analytic) = match p {
                    Parameterization::SM => {
                        let point = StiefelPoint::random(k, d, None, &mut r).unwrap();
                        let Gradient::Stiefel(g) = grad_eval(&Params::Stiefel(point.clone()), &problem, &batch, &cfg).unwrap()
                        else { unreachable!() };
                        let blocks: Vec<CMatrix> = (0..k).map(|i| g.row_block(i * d, d)).collect();
                        (point.blocks(), CMatrix::identity(d), blocks)
                    }
                    Parameterization::HONEST => {
                        let h = HonestFactors::random(k, d, None, &mut r);
                        let m = inv_sqrt_psd(&h.gram(), cfg.clip_delta).unwrap();
                        let g = grad_eval_frozen(&h, &m, &problem, &batch, &cfg).unwrap();
                        (h.factors().to_vec(), m, g)
                    }
                };
                let fd = central_differences(&factors, |f| {
                    let h = HonestFactors::new(f.to_vec()).unwrap();
                    loss_eval_frozen(&h, &m, &problem, &batch, &cfg).unwrap()
                });
                let (mut diff, mut norm) = (0.0, 0.0);
                for (g, f) in analytic.iter().zip(&fd) {
                    let two_g = g.scale_real(2.0);
                    diff += (&two_g - f).frobenius_norm_sq();
                    norm += two_g.frobenius_norm_sq();
                }
                worst = worst.max(diff.sqrt() / norm.sqrt().max(1e-300));
                cases += 1;
            }
        }
    }
    let pass = worst <= 1e-5 && cases >= 20;
    report(1, "gradient vs central differences", pass, format!("{cases} cases, worst relative error {worst:.2e} (tol 1e-5)"));
    assert!(pass);
}

// ---------------------------------------------------------------------------
// 2

#[test]
fn criterion_02_manifold_preservation() {
    let mut r = rng::seeded(2);
    let mut point = StiefelPoint::random(8, 4, None, &mut r).unwrap();
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let grad = rng::ginibre(&mut r, 32, 4);
        point = stiefel_retract_step(&point, &grad, 0.05).unwrap();
        worst = worst.max(point.manifold_defect());
    }
    let pass = worst <= 1e-8;
    report(2, "Stiefel retraction, 1000 steps k=8 d=4", pass, format!("max defect {worst:.2e} (tol 1e-8)"));
    assert!(pass);
}

// ---------------------------------------------------------------------------
// 3

#[test]
fn criterion_03_honest_validity() {
    let truth = random_povm_set(8, 4, 3).unwrap();
    let probes = dv_probe_ensemble(2).unwrap();
    let table = generate_dataset(&truth, &probes, NoiseSpec::none()).unwrap();
    let mut worst = [0.0f64; 3];
    let mut all_valid = true;
    for renormalize in [false, true] {
        let mut cfg = OptimConfig::new(Parameterization::HONEST, Loss::MLE).with_iters(500).with_seed(3);
        cfg.renormalize_factors = renormalize;
        let mut fitter = Fitter::new(&table, &probes, &cfg, None).unwrap();
        for _ in 0..500 {
            fitter.step().unwrap();
            let v = validate_povm(&fitter.current_povm().unwrap(), 1e-7).unwrap();
            all_valid &= v.is_valid;
            worst[0] = worst[0].max(v.hermiticity_defect);
            worst[1] = worst[1].max(-v.min_eigenvalue);
            worst[2] = worst[2].max(v.completeness_defect);
        }
    }
    report(
        3,
        "HONEST POVM valid after every iteration, k=8 d=4",
        all_valid,
        format!("hermiticity {:.1e}, negativity {:.1e}, completeness {:.1e} (tol 1e-7)", worst[0], worst[1], worst[2]),
    );
    assert!(all_valid);
}

// ---------------------------------------------------------------------------
// 4 and 5

const FOUR_QUBITS: &str = r#"
repeats = 1
base_seed = 1
deterministic = true
methods = ["HONEST-MLE", "SM-MSE"]
[scenario]
kind = "computational_basis"
n_qubits = 4
[optimizer]
max_iters = 1500
state_batch = 50
snapshot_every = 50
"#;

#[test]
fn criteria_04_05_four_qubit_computational_basis() {
    let dir = tempfile::tempdir().unwrap();
    let runs = experiment(FOUR_QUBITS, dir.path());
    let honest = &runs[0].metrics;
    let sm = &runs[1].metrics;
    assert_eq!((runs[0].method.as_str(), runs[1].method.as_str()), ("HONEST-MLE", "SM-MSE"));

    let pass4 = honest.mean_frobenius <= 1e-8 && honest.mean_wasserstein <= 1e-5;
    report(
        4,
        "4-qubit computational basis, HONEST-MLE, 1500 iters",
        pass4,
        format!("mean frobenius_sq {:.2e} (tol 1e-8), mean wasserstein {:.2e} (tol 1e-5)", honest.mean_frobenius, honest.mean_wasserstein),
    );

    // plateau: every snapshot in the last third of the SM-MSE trace
    let trace = fs::read_to_string(&runs[1].trace_path).unwrap();
    let tail: Vec<f64> = trace
        .lines()
        .skip(1)
        .filter_map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            let it: usize = f[0].parse().ok()?;
            (it >= 1000).then(|| f[2].parse::<f64>().ok()).flatten()
        })
        .collect();
    let floor = tail.iter().cloned().fold(f64::INFINITY, f64::min);
    let pass5 = honest.mean_frobenius < sm.mean_frobenius && floor > 1e-5;
    report(
        5,
        "HONEST-MLE beats SM-MSE, SM-MSE plateaus",
        pass5,
        format!(
            "HONEST-MLE {:.2e} < SM-MSE {:.2e}; SM-MSE minimum over iters 1000..1500 {:.2e} (> 1e-5)",
            honest.mean_frobenius, sm.mean_frobenius, floor
        ),
    );
    assert!(pass4 && pass5);
}

// ---------------------------------------------------------------------------
// 6

#[test]
fn criterion_06_photon_detection() {
    let dir = tempfile::tempdir().unwrap();
    let runs = experiment(
        r#"
repeats = 1
base_seed = 1
methods = ["HONEST-MLE"]
[scenario]
kind = "photon_detection"
dim = 32
alpha_max = 5.0
grid_points = 32
[optimizer]
max_iters = 1000
snapshot_every = 100
"#,
        dir.path(),
    );
    let m = &runs[0].metrics;
    let pass = m.mean_frobenius <= 1e-5;
    report(
        6,
        "photon detection dim=32, 1000 iters",
        pass,
        format!("mean frobenius_sq {:.2e} (tol 1e-5), {:.1} s", m.mean_frobenius, runs[0].seconds),
    );
    assert!(pass);
}

// ---------------------------------------------------------------------------
// 7

/// Least-squares slope of log10(y) against x.
fn log_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let (sx, sy) = points.iter().fold((0.0, 0.0), |(a, b), &(x, y)| (a + x, b + y.log10()));
    let (mx, my) = (sx / n, sy / n);
    let (mut num, mut den) = (0.0, 0.0);
    for &(x, y) in points {
        num += (x - mx) * (y.log10() - my);
        den += (x - mx) * (x - mx);
    }
    num / den
}

#[test]
fn criterion_07_photon_counting() {
    let dir = tempfile::tempdir().unwrap();
    let runs = experiment(
        r#"
repeats = 1
base_seed = 1
methods = ["HONEST-MLE"]
[scenario]
kind = "photon_counting"
dim = 32
alpha_max = 9.0
grid_points = 32
[optimizer]
max_iters = 10000
snapshot_every = 100
"#,
        dir.path(),
    );
    let trace = fs::read_to_string(&runs[0].trace_path).unwrap();
    let window: Vec<(f64, f64)> = trace
        .lines()
        .skip(1)
        .filter_map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            let it: f64 = f[0].parse().ok()?;
            let frob: f64 = f[2].parse().ok()?;
            (it >= 8000.0).then_some((it, frob))
        })
        .collect();
    let slope = log_slope(&window);
    let m = &runs[0].metrics;
    let pass = m.mean_frobenius <= 1e-2 && slope < 0.0;
    report(
        7,
        "photon counting dim=32, 10000 iters",
        pass,
        format!(
            "mean frobenius_sq {:.2e} (tol 1e-2); log10 slope over last 2000 iters {:.2e}/iter ({} snapshots, must be < 0); {:.0} s",
            m.mean_frobenius,
            slope,
            window.len(),
            runs[0].seconds
        ),
    );
    assert!(pass);
}

// ---------------------------------------------------------------------------
// 8

#[test]
fn criterion_08_oracle_equivalence() {
    let truth = random_povm_set(4, 2, 8).unwrap();
    let probes = dv_probe_ensemble(1).unwrap();
    let table = generate_dataset(&truth, &probes, NoiseSpec::none()).unwrap();
    let inv = linear_inversion_baseline(&table, &probes).unwrap();
    let cfg = OptimConfig::new(Parameterization::HONEST, Loss::MLE).with_iters(2000).with_seed(8);
    let (est, _) = fit(&table, &probes, &cfg, None).unwrap();
    let mut worst = [0.0f64; 3];
    for i in 0..truth.k() {
        let (t, s, l) = (truth.element(i), est.element(i), &inv.estimates[i]);
        worst[0] = worst[0].max(frobenius_distance(t, s).unwrap());
        worst[1] = worst[1].max(frobenius_distance(t, l).unwrap());
        worst[2] = worst[2].max(frobenius_distance(s, l).unwrap());
    }
    let pass = worst.iter().all(|&w| w <= 1e-6) && !inv.rank_deficient;
    report(
        8,
        "1-qubit fit vs linear inversion vs truth",
        pass,
        format!(
            "per-element frobenius_sq max: fit/truth {:.1e}, inversion/truth {:.1e}, fit/inversion {:.1e} (tol 1e-6); condition number {:.2}",
            worst[0], worst[1], worst[2], inv.condition_number
        ),
    );
    assert!(pass);
}

// ---------------------------------------------------------------------------
// 9

#[test]
fn criterion_09_depolarizing_self_consistency() {
    let truth = computational_basis_set(2).unwrap();
    let probes = dv_probe_ensemble(2).unwrap();
    let d = truth.dim() as f64;
    let spread: f64 = truth
        .elements()
        .iter()
        .map(|p| (p - &CMatrix::identity(truth.dim()).scale_real(p.trace().re / d)).frobenius_norm_sq())
        .sum::<f64>()
        / truth.k() as f64;
    let mut all = true;
    let mut lines = Vec::new();
    for lambda in [0.1, 0.5, 0.9] {
        let table = generate_dataset(&truth, &probes, NoiseSpec::depolarizing(lambda).unwrap()).unwrap();
        let dual = truth.depolarized_dual(lambda).unwrap();
        let cfg = OptimConfig::new(Parameterization::HONEST, Loss::MLE).with_iters(2000).with_seed(9);
        let (est, _) = fit(&table, &probes, &cfg, None).unwrap();
        let to_dual = (0..truth.k())
            .map(|i| frobenius_distance(dual.element(i), est.element(i)).unwrap())
            .fold(0.0, f64::max);
        let vs_ideal = score_reconstruction(&truth, &est, &probes).unwrap().mean_frobenius;
        let expected = lambda * lambda * spread;
        let rel = (vs_ideal - expected).abs() / expected;
        let ok = to_dual <= 1e-6 && rel <= 0.1;
        all &= ok;
        lines.push(format!("λ={lambda}: to dual {to_dual:.1e}, vs ideal {vs_ideal:.4e} vs λ² form {expected:.4e} ({:.2}%)", rel * 100.0));
    }
    report(9, "depolarized data recovers the dual POVM", all, lines.join("; "));
    assert!(all);
}

// ---------------------------------------------------------------------------
// 10

#[test]
fn criterion_10_metric_examples() {
    let ket = |a: f64, b: f64| [C64::new(a, 0.0), C64::new(b, 0.0)];
    let p0 = CMatrix::projector(&ket(1.0, 0.0));
    let p1 = CMatrix::projector(&ket(0.0, 1.0));
    let mut r = rng::seeded(10);
    let a = rng::ginibre(&mut r, 3, 3);
    let b = rng::ginibre(&mut r, 3, 3);
    let entrywise: f64 = a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| (x - y).norm_sqr()).sum();
    let checks = [
        ("F(A,A)", frobenius_distance(&a, &a).unwrap(), 0.0),
        ("F(|0><0|,|1><1|)", frobenius_distance(&p0, &p1).unwrap(), 2.0),
        ("F entrywise", frobenius_distance(&a, &b).unwrap(), entrywise),
        ("W identical", wasserstein_distance(&[0.2, 0.8], &[0.2, 0.8]).unwrap(), 0.0),
        ("W k=2", wasserstein_distance(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 1.0),
        ("W k=3", wasserstein_distance(&[1.0, 0.0, 0.0], &[0.0, 0.0, 1.0]).unwrap(), 2.0),
    ];
    // 2-outcome, 2-probe toy: |1 − 0.75| and |0 − 0.5|
    let reference = computational_basis_set(1).unwrap();
    let est = PovmSet::new(
        vec![CMatrix::from_real_diagonal(&[0.75, 0.5]), CMatrix::from_real_diagonal(&[0.25, 0.5])],
        "toy",
    )
    .unwrap();
    let toy_probes = ProbeEnsemble::new(vec![p0.clone(), p1.clone()], "toy").unwrap();
    let toy = score_reconstruction(&reference, &est, &toy_probes).unwrap().mean_wasserstein;
    let worst = checks
        .iter()
        .map(|(_, got, want)| (got - want).abs())
        .chain([(toy - 0.375).abs()])
        .fold(0.0, f64::max);
    let pass = worst <= 1e-12;
    report(10, "metric hand examples", pass, format!("{} examples, max deviation {worst:.1e} (tol 1e-12)", checks.len() + 1));
    assert!(pass);
}

// ---------------------------------------------------------------------------
// 11

fn repo_config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

#[test]
fn criterion_11_determinism() {
    let mut identical = true;
    let mut files = 0;
    for (name, iters) in [("smoke.toml", None), ("photon_detection.toml", Some(30)), ("pauli.toml", Some(100))] {
        let mut base = ExperimentConfig::load(&repo_config(name)).unwrap();
        base.deterministic = true;
        base.repeats = base.repeats.min(2);
        if let Some(n) = iters {
            base.optimizer.max_iters = n;
        }
        let mut outputs = Vec::new();
        for _ in 0..2 {
            let dir = tempfile::tempdir().unwrap();
            let mut cfg = base.clone();
            cfg.out = Some(dir.path().join("run"));
            let report = run_experiment(&cfg).unwrap();
            let traces: Vec<Vec<u8>> = report.runs.iter().map(|r| fs::read(&r.trace_path).unwrap()).collect();
            outputs.push((traces, summary_csv(&report.runs, true)));
        }
        files += outputs[0].0.len();
        identical &= outputs[0] == outputs[1];
    }
    report(11, "deterministic mode reproduces traces byte for byte", identical, format!("{files} trace files compared across two runs each"));
    assert!(identical);
}
