//! Losses, mini-batches and Wirtinger gradients.
//!
//! Gradients are ∂L/∂T̄ for each factor. Both parameterizations share one
//! backward pass: first the Hermitian sensitivity E_i = ∂L/∂Π_i, then the
//! chain rule through Π_i = (T_i M)†(T_i M), where M is the identity (SM),
//! `S^{-1/2}` held fixed (frozen HONEST), or `S^{-1/2}` differentiated
//! through its eigendecomposition (exact HONEST).

use rand::seq::index;

use super::config::{HonestGradient, Loss, OptimConfig};
use super::params::{HonestFactors, Normalizer, Params, StiefelPoint};
use crate::error::{QmtError, Result};
use crate::linalg::{trace_product_hermitian, CMatrix, C64, ZERO};
use crate::probe::{ProbabilityTable, ProbeEnsemble};
use crate::rng::QmtRng;

/// Measured data together with the probes that produced it.
#[derive(Debug, Clone, Copy)]
pub struct Problem<'a> {
    pub table: &'a ProbabilityTable,
    pub probes: &'a ProbeEnsemble,
}

impl<'a> Problem<'a> {
    pub fn new(table: &'a ProbabilityTable, probes: &'a ProbeEnsemble) -> Result<Self> {
        if table.n_probes() != probes.len() {
            return Err(QmtError::Dimension(format!(
                "table has {} probe columns but {} probe states were given",
                table.n_probes(),
                probes.len()
            )));
        }
        Ok(Self { table, probes })
    }

    pub fn k(&self) -> usize {
        self.table.k()
    }

    pub fn dim(&self) -> usize {
        self.probes.dim()
    }
}

/// Cartesian product of a probe subset and an outcome subset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MiniBatch {
    pub probes: Vec<usize>,
    pub outcomes: Vec<usize>,
}

impl MiniBatch {
    pub fn full(k: usize, n_probes: usize) -> Self {
        Self {
            probes: (0..n_probes).collect(),
            outcomes: (0..k).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.probes.len() * self.outcomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.outcomes
            .iter()
            .flat_map(move |&i| self.probes.iter().map(move |&j| (i, j)))
    }
}

/// Draws `m` probes and `n` outcomes uniformly without replacement.
pub fn sample_minibatch(table: &ProbabilityTable, m: usize, n: usize, rng: &mut QmtRng) -> Result<MiniBatch> {
    if m > table.n_probes() || n > table.k() {
        return Err(QmtError::InvalidArgument(format!(
            "cannot draw {m} of {} probes and {n} of {} outcomes",
            table.n_probes(),
            table.k()
        )));
    }
    if m == 0 || n == 0 {
        return Err(QmtError::EmptyBatch);
    }
    let mut probes = index::sample(rng, table.n_probes(), m).into_vec();
    let mut outcomes = index::sample(rng, table.k(), n).into_vec();
    probes.sort_unstable();
    outcomes.sort_unstable();
    Ok(MiniBatch { probes, outcomes })
}

/// Gradient with the same layout as the parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum Gradient {
    /// (Σ r_i)×d, blocks stacked like the point.
    Stiefel(CMatrix),
    Honest(Vec<CMatrix>),
}

impl Gradient {
    pub fn norm(&self) -> f64 {
        match self {
            Gradient::Stiefel(g) => g.frobenius_norm(),
            Gradient::Honest(gs) => gs.iter().map(CMatrix::frobenius_norm_sq).sum::<f64>().sqrt(),
        }
    }
}

/// How effects are formed from factors.
pub(crate) enum Sandwich<'m> {
    /// Π = T†T
    None,
    /// Π = M T†T M with M = S^{-1/2} held constant.
    Frozen(&'m CMatrix),
    /// Π = M T†T M with M = S^{-1/2}(T) differentiated.
    Exact(Normalizer),
}

impl Sandwich<'_> {
    fn matrix(&self) -> Option<&CMatrix> {
        match self {
            Sandwich::None => None,
            Sandwich::Frozen(m) => Some(m),
            Sandwich::Exact(n) => Some(&n.inv_sqrt),
        }
    }
}

pub(crate) struct Evaluation {
    pub loss: f64,
    pub grads: Option<Vec<CMatrix>>,
}

fn check_factors(factors: &[CMatrix], problem: &Problem) -> Result<()> {
    if factors.len() != problem.k() {
        return Err(QmtError::Dimension(format!(
            "parameters describe {} effects but the data has {} outcomes",
            factors.len(),
            problem.k()
        )));
    }
    if factors.iter().any(|t| t.cols() != problem.dim()) {
        return Err(QmtError::Dimension(format!(
            "factor width does not match probe dimension {}",
            problem.dim()
        )));
    }
    Ok(())
}

/// Elementwise complex sign, sign(0) = 0.
fn elementwise_sign(m: &CMatrix) -> CMatrix {
    CMatrix::from_fn(m.rows(), m.cols(), |r, c| {
        let z = m[(r, c)];
        let n = z.norm();
        if n == 0.0 {
            ZERO
        } else {
            z / n
        }
    })
}

/// Divided difference of f(λ) = max(λ, δ)^{-1/2}.
fn inv_sqrt_divided_difference(a: f64, b: f64, delta: f64) -> f64 {
    let (ca, cb) = (a > delta, b > delta);
    match (ca, cb) {
        (true, true) => {
            let (sa, sb) = (a.sqrt(), b.sqrt());
            -1.0 / (sa * sb * (sa + sb))
        }
        (false, false) => 0.0,
        _ => {
            let f = |x: f64| 1.0 / x.max(delta).sqrt();
            (f(a) - f(b)) / (a - b)
        }
    }
}

pub(crate) fn evaluate_factors(
    factors: &[CMatrix],
    sandwich: &Sandwich,
    problem: &Problem,
    batch: &MiniBatch,
    config: &OptimConfig,
    want_grad: bool,
) -> Result<Evaluation> {
    check_factors(factors, problem)?;
    if batch.is_empty() {
        return Err(QmtError::EmptyBatch);
    }
    if let Some(&j) = batch.probes.iter().find(|&&j| j >= problem.table.n_probes()) {
        return Err(QmtError::InvalidArgument(format!("probe index {j} out of range")));
    }
    if let Some(&i) = batch.outcomes.iter().find(|&&i| i >= problem.k()) {
        return Err(QmtError::InvalidArgument(format!("outcome index {i} out of range")));
    }
    let k = factors.len();
    let d = problem.dim();
    let m = sandwich.matrix();
    let regularized = config.l1_weight > 0.0 || config.nuclear_weight > 0.0;

    let mut in_batch = vec![false; k];
    for &i in &batch.outcomes {
        in_batch[i] = true;
    }
    let needed: Vec<bool> = (0..k).map(|i| in_batch[i] || regularized).collect();

    let effects: Vec<Option<CMatrix>> = factors
        .iter()
        .zip(&needed)
        .map(|(t, &need)| {
            if !need {
                return Ok(None);
            }
            let w = match m {
                Some(m) => t * m,
                None => t.clone(),
            };
            Ok(Some(w.adjoint_mul(&w)?.hermitian_part()))
        })
        .collect::<Result<_>>()?;

    let scale = 1.0 / batch.len() as f64;
    let mut loss = 0.0;
    let mut sens: Vec<Option<CMatrix>> = vec![None; k];
    for &i in &batch.outcomes {
        let pi = effects[i].as_ref().expect("batch effect");
        let mut e_i = CMatrix::zeros(d, d);
        for &j in &batch.probes {
            let rho = problem.probes.state(j);
            let p = problem.table.get(i, j);
            let q = trace_product_hermitian(pi, rho);
            let coeff = match config.loss {
                Loss::MSE => {
                    let r = p - q;
                    loss += r * r;
                    -2.0 * r
                }
                Loss::MLE => {
                    let qc = q.max(config.mle_floor);
                    if p != 0.0 {
                        loss -= p * qc.ln();
                    }
                    -p / qc
                }
            };
            if want_grad && coeff != 0.0 {
                e_i.axpy(C64::new(coeff * scale, 0.0), rho);
            }
        }
        sens[i] = Some(e_i);
    }
    loss *= scale;

    if regularized {
        for i in 0..k {
            let pi = effects[i].as_ref().expect("regularized effect");
            let e_i = sens[i].get_or_insert_with(|| CMatrix::zeros(d, d));
            if config.l1_weight > 0.0 {
                loss += config.l1_weight * pi.as_slice().iter().map(|z| z.norm()).sum::<f64>();
                if want_grad {
                    e_i.axpy(C64::new(config.l1_weight, 0.0), &elementwise_sign(pi));
                }
            }
            if config.nuclear_weight > 0.0 {
                loss += config.nuclear_weight * pi.trace().re;
                if want_grad {
                    for r in 0..d {
                        e_i[(r, r)] += config.nuclear_weight;
                    }
                }
            }
        }
    }

    if !want_grad {
        return Ok(Evaluation { loss, grads: None });
    }

    // H_i such that dL = Σ_i Re Tr(H_i dA_i) with A_i = T_i†T_i.
    let mut h: Vec<Option<CMatrix>> = sens
        .iter()
        .map(|e| {
            e.as_ref().map(|e| match m {
                Some(m) => &(m * e) * m,
                None => e.clone(),
            })
        })
        .collect();

    if let Sandwich::Exact(norm) = sandwich {
        let mi = &norm.inv_sqrt;
        // K = X + X† with X = Σ_i A_i M E_i
        let mut x = CMatrix::zeros(d, d);
        for (t, e) in factors.iter().zip(&sens) {
            if let Some(e) = e {
                let a = t.adjoint_mul(t)?;
                x += &(&a * &(mi * e));
            }
        }
        let kmat = &x + &x.adjoint();
        let v = &norm.eig.eigenvectors;
        let lam = &norm.eig.eigenvalues;
        let mut kt = v.adjoint_mul(&(&kmat * v))?;
        for a in 0..d {
            for b in 0..d {
                kt[(a, b)] *= inv_sqrt_divided_difference(lam[a], lam[b], config.clip_delta);
            }
        }
        let kprime = &(v * &kt) * &v.adjoint();
        for hi in h.iter_mut() {
            match hi {
                Some(hm) => *hm += &kprime,
                None => *hi = Some(kprime.clone()),
            }
        }
    }

    let grads = factors
        .iter()
        .zip(&h)
        .map(|(t, hi)| match hi {
            Some(hm) => t * hm,
            None => CMatrix::zeros(t.rows(), t.cols()),
        })
        .collect();
    Ok(Evaluation {
        loss,
        grads: Some(grads),
    })
}

/// The loss value never depends on the gradient mode: both HONEST variants
/// evaluate effects with the current `S^{-1/2}`.
pub(crate) fn sandwich_for(params: &Params, config: &OptimConfig) -> Result<Sandwich<'static>> {
    Ok(match params {
        Params::Stiefel(_) => Sandwich::None,
        Params::Honest(h) => Sandwich::Exact(Normalizer::new(&h.gram(), config.clip_delta)?),
    })
}

fn pack_gradient(params: &Params, grads: Vec<CMatrix>) -> Result<Gradient> {
    Ok(match params {
        Params::Stiefel(_) => Gradient::Stiefel(CMatrix::vstack(&grads)?),
        Params::Honest(_) => Gradient::Honest(grads),
    })
}

/// Batch loss (plus regularizers) at the current parameters.
pub fn loss_eval(params: &Params, problem: &Problem, batch: &MiniBatch, config: &OptimConfig) -> Result<f64> {
    let sandwich = sandwich_for(params, config)?;
    Ok(evaluate_factors(&params.factors(), &sandwich, problem, batch, config, false)?.loss)
}

/// Loss of HONEST factors with the normalizer fixed to `sandwich` instead of
/// being recomputed from the factors.
pub fn loss_eval_frozen(
    factors: &HonestFactors,
    sandwich: &CMatrix,
    problem: &Problem,
    batch: &MiniBatch,
    config: &OptimConfig,
) -> Result<f64> {
    Ok(evaluate_factors(factors.factors(), &Sandwich::Frozen(sandwich), problem, batch, config, false)?.loss)
}

/// ∂L/∂T̄ at the current parameters. For HONEST the treatment of `S^{-1/2}`
/// follows `config.honest_gradient`.
pub fn grad_eval(params: &Params, problem: &Problem, batch: &MiniBatch, config: &OptimConfig) -> Result<Gradient> {
    Ok(loss_and_grad(params, problem, batch, config)?.1)
}

pub fn loss_and_grad(
    params: &Params,
    problem: &Problem,
    batch: &MiniBatch,
    config: &OptimConfig,
) -> Result<(f64, Gradient)> {
    let factors = params.factors();
    let eval = match (params, config.honest_gradient) {
        (Params::Honest(h), HonestGradient::Frozen) => {
            let m = crate::linalg::inv_sqrt_psd(&h.gram(), config.clip_delta)?;
            evaluate_factors(&factors, &Sandwich::Frozen(&m), problem, batch, config, true)?
        }
        _ => {
            let sandwich = sandwich_for(params, config)?;
            evaluate_factors(&factors, &sandwich, problem, batch, config, true)?
        }
    };
    let grads = eval.grads.expect("gradient requested");
    Ok((eval.loss, pack_gradient(params, grads)?))
}

/// Gradient of HONEST factors with the normalizer fixed to `sandwich`.
pub fn grad_eval_frozen(
    factors: &HonestFactors,
    sandwich: &CMatrix,
    problem: &Problem,
    batch: &MiniBatch,
    config: &OptimConfig,
) -> Result<Vec<CMatrix>> {
    let eval = evaluate_factors(factors.factors(), &Sandwich::Frozen(sandwich), problem, batch, config, true)?;
    Ok(eval.grads.expect("gradient requested"))
}

impl Params {
    pub fn stiefel(point: StiefelPoint) -> Self {
        Params::Stiefel(point)
    }

    pub fn honest(factors: HonestFactors) -> Self {
        Params::Honest(factors)
    }
}
