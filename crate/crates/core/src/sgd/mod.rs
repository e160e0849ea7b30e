//! Mini-batch gradient descent over valid POVMs.
//!
//! Each iteration draws a fresh batch of probes and outcomes, evaluates the
//! gradient and then either
//! - SM: takes a Cayley retraction step with learning rate η·αᵗ, or
//! - HONEST: takes an Adam step on free factors, which map to effects
//!   through `S^{-1/2}`. With `renormalize_factors` the stored factors are
//!   also replaced by `T_i S^{-1/2}` after every step.
//!
//! Every intermediate parameter set therefore maps to a valid POVM.

pub mod adam;
pub mod config;
pub mod objective;
pub mod params;
pub mod stiefel;
pub mod trace;

use std::time::Instant;

pub use adam::{adam_step, AdamParams, AdamState};
pub use config::{HonestGradient, Loss, OptimConfig, Parameterization};
pub use objective::{
    grad_eval, grad_eval_frozen, loss_and_grad, loss_eval, loss_eval_frozen, sample_minibatch, Gradient,
    MiniBatch, Problem,
};
pub use params::{honest_renormalize, povm_from_params, HonestFactors, Params, StiefelPoint};
pub use stiefel::stiefel_retract_step;
pub use trace::{TraceLog, TraceRecord};

use crate::error::{QmtError, Result};
use crate::metrics::score_reconstruction;
use crate::povm::PovmSet;
use crate::probe::{ProbabilityTable, ProbeEnsemble};
use crate::rng::{self, QmtRng};

/// Stepwise driver for one fit. [`fit`] runs it to completion; use the
/// driver directly to inspect parameters between iterations.
pub struct Fitter<'a> {
    problem: Problem<'a>,
    config: OptimConfig,
    params: Params,
    adam: Option<AdamState>,
    rng: QmtRng,
    iter: usize,
    state_batch: usize,
    povm_batch: usize,
    reference: Option<&'a PovmSet>,
    snapshot_probes: Option<&'a ProbeEnsemble>,
    log: TraceLog,
}

impl<'a> Fitter<'a> {
    pub fn new(
        table: &'a ProbabilityTable,
        probes: &'a ProbeEnsemble,
        config: &OptimConfig,
        init: Option<Params>,
    ) -> Result<Self> {
        config.validate()?;
        let problem = Problem::new(table, probes)?;
        let (k, d) = (problem.k(), problem.dim());
        if k == 0 {
            return Err(QmtError::InvalidArgument("data has no outcomes".into()));
        }
        let mut rng = rng::seeded(config.seed);
        let params = match init {
            Some(p) => {
                if p.k() != k || p.d() != d {
                    return Err(QmtError::Dimension(format!(
                        "initial parameters describe k={}, d={} but data needs k={k}, d={d}",
                        p.k(),
                        p.d()
                    )));
                }
                p
            }
            None => match config.parameterization {
                Parameterization::SM => Params::Stiefel(StiefelPoint::random(k, d, config.rank, &mut rng)?),
                Parameterization::HONEST => Params::Honest(HonestFactors::random(k, d, config.rank, &mut rng)),
            },
        };
        let params = match (config.parameterization, params) {
            (Parameterization::SM, p @ Params::Stiefel(_)) => p,
            (Parameterization::HONEST, Params::Honest(h)) => Params::Honest(honest_renormalize(&h, config.clip_delta)?),
            _ => {
                return Err(QmtError::InvalidArgument(
                    "initial parameters do not match the configured parameterization".into(),
                ))
            }
        };
        let adam = match &params {
            Params::Honest(h) => Some(AdamState::new(h)),
            Params::Stiefel(_) => None,
        };
        Ok(Self {
            problem,
            config: config.clone(),
            params,
            adam,
            rng,
            iter: 0,
            state_batch: config.state_batch.min(table.n_probes()),
            povm_batch: config.povm_batch.unwrap_or(k).min(k),
            reference: None,
            snapshot_probes: None,
            log: TraceLog::new(),
        })
    }

    /// Scores iterates against `reference` every `snapshot_every` iterations,
    /// using `probes` for the Wasserstein columns.
    pub fn with_reference(mut self, reference: &'a PovmSet, probes: &'a ProbeEnsemble) -> Self {
        self.reference = Some(reference);
        self.snapshot_probes = Some(probes);
        self
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn iteration(&self) -> usize {
        self.iter
    }

    pub fn trace(&self) -> &TraceLog {
        &self.log
    }

    pub fn current_povm(&self) -> Result<PovmSet> {
        povm_from_params(&self.params, self.config.clip_delta)
    }

    /// Learning rate used by the next iteration.
    pub fn current_eta(&self) -> f64 {
        let eta = self.config.effective_eta();
        match self.config.parameterization {
            Parameterization::SM => eta * self.config.decay_alpha.powi(self.iter as i32),
            Parameterization::HONEST => eta,
        }
    }

    /// One sample → gradient → update cycle. Returns the batch loss
    /// evaluated before the update.
    pub fn step(&mut self) -> Result<f64> {
        let started = Instant::now();
        let batch = sample_minibatch(self.problem.table, self.state_batch, self.povm_batch, &mut self.rng)?;
        let (loss, grad) = loss_and_grad(&self.params, &self.problem, &batch, &self.config)?;
        if !loss.is_finite() {
            let last = self.log.last().map(|r| r.loss);
            return Err(QmtError::Numeric(format!(
                "non-finite loss at iteration {} (last finite loss {last:?})",
                self.iter
            )));
        }
        let eta = self.current_eta();
        match (&mut self.params, grad) {
            (Params::Stiefel(point), Gradient::Stiefel(g)) => {
                *point = stiefel_retract_step(point, &g, eta)?;
            }
            (Params::Honest(factors), Gradient::Honest(gs)) => {
                let state = self.adam.as_mut().expect("HONEST fits carry Adam state");
                adam_step(state, factors, &gs, eta, AdamParams::from(&self.config))?;
                if self.config.renormalize_factors {
                    *factors = honest_renormalize(factors, self.config.clip_delta)?;
                }
            }
            _ => unreachable!("gradient layout follows the parameters"),
        }
        let (avg_frobenius, avg_wasserstein) = self.snapshot()?;
        self.log.push(TraceRecord {
            iter: self.iter,
            loss,
            avg_frobenius,
            avg_wasserstein,
            elapsed_ms: started.elapsed().as_secs_f64() * 1e3,
        });
        self.iter += 1;
        Ok(loss)
    }

    fn snapshot(&self) -> Result<(Option<f64>, Option<f64>)> {
        let every = self.config.snapshot_every;
        let last = self.iter + 1 == self.config.max_iters;
        match (self.reference, self.snapshot_probes) {
            (Some(reference), Some(probes)) if every > 0 && (self.iter.is_multiple_of(every) || last) => {
                let est = self.current_povm()?;
                let rec = score_reconstruction(reference, &est, probes)?;
                Ok((Some(rec.mean_frobenius), Some(rec.mean_wasserstein)))
            }
            _ => Ok((None, None)),
        }
    }

    /// Runs the remaining iterations of the configured budget.
    pub fn run(mut self) -> Result<(PovmSet, TraceLog)> {
        while self.iter < self.config.max_iters {
            self.step()?;
        }
        let povm = self.current_povm()?;
        Ok((povm, self.log))
    }

    pub fn into_parts(self) -> (Params, TraceLog) {
        (self.params, self.log)
    }
}

/// Fits a POVM to `table`, returning the final estimate and its trace.
pub fn fit(
    table: &ProbabilityTable,
    probes: &ProbeEnsemble,
    config: &OptimConfig,
    init: Option<Params>,
) -> Result<(PovmSet, TraceLog)> {
    Fitter::new(table, probes, config, init)?.run()
}

/// [`fit`] with metric snapshots against a known reference POVM.
pub fn fit_with_reference(
    table: &ProbabilityTable,
    probes: &ProbeEnsemble,
    config: &OptimConfig,
    init: Option<Params>,
    reference: &PovmSet,
) -> Result<(PovmSet, TraceLog)> {
    Fitter::new(table, probes, config, init)?
        .with_reference(reference, probes)
        .run()
}
