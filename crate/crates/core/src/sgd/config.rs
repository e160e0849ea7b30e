use serde::{Deserialize, Serialize};

use crate::error::{QmtError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Parameterization {
    /// Stacked factors on the Stiefel manifold, Cayley retraction, plain
    /// gradient steps with geometric learning-rate decay.
    #[serde(alias = "sm", alias = "stiefel")]
    SM,
    /// Free factors, Adam steps, then `T_i ← T_i S^{-1/2}`.
    #[serde(alias = "honest")]
    HONEST,
}

impl Parameterization {
    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sm" | "stiefel" => Ok(Self::SM),
            "honest" => Ok(Self::HONEST),
            _ => Err(QmtError::InvalidArgument(format!("unknown parameterization '{s}'"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::SM => "SM",
            Self::HONEST => "HONEST",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Loss {
    #[serde(alias = "mse")]
    MSE,
    #[serde(alias = "mle")]
    MLE,
}

impl Loss {
    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mse" => Ok(Self::MSE),
            "mle" => Ok(Self::MLE),
            _ => Err(QmtError::InvalidArgument(format!("unknown loss '{s}'"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::MSE => "MSE",
            Self::MLE => "MLE",
        }
    }
}

/// How the HONEST gradient treats the normalizing factor `S^{-1/2}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HonestGradient {
    /// Differentiate through `S^{-1/2}` (exact gradient of the loss).
    #[default]
    Exact,
    /// Hold `S^{-1/2}` fixed at its current value.
    Frozen,
}

impl HonestGradient {
    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "exact" => Ok(Self::Exact),
            "frozen" | "stop_gradient" | "stop-gradient" => Ok(Self::Frozen),
            _ => Err(QmtError::InvalidArgument(format!("unknown HONEST gradient mode '{s}'"))),
        }
    }
}

/// Optimizer hyperparameters.
///
/// `eta` and `povm_batch` are optional: when unset the learning rate is 0.01
/// for HONEST and 0.05 for SM, and the outcome batch covers every outcome.
/// `state_batch` is capped at the number of probes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimConfig {
    pub parameterization: Parameterization,
    pub loss: Loss,
    pub eta: Option<f64>,
    /// Per-iteration learning-rate multiplier (SM only).
    pub decay_alpha: f64,
    pub state_batch: usize,
    pub povm_batch: Option<usize>,
    pub max_iters: usize,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub clip_delta: f64,
    pub l1_weight: f64,
    pub nuclear_weight: f64,
    pub seed: u64,
    pub mle_floor: f64,
    pub honest_gradient: HonestGradient,
    /// Row count of every factor (rank-controlled ansatz); `None` = full rank.
    pub rank: Option<usize>,
    /// Metric snapshot cadence when a reference POVM is supplied; 0 disables.
    pub snapshot_every: usize,
    /// HONEST only: overwrite the Adam parameters with `T_i S^{-1/2}` after
    /// every step. When false the effects are still read through
    /// `S^{-1/2}`, but Adam keeps the unnormalized factors.
    pub renormalize_factors: bool,
}

impl Default for OptimConfig {
    fn default() -> Self {
        Self {
            parameterization: Parameterization::HONEST,
            loss: Loss::MLE,
            eta: None,
            decay_alpha: 0.99,
            state_batch: 50,
            povm_batch: None,
            max_iters: 1000,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            clip_delta: 1e-8,
            l1_weight: 0.0,
            nuclear_weight: 0.0,
            seed: 0,
            mle_floor: 1e-12,
            honest_gradient: HonestGradient::Exact,
            rank: None,
            snapshot_every: 10,
            renormalize_factors: false,
        }
    }
}

impl OptimConfig {
    pub fn new(parameterization: Parameterization, loss: Loss) -> Self {
        Self {
            parameterization,
            loss,
            ..Self::default()
        }
    }

    pub fn with_iters(mut self, iters: usize) -> Self {
        self.max_iters = iters;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn effective_eta(&self) -> f64 {
        self.eta.unwrap_or(match self.parameterization {
            Parameterization::HONEST => 0.01,
            Parameterization::SM => 0.05,
        })
    }

    /// "HONEST-MLE" style tag.
    pub fn method_name(&self) -> String {
        format!("{}-{}", self.parameterization.name(), self.loss.name())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(QmtError::InvalidArgument(msg));
        let eta = self.effective_eta();
        if !(eta > 0.0) || !eta.is_finite() {
            return bad(format!("learning rate must be positive, got {eta}"));
        }
        if !(self.decay_alpha > 0.0 && self.decay_alpha <= 1.0) {
            return bad(format!("decay_alpha must lie in (0, 1], got {}", self.decay_alpha));
        }
        if self.state_batch == 0 {
            return bad("state batch size must be at least 1".into());
        }
        if self.povm_batch == Some(0) {
            return bad("POVM batch size must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) {
            return bad("Adam decay rates must lie in [0, 1)".into());
        }
        if !(self.adam_eps > 0.0) || !(self.clip_delta > 0.0) || !(self.mle_floor > 0.0) {
            return bad("adam_eps, clip_delta and mle_floor must be positive".into());
        }
        if !(self.l1_weight >= 0.0) || !(self.nuclear_weight >= 0.0) {
            return bad("regularization weights must be non-negative".into());
        }
        if self.rank == Some(0) {
            return bad("factor rank must be at least 1".into());
        }
        Ok(())
    }
}
