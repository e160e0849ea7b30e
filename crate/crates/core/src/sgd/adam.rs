//! Adam with bias-corrected moments, applied separately to the real and
//! imaginary parts of every factor entry.

use super::config::OptimConfig;
use super::params::HonestFactors;
use crate::error::{QmtError, Result};
use crate::linalg::{CMatrix, C64};

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    /// First moments; re/im parts tracked independently.
    first: Vec<CMatrix>,
    /// Second moments of the re/im parts, stored as (v_re, v_im).
    second: Vec<CMatrix>,
    step: u64,
}

impl AdamState {
    pub fn new(factors: &HonestFactors) -> Self {
        let zeros: Vec<CMatrix> = factors
            .factors()
            .iter()
            .map(|f| CMatrix::zeros(f.rows(), f.cols()))
            .collect();
        Self {
            first: zeros.clone(),
            second: zeros,
            step: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamParams {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamParams {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl From<&OptimConfig> for AdamParams {
    fn from(c: &OptimConfig) -> Self {
        Self {
            beta1: c.adam_beta1,
            beta2: c.adam_beta2,
            eps: c.adam_eps,
        }
    }
}

/// θ ← θ − η m̂/(√v̂ + ε)
pub fn adam_step(
    state: &mut AdamState,
    factors: &mut HonestFactors,
    grads: &[CMatrix],
    eta: f64,
    hp: AdamParams,
) -> Result<()> {
    if grads.len() != factors.k()
        || grads.iter().zip(factors.factors()).any(|(g, f)| g.shape() != f.shape())
    {
        return Err(QmtError::Dimension("gradient shapes do not match the factors".into()));
    }
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - hp.beta1.powi(t);
    let bc2 = 1.0 - hp.beta2.powi(t);
    for (((theta, g), m), v) in factors
        .factors_mut()
        .iter_mut()
        .zip(grads)
        .zip(&mut state.first)
        .zip(&mut state.second)
    {
        for (((th, &gz), mz), vz) in theta
            .as_mut_slice()
            .iter_mut()
            .zip(g.as_slice())
            .zip(m.as_mut_slice())
            .zip(v.as_mut_slice())
        {
            *mz = *mz * hp.beta1 + gz * (1.0 - hp.beta1);
            vz.re = hp.beta2 * vz.re + (1.0 - hp.beta2) * gz.re * gz.re;
            vz.im = hp.beta2 * vz.im + (1.0 - hp.beta2) * gz.im * gz.im;
            let m_hat = *mz / bc1;
            let upd = C64::new(
                m_hat.re / ((vz.re / bc2).sqrt() + hp.eps),
                m_hat.im / ((vz.im / bc2).sqrt() + hp.eps),
            );
            *th -= upd * eta;
        }
    }
    Ok(())
}
