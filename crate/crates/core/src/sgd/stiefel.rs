//! Cayley-transform retraction on the complex Stiefel manifold.
//!
//! With G̃ the Frobenius-normalized gradient, A = [G̃ 𝕋] and B = [𝕋 −G̃], the
//! step is 𝕋' = 𝕋 − η A (I + (η/2) B†A)^{-1} B†𝕋. This is the Cayley curve
//! (I + η/2 W)^{-1}(I − η/2 W)𝕋 with W = G̃𝕋† − 𝕋G̃†, evaluated through the
//! Woodbury identity so only a 2d×2d system is solved.

use super::params::StiefelPoint;
use crate::error::{QmtError, Result};
use crate::linalg::{lu_solve, CMatrix};

/// Gradients below this Frobenius norm leave the point unchanged.
pub const ZERO_GRADIENT_GUARD: f64 = 1e-14;

pub fn stiefel_retract_step(point: &StiefelPoint, grad: &CMatrix, eta: f64) -> Result<StiefelPoint> {
    let x = point.stacked();
    if grad.shape() != x.shape() {
        return Err(QmtError::Dimension(format!(
            "gradient is {:?} but the point is {:?}",
            grad.shape(),
            x.shape()
        )));
    }
    if !(eta > 0.0) || !eta.is_finite() {
        return Err(QmtError::InvalidArgument(format!("step size must be positive, got {eta}")));
    }
    let gnorm = grad.frobenius_norm();
    if !gnorm.is_finite() {
        return Err(QmtError::Numeric("non-finite gradient in retraction".into()));
    }
    if gnorm < ZERO_GRADIENT_GUARD {
        return Ok(point.clone());
    }
    let g = grad.scale_real(1.0 / gnorm);
    let neg_g = -&g;
    let a = CMatrix::hstack(&[&g, x])?;
    let b = CMatrix::hstack(&[x, &neg_g])?;
    let two_d = a.cols();
    let mut system = b.adjoint_mul(&a)?.scale_real(0.5 * eta);
    for i in 0..two_d {
        system[(i, i)] += 1.0;
    }
    let rhs = b.adjoint_mul(x)?;
    let y = lu_solve(&system, &rhs)?;
    let step = &a * &y;
    let mut next = x.clone();
    next.axpy((-eta).into(), &step);
    let mut out = point.clone();
    out.replace_stacked(next);
    Ok(out)
}
