//! Seeded randomness. Every random draw in the crate goes through a
//! ChaCha stream so results do not depend on the platform.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::linalg::{CMatrix, C64};

pub type QmtRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> QmtRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Standard complex Gaussian: real and imaginary parts i.i.d. N(0, 1/2),
/// so E|z|² = 1.
pub fn complex_gaussian(rng: &mut QmtRng) -> C64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn ginibre(rng: &mut QmtRng, rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| complex_gaussian(rng))
}
