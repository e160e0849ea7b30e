//! Quantum measurement tomography by mini-batch stochastic gradient descent.
//!
//! A measurement device is described by a POVM: `k` positive semidefinite
//! `d×d` effects summing to the identity. Given known probe states and the
//! outcome probabilities they produce, [`sgd::fit`] reconstructs the effects
//! while keeping every iterate physically valid, using either a Stiefel
//! manifold parameterization with a Cayley retraction or free factors that
//! are renormalized through `S^{-1/2}` after each Adam step.
//!
//! The crate also provides the scenario builders (random, Pauli, photon
//! detection and counting POVMs; qubit and coherent-state probes), the
//! Born-rule data simulator, reconstruction metrics and a linear-inversion
//! baseline.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod inversion;
pub mod linalg;
pub mod metrics;
pub mod povm;
pub mod probe;
pub mod rng;
pub mod sgd;

pub use error::{QmtError, Result};
pub use inversion::{linear_inversion_baseline, LinearInversion};
pub use linalg::{CMatrix, EigenDecomposition, C64};
pub use metrics::{frobenius_distance, score_reconstruction, wasserstein_distance, MetricRecord};
pub use povm::{PovmSet, ValidityReport};
pub use probe::{NoiseSpec, ProbabilityTable, ProbeEnsemble};
pub use sgd::{
    fit, Fitter, HonestFactors, HonestGradient, Loss, OptimConfig, Params, Parameterization,
    StiefelPoint, TraceLog,
};
