//! Normalizing-constant estimation with discretized, time-inhomogeneous
//! overdamped Langevin diffusions.
//!
//! A path of potentials `U_t`, `t ∈ [0, 1]`, is followed by the Euler–Maruyama
//! scheme for `dX = −ε⁻¹∇U_t(X)dt + √(2ε⁻¹)dB`. Along each trajectory the
//! Riemann sum `h·Σ ∂_tU_{kh}(X_{kh})` is accumulated; thermodynamic
//! integration and Jarzynski-type estimators of `log Z_1/Z_0` follow from it.
//!
//! * [`potential`]: annealing paths (Gaussian, products of 1-d factors,
//!   Bayesian logistic regression) and their regularity constants.
//! * [`sde`]: simulation of skeletons, synchronously coupled pairs and
//!   frozen-time chains.
//! * [`estimators`]: TI, Jarzynski, self-normalized expectations, naive
//!   importance sampling and asymptotic variances.
//! * [`diagnostics`]: drift and contraction constants and empirical checks.
//! * [`experiments`]: configuration, sweeps, CSV output and the logistic
//!   regression pipeline.

pub mod diagnostics;
pub mod error;
pub mod estimators;
pub mod experiments;
pub mod potential;
pub mod quad;
pub mod rng;
pub mod sde;

pub use error::{Error, Result};
