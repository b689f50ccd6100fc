//! Annealing paths of potentials `U_t`, `t ∈ [0, 1]`.
//!
//! A path defines the family of probability measures `π_t ∝ exp(-U_t)`.
//! Every path supplies the value, the spatial gradient and the time
//! derivative of `U_t`; the remaining capabilities (normalizer, minimizer,
//! exact sampling, assumption constants) are optional and report
//! [`Error::Unavailable`] when a family cannot provide them.

mod constants;
mod gaussian;
mod logistic;
mod product;

pub use constants::{compute_constants, power_iteration_lambda_max, AssumptionConstants};
pub use gaussian::{GaussianPath, ScalarGaussian};
pub(crate) use logistic::sigmoid;
pub use logistic::{softplus, LogisticModel, LogisticPath};
pub use product::{ProductPath, ScalarFamily};

use rand::RngCore;

use crate::error::{Error, Result};
use crate::estimators::ReferenceSource;

pub trait AnnealingPotential: Send + Sync {
    /// Short identifier used in reports and CSV rows.
    fn family(&self) -> &'static str;

    fn dim(&self) -> usize;

    fn u(&self, t: f64, x: &[f64]) -> f64;

    fn grad_u(&self, t: f64, x: &[f64], out: &mut [f64]);

    /// `∂_t U_t(x)`.
    fn dt_u(&self, t: f64, x: &[f64]) -> f64;

    fn log_z(&self, _t: f64) -> Result<f64> {
        Err(Error::Unavailable("log_z"))
    }

    /// How `log_z` is obtained.
    fn log_z_source(&self) -> ReferenceSource {
        ReferenceSource::None
    }

    /// The unique minimizer `x_t*` of `U_t`.
    fn minimizer(&self, _t: f64) -> Result<Vec<f64>> {
        Err(Error::Unavailable("minimizer"))
    }

    /// Exact draw from `π_0`.
    fn sample_pi0(&self, _rng: &mut dyn RngCore) -> Result<Vec<f64>> {
        Err(Error::Unavailable("sample_pi0"))
    }

    /// Exact draw from `π_t`.
    fn sample_pi_t(&self, _t: f64, _rng: &mut dyn RngCore) -> Result<Vec<f64>> {
        Err(Error::Unavailable("sample_pi_t"))
    }

    /// `π_t(∂_t U_t)`.
    fn pi_t_dt_u(&self, _t: f64) -> Result<f64> {
        Err(Error::Unavailable("pi_t_dt_u"))
    }

    fn assumption_constants(&self) -> Result<AssumptionConstants> {
        Err(Error::Unavailable("assumption constants"))
    }
}

/// `φ_t(x) = -∂_t U_t(x) - ∂_t log Z_t`, using `∂_t log Z_t = -π_t(∂_t U_t)`.
pub fn phi_t<P: AnnealingPotential + ?Sized>(p: &P, t: f64, x: &[f64]) -> Result<f64> {
    Ok(-p.dt_u(t, x) + p.pi_t_dt_u(t)?)
}

/// `log Z_1 - log Z_0` when the path supplies normalizers.
pub fn log_ratio<P: AnnealingPotential + ?Sized>(p: &P) -> Result<f64> {
    Ok(p.log_z(1.0)? - p.log_z(0.0)?)
}

pub(crate) fn check_dim<P: AnnealingPotential + ?Sized>(p: &P, x: &[f64]) -> Result<()> {
    if x.len() != p.dim() {
        return Err(Error::DimensionMismatch {
            expected: p.dim(),
            got: x.len(),
        });
    }
    Ok(())
}

#[cfg(test)]
pub(crate) mod testing {
    //! Finite-difference probes shared by the family tests.
    use super::AnnealingPotential;

    pub fn fd_grad(p: &dyn AnnealingPotential, t: f64, x: &[f64]) -> Vec<f64> {
        let mut y = x.to_vec();
        (0..x.len())
            .map(|j| {
                let h = 1e-5 * x[j].abs().max(1.0);
                y[j] = x[j] + h;
                let up = p.u(t, &y);
                y[j] = x[j] - h;
                let dn = p.u(t, &y);
                y[j] = x[j];
                (up - dn) / (2.0 * h)
            })
            .collect()
    }

    pub fn fd_dt(p: &dyn AnnealingPotential, t: f64, x: &[f64]) -> f64 {
        let h = 1e-5;
        (p.u(t + h, x) - p.u(t - h, x)) / (2.0 * h)
    }

    pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
        let diff: f64 = a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum::<f64>().sqrt();
        let scale: f64 = a.iter().map(|u| u * u).sum::<f64>().sqrt().max(1.0);
        diff / scale
    }
}
