use std::f64::consts::PI;

use rand::RngCore;

use super::{AnnealingPotential, AssumptionConstants, ScalarFamily};
use crate::error::{Error, Result};
use crate::estimators::ReferenceSource;
use crate::rng::fill_standard_normal;

/// Radius on which the time-continuity constant of the Gaussian path is made
/// tight: `M` is the smallest constant with
/// `‖∇U_t(x) − ∇U_s(x)‖ ≤ M|t − s|·√(1 + ‖x‖²)` for all `‖x‖ ≤ R`.
const TIME_CONTINUITY_RADIUS: f64 = 1e6;

/// Centred isotropic Gaussian path `U_t(x) = ‖x‖² / (2σ_t²)` with the
/// variance interpolated linearly, `σ_t² = (1 − t)·var0 + t·var1`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPath {
    d: usize,
    var0: f64,
    var1: f64,
}

impl GaussianPath {
    pub fn new(d: usize, var0: f64, var1: f64) -> Result<Self> {
        if d == 0 {
            return Err(Error::invalid("d", "dimension must be positive"));
        }
        check_variance("var0", var0)?;
        check_variance("var1", var1)?;
        Ok(Self { d, var0, var1 })
    }

    pub fn var0(&self) -> f64 {
        self.var0
    }

    pub fn var1(&self) -> f64 {
        self.var1
    }

    /// `σ_t²`.
    #[inline]
    pub fn variance(&self, t: f64) -> f64 {
        (1.0 - t) * self.var0 + t * self.var1
    }

    /// `∂_t U_t(x) = c_t·‖x‖²`; returns `c_t = −(var1 − var0)/(2σ_t⁴)`.
    #[inline]
    pub fn dt_coefficient(&self, t: f64) -> f64 {
        let s2 = self.variance(t);
        -(self.var1 - self.var0) / (2.0 * s2 * s2)
    }

    /// Tight time-continuity constant, see [`TIME_CONTINUITY_RADIUS`].
    ///
    /// `‖∇U_t(x) − ∇U_s(x)‖ = |1/σ_t² − 1/σ_s²|·‖x‖` and
    /// `sup_{t≠s} |1/σ_t² − 1/σ_s²| / |t − s| = |var1 − var0| / min(var0, var1)²`
    /// (the derivative of `1/σ_t²` is largest where `σ_t²` is smallest), while
    /// `sup_{‖x‖≤R} ‖x‖/√(1 + ‖x‖²) = R/√(1 + R²)`.
    pub fn time_continuity_constant(&self) -> f64 {
        let vmin = self.var0.min(self.var1);
        let r = TIME_CONTINUITY_RADIUS;
        (self.var1 - self.var0).abs() / (vmin * vmin) * (r / (1.0 + r * r).sqrt())
    }
}

fn check_variance(name: &'static str, v: f64) -> Result<()> {
    if !(v.is_finite() && v > 0.0) {
        return Err(Error::invalid(
            name,
            format!("variance must be finite and positive, got {v}"),
        ));
    }
    Ok(())
}

impl AnnealingPotential for GaussianPath {
    fn family(&self) -> &'static str {
        "gaussian"
    }

    fn dim(&self) -> usize {
        self.d
    }

    fn u(&self, t: f64, x: &[f64]) -> f64 {
        norm2(x) / (2.0 * self.variance(t))
    }

    fn grad_u(&self, t: f64, x: &[f64], out: &mut [f64]) {
        let inv = 1.0 / self.variance(t);
        for (o, &v) in out.iter_mut().zip(x) {
            *o = v * inv;
        }
    }

    fn dt_u(&self, t: f64, x: &[f64]) -> f64 {
        self.dt_coefficient(t) * norm2(x)
    }

    fn log_z(&self, t: f64) -> Result<f64> {
        Ok(0.5 * self.d as f64 * (2.0 * PI * self.variance(t)).ln())
    }

    fn log_z_source(&self) -> ReferenceSource {
        ReferenceSource::Analytic
    }

    fn minimizer(&self, _t: f64) -> Result<Vec<f64>> {
        Ok(vec![0.0; self.d])
    }

    fn sample_pi0(&self, rng: &mut dyn RngCore) -> Result<Vec<f64>> {
        self.sample_pi_t(0.0, rng)
    }

    fn sample_pi_t(&self, t: f64, rng: &mut dyn RngCore) -> Result<Vec<f64>> {
        let mut x = vec![0.0; self.d];
        fill_standard_normal(rng, &mut x);
        let sd = self.variance(t).sqrt();
        x.iter_mut().for_each(|v| *v *= sd);
        Ok(x)
    }

    fn pi_t_dt_u(&self, t: f64) -> Result<f64> {
        // E‖x‖² = d·σ_t² under π_t.
        Ok(self.dt_coefficient(t) * self.d as f64 * self.variance(t))
    }

    fn assumption_constants(&self) -> Result<AssumptionConstants> {
        AssumptionConstants::new(
            1.0 / self.var0.max(self.var1),
            1.0 / self.var0.min(self.var1),
            self.time_continuity_constant(),
            None,
            None,
        )
    }
}

#[inline]
pub(crate) fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

/// One-dimensional Gaussian factor `u_t(x) = x²/(2σ_t²)`, for product paths.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarGaussian {
    pub var0: f64,
    pub var1: f64,
}

impl ScalarGaussian {
    pub fn new(var0: f64, var1: f64) -> Result<Self> {
        check_variance("var0", var0)?;
        check_variance("var1", var1)?;
        Ok(Self { var0, var1 })
    }

    #[inline]
    fn variance(&self, t: f64) -> f64 {
        (1.0 - t) * self.var0 + t * self.var1
    }
}

impl ScalarFamily for ScalarGaussian {
    fn u(&self, t: f64, x: f64) -> f64 {
        x * x / (2.0 * self.variance(t))
    }

    fn grad_u(&self, t: f64, x: f64) -> f64 {
        x / self.variance(t)
    }

    fn dt_u(&self, t: f64, x: f64) -> f64 {
        let s2 = self.variance(t);
        -(self.var1 - self.var0) * x * x / (2.0 * s2 * s2)
    }

    fn log_z(&self, t: f64) -> Option<f64> {
        Some(0.5 * (2.0 * PI * self.variance(t)).ln())
    }

    fn pi_t_dt_u(&self, t: f64) -> Option<f64> {
        Some(-(self.var1 - self.var0) / (2.0 * self.variance(t)))
    }

    fn minimizer(&self, _t: f64) -> Option<f64> {
        Some(0.0)
    }

    fn sample(&self, t: f64, rng: &mut dyn RngCore) -> Option<f64> {
        let mut z = [0.0];
        fill_standard_normal(rng, &mut z);
        Some(z[0] * self.variance(t).sqrt())
    }

    /// The product of `d` factors is the isotropic Gaussian path.
    fn assumption_constants(&self, d: usize) -> Option<AssumptionConstants> {
        GaussianPath::new(d, self.var0, self.var1)
            .ok()?
            .assumption_constants()
            .ok()
    }
}

#[cfg(test)]
mod tests {
    use super::super::testing::*;
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rejects_nonpositive_variances() {
        assert!(GaussianPath::new(2, 0.0, 1.0).is_err());
        assert!(GaussianPath::new(2, 1.0, -0.5).is_err());
        assert!(GaussianPath::new(2, f64::NAN, 1.0).is_err());
        assert!(GaussianPath::new(0, 1.0, 1.0).is_err());
    }

    #[test]
    #[allow(clippy::approx_constant)]
    fn log_ratio_half_variance() {
        let p = GaussianPath::new(2, 1.0, 0.5).unwrap();
        let r = p.log_z(1.0).unwrap() - p.log_z(0.0).unwrap();
        assert!((r - 0.5f64.ln()).abs() < 1e-15);
        assert!((r + 0.693147).abs() < 1e-6);
    }

    #[test]
    fn identity_path_has_zero_time_derivative() {
        let p = GaussianPath::new(1, 1.0, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let t: f64 = rng.random();
            let x = [rng.random::<f64>() * 10.0 - 5.0];
            assert_eq!(p.dt_u(t, &x), 0.0);
        }
        assert_eq!(p.log_z(1.0).unwrap() - p.log_z(0.0).unwrap(), 0.0);
    }

    #[test]
    fn value_at_midpoint() {
        let p = GaussianPath::new(2, 1.0, 0.5).unwrap();
        assert!((p.variance(0.5) - 0.75).abs() < 1e-15);
        assert!((p.u(0.5, &[1.0, 1.0]) - 2.0 / 1.5).abs() < 1e-15);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let p = GaussianPath::new(3, 2.0, 0.3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let t: f64 = rng.random::<f64>() * 0.98 + 0.01;
            let x: Vec<f64> = (0..3).map(|_| rng.random::<f64>() * 6.0 - 3.0).collect();
            let mut g = vec![0.0; 3];
            p.grad_u(t, &x, &mut g);
            assert!(rel_err(&g, &fd_grad(&p, t, &x)) < 1e-5);
            let dt = p.dt_u(t, &x);
            assert!((dt - fd_dt(&p, t, &x)).abs() / dt.abs().max(1.0) < 1e-5);
        }
    }

    #[test]
    fn constants_identity_path() {
        let c = GaussianPath::new(4, 1.0, 1.0).unwrap().assumption_constants().unwrap();
        assert_eq!(c.strong_convexity, 1.0);
        assert_eq!(c.lipschitz, 1.0);
        assert_eq!(c.time_continuity, 0.0);
    }

    #[test]
    fn time_continuity_constant_is_tight() {
        let p = GaussianPath::new(1, 1.0, 0.5).unwrap();
        let m = p.time_continuity_constant();
        // 0.5 / 0.25 = 2, up to the R/√(1+R²) factor.
        assert!((m - 2.0).abs() < 1e-11);
        // Attained at t = s = 1 for large ‖x‖.
        let x = [1e6];
        let (t, s) = (1.0, 1.0 - 1e-7);
        let mut gt = [0.0];
        let mut gs = [0.0];
        p.grad_u(t, &x, &mut gt);
        p.grad_u(s, &x, &mut gs);
        let ratio = (gt[0] - gs[0]).abs() / ((t - s) * (1.0 + x[0] * x[0]).sqrt());
        assert!(ratio <= m * (1.0 + 1e-6) && ratio > 0.999 * m);
    }
}
