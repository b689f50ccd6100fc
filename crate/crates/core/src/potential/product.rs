use rand::RngCore;

use super::{AnnealingPotential, AssumptionConstants};
use crate::error::{Error, Result};
use crate::estimators::{importance_constant, ReferenceSource};
use crate::quad::{convex_argmin, integrate_line};

/// Relative accuracy requested from the 1-d normalizer quadratures.
const QUAD_REL_TOL: f64 = 1e-13;

/// A time-indexed family of strictly convex potentials on the real line.
pub trait ScalarFamily: Send + Sync {
    fn u(&self, t: f64, x: f64) -> f64;
    fn grad_u(&self, t: f64, x: f64) -> f64;
    fn dt_u(&self, t: f64, x: f64) -> f64;

    /// Analytic 1-d log-normalizer, if known.
    fn log_z(&self, _t: f64) -> Option<f64> {
        None
    }

    fn pi_t_dt_u(&self, _t: f64) -> Option<f64> {
        None
    }

    fn minimizer(&self, _t: f64) -> Option<f64> {
        None
    }

    /// Exact draw from the 1-d marginal of `π_t`.
    fn sample(&self, _t: f64, _rng: &mut dyn RngCore) -> Option<f64> {
        None
    }

    /// Constants of the `d`-fold product path, if known.
    fn assumption_constants(&self, _d: usize) -> Option<AssumptionConstants> {
        None
    }
}

/// `U_t(x) = Σ_j u_t(x_j)`.
pub struct ProductPath<F> {
    d: usize,
    factor: F,
    use_analytic: bool,
}

/// Moments of a 1-d factor computed by quadrature.
#[derive(Debug, Clone, Copy)]
pub struct FactorMoments {
    pub log_z: f64,
    pub mean_dt_u: f64,
}

impl<F: ScalarFamily> ProductPath<F> {
    pub fn new(d: usize, factor: F) -> Result<Self> {
        if d == 0 {
            return Err(Error::invalid("d", "dimension must be positive"));
        }
        Ok(Self {
            d,
            factor,
            use_analytic: true,
        })
    }

    /// Ignore analytic normalizers of the factor and always integrate.
    pub fn quadrature_only(mut self) -> Self {
        self.use_analytic = false;
        self
    }

    pub fn factor(&self) -> &F {
        &self.factor
    }

    fn factor_mode(&self, t: f64) -> Result<f64> {
        match self.factor.minimizer(t) {
            Some(m) => Ok(m),
            None => convex_argmin(|x| self.factor.grad_u(t, x), 0.0),
        }
    }

    /// `log ∫ exp(−u_t)` and `∫ ∂_t u_t dπ_t` by quadrature around the mode.
    pub fn factor_moments(&self, t: f64) -> Result<FactorMoments> {
        let f = &self.factor;
        let mode = self.factor_mode(t)?;
        let eta = 1e-4 * mode.abs().max(1.0);
        let curvature = (f.grad_u(t, mode + eta) - f.grad_u(t, mode - eta)) / (2.0 * eta);
        if !(curvature > 0.0 && curvature.is_finite()) {
            return Err(Error::invalid(
                "factor",
                format!("non-positive curvature {curvature} at t = {t}"),
            ));
        }
        let scale = 1.0 / curvature.sqrt();
        let u_mode = f.u(t, mode);
        let density = |x: f64| (-(f.u(t, x) - u_mode)).exp();
        let tol = QUAD_REL_TOL * scale;
        let mass = integrate_line(density, mode, scale, tol)?;
        let first = integrate_line(|x| f.dt_u(t, x) * density(x), mode, scale, tol)?;
        Ok(FactorMoments {
            log_z: mass.value.ln() - u_mode,
            mean_dt_u: first.value / mass.value,
        })
    }

    /// `E[e^{−2Δ}] / E[e^{−Δ}]²` with `Δ = u_1 − u_0` under the 1-d `π_0`.
    pub fn importance_ratio_constant(&self) -> Result<f64> {
        let f = &self.factor;
        let mode = self.factor_mode(0.0)?;
        let eta = 1e-4 * mode.abs().max(1.0);
        let curvature = (f.grad_u(0.0, mode + eta) - f.grad_u(0.0, mode - eta)) / (2.0 * eta);
        importance_constant(|x| f.u(0.0, x), |x| f.u(1.0, x), mode, 1.0 / curvature.sqrt())
    }
}

impl<F: ScalarFamily> AnnealingPotential for ProductPath<F> {
    fn family(&self) -> &'static str {
        "product"
    }

    fn dim(&self) -> usize {
        self.d
    }

    fn u(&self, t: f64, x: &[f64]) -> f64 {
        x.iter().map(|&v| self.factor.u(t, v)).sum()
    }

    fn grad_u(&self, t: f64, x: &[f64], out: &mut [f64]) {
        for (o, &v) in out.iter_mut().zip(x) {
            *o = self.factor.grad_u(t, v);
        }
    }

    fn dt_u(&self, t: f64, x: &[f64]) -> f64 {
        x.iter().map(|&v| self.factor.dt_u(t, v)).sum()
    }

    fn log_z(&self, t: f64) -> Result<f64> {
        let one = match self.factor.log_z(t).filter(|_| self.use_analytic) {
            Some(v) => v,
            None => self.factor_moments(t)?.log_z,
        };
        Ok(self.d as f64 * one)
    }

    fn log_z_source(&self) -> ReferenceSource {
        if self.use_analytic && self.factor.log_z(0.0).is_some() {
            ReferenceSource::Analytic
        } else {
            ReferenceSource::Quadrature
        }
    }

    fn minimizer(&self, t: f64) -> Result<Vec<f64>> {
        Ok(vec![self.factor_mode(t)?; self.d])
    }

    fn assumption_constants(&self) -> Result<AssumptionConstants> {
        self.factor
            .assumption_constants(self.d)
            .ok_or(Error::Unavailable("assumption constants"))
    }

    fn sample_pi0(&self, rng: &mut dyn RngCore) -> Result<Vec<f64>> {
        self.sample_pi_t(0.0, rng)
    }

    fn sample_pi_t(&self, t: f64, rng: &mut dyn RngCore) -> Result<Vec<f64>> {
        (0..self.d)
            .map(|_| self.factor.sample(t, rng).ok_or(Error::Unavailable("sample_pi_t")))
            .collect()
    }

    fn pi_t_dt_u(&self, t: f64) -> Result<f64> {
        let one = match self.factor.pi_t_dt_u(t).filter(|_| self.use_analytic) {
            Some(v) => v,
            None => self.factor_moments(t)?.mean_dt_u,
        };
        Ok(self.d as f64 * one)
    }
}

#[cfg(test)]
mod tests {
    use super::super::testing::*;
    use super::super::{GaussianPath, ScalarGaussian};
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn three_gaussian_factors_log_ratio() {
        let p = ProductPath::new(3, ScalarGaussian::new(1.0, 0.5).unwrap()).unwrap();
        let r = p.log_z(1.0).unwrap() - p.log_z(0.0).unwrap();
        assert!((r - 1.5 * 0.5f64.ln()).abs() < 1e-14);
        assert!((r + 1.039721).abs() < 1e-6);

        let q = ProductPath::new(3, ScalarGaussian::new(1.0, 0.5).unwrap())
            .unwrap()
            .quadrature_only();
        assert_eq!(q.log_z_source(), ReferenceSource::Quadrature);
        let rq = q.log_z(1.0).unwrap() - q.log_z(0.0).unwrap();
        assert!((rq - r).abs() < 1e-11, "{rq} vs {r}");
    }

    #[test]
    fn one_dimensional_product_equals_factor() {
        let p = ProductPath::new(1, ScalarGaussian::new(1.0, 0.5).unwrap()).unwrap();
        let g = GaussianPath::new(1, 1.0, 0.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let t: f64 = rng.random();
            let x = [rng.random::<f64>() * 8.0 - 4.0];
            assert!((p.u(t, &x) - g.u(t, &x)).abs() <= 1e-15 * g.u(t, &x).max(1.0));
            let (mut a, mut b) = ([0.0], [0.0]);
            p.grad_u(t, &x, &mut a);
            g.grad_u(t, &x, &mut b);
            assert!((a[0] - b[0]).abs() <= 1e-15 * b[0].abs().max(1.0));
            assert!((p.dt_u(t, &x) - g.dt_u(t, &x)).abs() <= 1e-14 * g.dt_u(t, &x).abs().max(1.0));
        }
    }

    #[test]
    fn gradient_in_ten_dimensions() {
        let p = ProductPath::new(10, ScalarGaussian::new(1.0, 0.5).unwrap()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..100 {
            let t: f64 = rng.random();
            let x: Vec<f64> = (0..10).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect();
            let mut g = vec![0.0; 10];
            p.grad_u(t, &x, &mut g);
            let s2 = 1.0 - 0.5 * t;
            for j in 0..10 {
                assert!((g[j] - x[j] / s2).abs() < 1e-15);
            }
            assert!(rel_err(&g, &fd_grad(&p, t, &x)) < 1e-5);
        }
    }

    #[test]
    fn quadrature_moments_match_closed_form() {
        let f = ScalarGaussian::new(1.0, 0.5).unwrap();
        let p = ProductPath::new(7, f).unwrap().quadrature_only();
        for &t in &[0.0, 0.3, 1.0] {
            let m = p.factor_moments(t).unwrap();
            assert!((m.log_z - f.log_z(t).unwrap()).abs() < 1e-12);
            assert!((m.mean_dt_u - f.pi_t_dt_u(t).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn importance_constant_gaussian() {
        let p = ProductPath::new(1, ScalarGaussian::new(1.0, 0.5).unwrap()).unwrap();
        let c = p.importance_ratio_constant().unwrap();
        assert!((c - 2.0 / 3f64.sqrt()).abs() < 1e-12);
    }
}
