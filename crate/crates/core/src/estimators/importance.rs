use rayon::prelude::*;

use super::{mean_var, EstimateReport, Reference, ReferenceSource};
use crate::error::{Error, Result};
use crate::potential::AnnealingPotential;
use crate::quad::{convex_argmin, integrate_line};
use crate::rng::NoiseKey;

/// Draws per independently keyed chunk in [`naive_is`].
const CHUNK: usize = 4096;
const QUAD_REL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct NaiveIsResult {
    /// Estimate of `Z_1/Z_0`; `values` are the raw weights `W_i`.
    pub ratio: EstimateReport,
    /// Self-normalized estimate of `π_1(φ)` when an observable was supplied.
    pub expectation: Option<EstimateReport>,
    /// `var̂[W] / mean̂[W]²`.
    pub relative_variance: f64,
}

/// Observable `φ` whose `π_1`-expectation is estimated alongside the ratio.
pub type Observable<'a> = &'a (dyn Fn(&[f64]) -> f64 + Sync);

/// One-step importance sampling: `W_i = exp(−(U_1 − U_0)(ζ_i))` with
/// `ζ_i ~ π_0`.
pub fn naive_is<P: AnnealingPotential + ?Sized>(
    p: &P,
    m: usize,
    phi: Option<Observable>,
    seed: u64,
) -> Result<NaiveIsResult> {
    if m == 0 {
        return Err(Error::EmptyInput("naive_is"));
    }
    let chunks = m.div_ceil(CHUNK);
    let parts: Vec<Result<Vec<(f64, f64)>>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = NoiseKey::new(seed, c as u64).initial_rng();
            let len = CHUNK.min(m - c * CHUNK);
            (0..len)
                .map(|_| {
                    let z = p.sample_pi0(&mut rng)?;
                    let lw = -(p.u(1.0, &z) - p.u(0.0, &z));
                    Ok((lw, phi.map_or(0.0, |f| f(&z))))
                })
                .collect()
        })
        .collect();
    let mut log_w = Vec::with_capacity(m);
    let mut phis = Vec::with_capacity(m);
    for part in parts {
        for (lw, f) in part? {
            log_w.push(lw);
            phis.push(f);
        }
    }
    if log_w.iter().any(|v| v.is_nan()) {
        return Err(Error::NonFinite("naive_is"));
    }
    let max = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(Error::DegenerateWeights);
    }
    // Relative variance is scale free: compute it on e^{lw − max}.
    let scaled: Vec<f64> = log_w.iter().map(|a| (a - max).exp()).collect();
    let (ms, vs) = mean_var(&scaled);
    let relative_variance = vs / (ms * ms);

    let weights: Vec<f64> = log_w.iter().map(|a| a.exp()).collect();
    let (mean_w, var_w) = mean_var(&weights);
    let reference = Reference::log_ratio_of(p);
    let ratio = EstimateReport {
        estimator: "naive_is".into(),
        estimate: mean_w,
        stderr: (var_w / m as f64).sqrt(),
        variance: var_w,
        values: weights,
        reference: reference.value.map(f64::exp),
        reference_source: reference.source,
    };

    let expectation = phi.map(|_| {
        // Delta-method standard error: Σ w̄_i²(φ_i − est)².
        let total: f64 = scaled.iter().sum();
        let est = scaled.iter().zip(&phis).map(|(w, f)| w * f).sum::<f64>() / total;
        let var_sum: f64 = scaled
            .iter()
            .zip(&phis)
            .map(|(w, f)| (w / total).powi(2) * (f - est).powi(2))
            .sum();
        let stderr = var_sum.sqrt();
        EstimateReport {
            estimator: "naive_is_expectation".into(),
            estimate: est,
            variance: m as f64 * stderr * stderr,
            stderr,
            values: phis,
            reference: None,
            reference_source: ReferenceSource::None,
        }
    });
    Ok(NaiveIsResult {
        ratio,
        expectation,
        relative_variance,
    })
}

/// `c = E[e^{−2Δ}] / E[e^{−Δ}]²`, `Δ = u_1 − u_0`, under `π_0 ∝ e^{−u_0}`,
/// by quadrature around the `π_0` mode.
pub(crate) fn importance_constant(
    u0: impl Fn(f64) -> f64,
    u1: impl Fn(f64) -> f64,
    mode: f64,
    scale: f64,
) -> Result<f64> {
    let u_mode = u0(mode);
    let delta_mode = u1(mode) - u_mode;
    let w = |x: f64, k: f64| {
        let a = u0(x);
        (-(a - u_mode) - k * (u1(x) - a - delta_mode)).exp()
    };
    let tol = QUAD_REL_TOL * scale;
    let z0 = integrate_line(|x| w(x, 0.0), mode, scale, tol)?.value;
    let z1 = integrate_line(|x| w(x, 1.0), mode, scale, tol)?.value;
    let z2 = integrate_line(|x| w(x, 2.0), mode, scale, tol)?.value;
    // The e^{kΔ(mode)} shifts cancel in the ratio.
    let c = z2 * z0 / (z1 * z1);
    if !c.is_finite() {
        return Err(Error::NonFinite("importance_constant"));
    }
    Ok(c)
}

/// Relative variance `c^d − 1` of one-step importance sampling between the
/// product measures `∏ e^{−u_0(x_j)}` and `∏ e^{−u_1(x_j)}`.
pub fn product_is_relvar(u0: impl Fn(f64) -> f64, u1: impl Fn(f64) -> f64, d: usize) -> Result<f64> {
    if d == 0 {
        return Err(Error::invalid("d", "dimension must be positive"));
    }
    let fd = |x: f64| {
        let e = 1e-6 * x.abs().max(1.0);
        (u0(x + e) - u0(x - e)) / (2.0 * e)
    };
    let mode = convex_argmin(fd, 0.0)?;
    let e = 1e-4 * mode.abs().max(1.0);
    let curvature = (u0(mode + e) - 2.0 * u0(mode) + u0(mode - e)) / (e * e);
    if !(curvature > 0.0 && curvature.is_finite()) {
        return Err(Error::invalid(
            "u0",
            format!("non-positive curvature {curvature} at the mode"),
        ));
    }
    let c = importance_constant(&u0, &u1, mode, 1.0 / curvature.sqrt())?;
    if c < 1.0 - 1e-12 {
        return Err(Error::JensenViolation(c));
    }
    Ok((d as f64 * c.max(1.0).ln()).exp_m1())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::{GaussianPath, ProductPath, ScalarGaussian};

    fn u_var(v: f64) -> impl Fn(f64) -> f64 {
        move |x| x * x / (2.0 * v)
    }

    #[test]
    fn identical_families_have_zero_relvar() {
        assert_eq!(product_is_relvar(u_var(1.0), u_var(1.0), 5).unwrap(), 0.0);
    }

    #[test]
    fn gaussian_relvar_matches_closed_form() {
        let c = 2.0 / 3f64.sqrt();
        let r1 = product_is_relvar(u_var(1.0), u_var(0.5), 1).unwrap();
        assert!((r1 - (c - 1.0)).abs() < 1e-10);
        assert!((r1 - 0.154701).abs() < 1e-6);
        let r20 = product_is_relvar(u_var(1.0), u_var(0.5), 20).unwrap();
        // (4/3)^10 − 1
        assert!((r20 - (c.powi(20) - 1.0)).abs() < 1e-8);
        assert!((r20 - 16.757_73).abs() < 1e-5);
    }

    #[test]
    fn non_centred_factor() {
        // u0 = (x−1)²/2, u1 = (x−1)²: c = 2/√3 irrespective of the shift.
        let r = product_is_relvar(|x| 0.5 * (x - 1.0) * (x - 1.0), |x| (x - 1.0) * (x - 1.0), 1).unwrap();
        assert!((r - (2.0 / 3f64.sqrt() - 1.0)).abs() < 1e-10);
    }

    #[test]
    fn identity_path_weights_are_one() {
        let p = GaussianPath::new(3, 1.0, 1.0).unwrap();
        let r = naive_is(&p, 1000, None, 1).unwrap();
        assert_eq!(r.ratio.estimate, 1.0);
        assert_eq!(r.relative_variance, 0.0);
        assert!(r.ratio.values.iter().all(|&w| w == 1.0));
    }

    #[test]
    fn one_dimensional_relvar_is_recovered() {
        let p = ProductPath::new(1, ScalarGaussian::new(1.0, 0.5).unwrap()).unwrap();
        let r = naive_is(&p, 200_000, None, 2).unwrap();
        let exact = 2.0 / 3f64.sqrt() - 1.0;
        assert!(
            (r.relative_variance / exact - 1.0).abs() < 0.05,
            "{}",
            r.relative_variance
        );
        // Z_1/Z_0 = √0.5.
        assert!((r.ratio.estimate - 0.5f64.sqrt()).abs() < 4.0 * r.ratio.stderr);
    }

    #[test]
    fn expectation_under_target() {
        let p = GaussianPath::new(2, 1.0, 0.5).unwrap();
        let phi = |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>();
        let r = naive_is(&p, 100_000, Some(&phi), 3).unwrap();
        let e = r.expectation.unwrap();
        assert!(
            (e.estimate - 1.0).abs() < 4.0 * e.stderr,
            "{} ± {}",
            e.estimate,
            e.stderr
        );
    }

    #[test]
    fn requires_sampler() {
        struct NoSampler;
        impl AnnealingPotential for NoSampler {
            fn family(&self) -> &'static str {
                "none"
            }
            fn dim(&self) -> usize {
                1
            }
            fn u(&self, _: f64, x: &[f64]) -> f64 {
                x[0] * x[0]
            }
            fn grad_u(&self, _: f64, x: &[f64], g: &mut [f64]) {
                g[0] = 2.0 * x[0];
            }
            fn dt_u(&self, _: f64, _: &[f64]) -> f64 {
                0.0
            }
        }
        assert!(matches!(naive_is(&NoSampler, 10, None, 0), Err(Error::Unavailable(_))));
    }
}
