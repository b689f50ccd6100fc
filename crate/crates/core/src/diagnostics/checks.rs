// Negated comparisons below make NaN count as a violation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::f64::consts::SQRT_2;

use libm::erfc;
use rayon::prelude::*;

use super::{BoundReport, DriftConstants, DriftContext};
use crate::error::{Error, Result};
use crate::estimators::mean_var;
use crate::potential::{AnnealingPotential, GaussianPath};
use crate::sde::{grid_len, run_annealing, CoupledPair, RunConfig, SkeletonPath};

/// Multiplier on the asymptotic 5% Kolmogorov–Smirnov critical value.
pub const DEFAULT_KS_THRESHOLD_FACTOR: f64 = 1.5;
const KS_CRITICAL_5PCT: f64 = 1.36;
const RELATIVE_TOL: f64 = 1e-12;
const SEPARATION_FLOOR: f64 = 1e-3;
const THERMO_STEP: f64 = 1e-3;
const THERMO_THRESHOLD: f64 = 1e-8;

/// Checks the closed-form one-step expectation
/// `E‖x − (h/ε)∇U_{(k−1)h}(x) + ξ − x_{kh}*‖² = ‖x − (h/ε)∇U_{(k−1)h}(x) − x_{kh}*‖² + 2dh/ε`
/// against `λ·‖x − x_{(k−1)h}*‖² + b` at every trial point and grid index.
pub fn drift_check<P: AnnealingPotential + ?Sized>(
    p: &P,
    consts: &DriftConstants,
    trial_points: &[Vec<f64>],
) -> Result<BoundReport> {
    if consts.context != DriftContext::Discrete {
        return Err(Error::invalid("consts", "drift_check needs discrete-chain constants"));
    }
    if trial_points.is_empty() {
        return Err(Error::EmptyInput("drift_check trial points"));
    }
    let (lambda, b) = (
        consts.lambda_disc.unwrap_or(f64::NAN),
        consts.b_disc.unwrap_or(f64::NAN),
    );
    let eps = consts.inputs.eps;
    let h = consts.inputs.h.ok_or_else(|| Error::invalid("consts", "missing h"))?;
    let d = p.dim();
    let a = h / eps;
    let noise = 2.0 * d as f64 * a;
    let n = grid_len(h);
    let xstar: Vec<Vec<f64>> = (0..=n)
        .map(|k| p.minimizer((k as f64 * h).min(1.0)))
        .collect::<Result<_>>()?;
    let mut grad = vec![0.0; d];
    let (mut worst, mut violations, mut checked) = (0.0f64, 0usize, 0usize);
    for x in trial_points {
        crate::potential::check_dim(p, x)?;
        for k in 1..=n {
            let t_prev = (k - 1) as f64 * h;
            p.grad_u(t_prev, x, &mut grad);
            let mut lhs = noise;
            let mut v_prev = 0.0;
            for j in 0..d {
                let m = x[j] - a * grad[j] - xstar[k][j];
                lhs += m * m;
                let e = x[j] - xstar[k - 1][j];
                v_prev += e * e;
            }
            let rhs = lambda * v_prev + b;
            let ratio = lhs / rhs;
            if !(lhs <= rhs * (1.0 + RELATIVE_TOL)) {
                violations += 1;
            }
            if ratio.is_nan() {
                worst = f64::INFINITY;
            } else {
                worst = worst.max(ratio);
            }
            checked += 1;
        }
    }
    Ok(BoundReport::new("drift", 1.0, worst, RELATIVE_TOL).with_counts(violations, checked))
}

/// Number of leading grid points at which the coupled separation is resolved.
/// Once the legs agree to within a few digits of their magnitude, `x − y` is
/// rounding noise and says nothing about the chain. Without stored states the
/// initial separation stands in for the magnitude.
fn resolved_len(pair: &CoupledPair) -> usize {
    let norm = |path: &SkeletonPath, k: usize| {
        let x = if k == path.n {
            Some(path.endpoint.as_slice())
        } else {
            path.state(k)
        };
        x.map_or(0.0, |s| s.iter().map(|v| v * v).sum::<f64>().sqrt())
    };
    let floor = |k: usize| {
        let scale = if pair.path_x.has_states() {
            norm(&pair.path_x, k).max(norm(&pair.path_y, k))
        } else {
            pair.initial_separation
        };
        SEPARATION_FLOOR * scale.max(f64::MIN_POSITIVE)
    };
    let sep = &pair.separations;
    (0..sep.len()).find(|&k| sep[k] < floor(k)).unwrap_or(sep.len())
}

/// Synchronous-coupling contraction with discretization slack:
/// `‖X_t − Y_t‖/‖x_0 − y_0‖ ≤ e^{−Kt/ε}·(1 + 10Lh/ε)` at every grid time
/// where the separation is resolved.
pub fn contraction_check(pair: &CoupledPair, k: f64, l: f64, eps: f64) -> Result<BoundReport> {
    let s0 = pair.initial_separation;
    if s0 == 0.0 {
        return Err(Error::invalid("pair", "zero initial separation"));
    }
    let h = pair.path_x.h;
    let slack = 1.0 + 10.0 * l * h / eps;
    let n = resolved_len(pair);
    let (mut worst, mut violations) = (0.0f64, 0usize);
    for (i, &s) in pair.separations[..n].iter().enumerate() {
        let t = i as f64 * h;
        let bound = (-k * t / eps).exp() * slack;
        let ratio = s / s0;
        if !(ratio <= bound) {
            violations += 1;
        }
        worst = worst.max(ratio / bound);
    }
    Ok(BoundReport::new("contraction", 1.0, worst, 0.0).with_counts(violations, n))
}

/// For the Gaussian path the coupled difference is multiplied by exactly
/// `1 − h/(εσ_{kh}²)` each step; reports the largest relative deviation.
pub fn gaussian_step_factor_check(pair: &CoupledPair, path: &GaussianPath, eps: f64) -> Result<BoundReport> {
    if pair.initial_separation == 0.0 {
        return Err(Error::invalid("pair", "zero initial separation"));
    }
    let h = pair.path_x.h;
    let sep = &pair.separations;
    let n = resolved_len(pair);
    let (mut worst, mut violations, mut checked) = (0.0f64, 0usize, 0usize);
    for k in 0..n.saturating_sub(1) {
        let exact = (1.0 - h / (eps * path.variance(k as f64 * h))).abs();
        let dev = (sep[k + 1] / sep[k] - exact).abs() / exact.max(f64::MIN_POSITIVE);
        if !(dev <= RELATIVE_TOL) {
            violations += 1;
        }
        worst = worst.max(dev);
        checked += 1;
    }
    Ok(BoundReport::new("gaussian_step_factor", RELATIVE_TOL, worst, 0.0).with_counts(violations, checked))
}

/// Checks `∂_t log Z_t + π_t(∂_tU_t) = 0` with a five-point difference of
/// `log Z` (step 1e-3, so `t` slightly outside `[0, 1]` is evaluated).
pub fn thermo_identity_check<P: AnnealingPotential + ?Sized>(p: &P, t_grid: &[f64]) -> Result<BoundReport> {
    if t_grid.is_empty() {
        return Err(Error::EmptyInput("thermo_identity_check t_grid"));
    }
    let e = THERMO_STEP;
    let (mut worst, mut violations) = (0.0f64, 0usize);
    for &t in t_grid {
        let lz = |s: f64| p.log_z(s);
        let deriv = (-lz(t + 2.0 * e)? + 8.0 * lz(t + e)? - 8.0 * lz(t - e)? + lz(t - 2.0 * e)?) / (12.0 * e);
        let residual = (deriv + p.pi_t_dt_u(t)?).abs();
        if !(residual < THERMO_THRESHOLD) {
            violations += 1;
        }
        worst = worst.max(if residual.is_nan() { f64::INFINITY } else { residual });
    }
    Ok(BoundReport::new("thermo_identity", THERMO_THRESHOLD, worst, 0.0).with_counts(violations, t_grid.len()))
}

/// Per-coordinate variances `v_k` of the Gaussian-path chain started at
/// `π_0`: `v_0 = var0`, `v_{k+1} = a_k²v_k + 2h/ε`, `a_k = 1 − h/(εσ_{kh}²)`.
fn gaussian_chain_variances(path: &GaussianPath, eps: f64, h: f64) -> Vec<f64> {
    let n = grid_len(h);
    let mut v = Vec::with_capacity(n + 1);
    let mut vk = path.var0();
    for k in 0..=n {
        v.push(vk);
        let a = 1.0 - h / (eps * path.variance(k as f64 * h));
        vk = a * a * vk + 2.0 * h / eps;
    }
    v
}

/// `sup_k var[f_{kh}(X_{kh})]` for `f_t = ∂_tU_t − π_t(∂_tU_t)` on the Gaussian
/// path: `var f_t = c_t²·2d·v²` with `∂_tU_t = c_t‖x‖²`.
pub fn gaussian_sup_variance(path: &GaussianPath, eps: f64, h: f64) -> f64 {
    let d = path.dim() as f64;
    let v = gaussian_chain_variances(path, eps, h);
    (0..grid_len(h))
        .map(|k| {
            let c = path.dt_coefficient(k as f64 * h);
            c * c * 2.0 * d * v[k] * v[k]
        })
        .fold(0.0, f64::max)
}

/// Exact mean and variance of `S = h·Σ_k c_{kh}‖X_{kh}‖²` for the Gaussian
/// path chain started at `π_0`.
///
/// Coordinates are independent AR(1) chains with
/// `Cov(x_j, x_k) = v_j·∏_{i=j}^{k−1} a_i` for `j ≤ k`, so per coordinate
/// `var S = 2Σ_k w_k²v_k² + 4Σ_{j<k} w_j w_k v_j²∏a_i²`, which the running
/// sum `A_{k+1} = (A_k + w_k v_k²)·a_k²` evaluates in O(n).
pub fn gaussian_s_moments(path: &GaussianPath, eps: f64, h: f64) -> (f64, f64) {
    let d = path.dim() as f64;
    let v = gaussian_chain_variances(path, eps, h);
    let (mut mean, mut diag, mut cross, mut acc) = (0.0, 0.0, 0.0, 0.0);
    for (k, &vk) in v.iter().enumerate().take(grid_len(h)) {
        let t = k as f64 * h;
        let w = h * path.dt_coefficient(t);
        let a = 1.0 - h / (eps * path.variance(t));
        mean += w * vk;
        diag += w * w * vk * vk;
        cross += w * acc;
        acc = (acc + w * vk * vk) * a * a;
    }
    (d * mean, d * 2.0 * (diag + 2.0 * cross))
}

/// `h(1 + 2/(1 − e^{−Kh/ε}))·sup_var`.
pub fn variance_bound(k: f64, eps: f64, h: f64, sup_var: f64) -> f64 {
    h * (1.0 + 2.0 / -(-k * h / eps).exp_m1()) * sup_var
}

/// Empirical `var[S]` over replicates against the variance bound with the
/// AR(1) supremum on the right-hand side.
pub fn variance_bound_check(path: &GaussianPath, eps: f64, h: f64, s_values: &[f64]) -> Result<BoundReport> {
    if s_values.len() < 2 {
        return Err(Error::EmptyInput("variance_bound_check (need two replicates)"));
    }
    let k = path.assumption_constants()?.strong_convexity;
    let bound = variance_bound(k, eps, h, gaussian_sup_variance(path, eps, h));
    let observed = mean_var(s_values).1;
    Ok(BoundReport::new("variance_bound", bound, observed, 0.0))
}

/// Variance bound for families without a closed-form chain covariance:
/// `sup_k var[∂_tU_{kh}(X_{kh})]` is estimated across replicates and inflated
/// by three standard errors of the sample variance. Chains start at `π_0`.
pub fn empirical_variance_bound_check<P: AnnealingPotential + ?Sized>(
    p: &P,
    cfg: &RunConfig,
    replicates: usize,
) -> Result<BoundReport> {
    if replicates < 2 {
        return Err(Error::EmptyInput(
            "empirical_variance_bound_check (need two replicates)",
        ));
    }
    let k = p.assumption_constants()?.strong_convexity;
    let n = cfg.steps();
    let runs: Vec<Result<(Vec<f64>, f64)>> = (0..replicates as u64)
        .into_par_iter()
        .map(|r| {
            let key = cfg.key(r);
            let mut x = p.sample_pi0(&mut key.initial_rng())?;
            let mut f = Vec::with_capacity(n);
            let s = run_annealing(p, cfg.epsilon, cfg.h, &mut x, &mut key.increments(), |j, xj| {
                f.push(p.dt_u(j as f64 * cfg.h, xj))
            })?;
            Ok((f, s))
        })
        .collect();
    let runs: Vec<(Vec<f64>, f64)> = runs.into_iter().collect::<Result<_>>()?;
    let nr = replicates as f64;
    let mut sup = 0.0f64;
    for j in 0..n {
        let col: Vec<f64> = runs.iter().map(|(f, _)| f[j]).collect();
        let (mean, var) = mean_var(&col);
        let m4 = col.iter().map(|v| (v - mean).powi(4)).sum::<f64>() / nr;
        let se = ((m4 - var * var).max(0.0) / nr).sqrt();
        sup = sup.max(var + 3.0 * se);
    }
    let s_values: Vec<f64> = runs.iter().map(|(_, s)| *s).collect();
    let bound = variance_bound(k, cfg.epsilon, cfg.h, sup);
    Ok(BoundReport::new("variance_bound", bound, mean_var(&s_values).1, 0.0))
}

/// `Φ(x) = erfc(−x/√2)/2`.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / SQRT_2)
}

/// One-sample Kolmogorov–Smirnov distance to the standard normal.
pub fn ks_statistic(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyInput("ks_statistic"));
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::NonFinite("ks_statistic"));
    }
    let mut xs = values.to_vec();
    xs.sort_by(|a, b| a.total_cmp(b));
    let n = xs.len() as f64;
    Ok(xs
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = normal_cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max))
}

/// Kolmogorov–Smirnov test of standardized values against `N(0, 1)`.
/// The default threshold is `1.5 × 1.36/√N`.
pub fn clt_check(standardized: &[f64], threshold: Option<f64>) -> Result<(f64, BoundReport)> {
    let ks = ks_statistic(standardized)?;
    let thr = threshold.unwrap_or(DEFAULT_KS_THRESHOLD_FACTOR * KS_CRITICAL_5PCT / (standardized.len() as f64).sqrt());
    let mut report = BoundReport::new("clt_ks", thr, ks, 0.0);
    report.satisfied = ks < thr;
    report.violations = usize::from(!report.satisfied);
    Ok((ks, report))
}
