use super::{AnnealingPotential, LogisticModel};
use crate::error::{Error, Result};

const POWER_ITERATION_TOL: f64 = 1e-10;
const POWER_ITERATION_MAX: usize = 10_000;

/// Regularity constants of a path: strong convexity `K`, gradient Lipschitz
/// constant `L` and time-continuity constant `M`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssumptionConstants {
    pub strong_convexity: f64,
    pub lipschitz: f64,
    pub time_continuity: f64,
    /// `‖Cᵀy‖ + Σ‖c_i‖` (logistic paths).
    pub xi: Option<f64>,
    /// Largest eigenvalue of `m⁻¹CᵀC` (logistic paths).
    pub lambda_max: Option<f64>,
}

impl AssumptionConstants {
    pub fn new(k: f64, l: f64, m: f64, xi: Option<f64>, lambda_max: Option<f64>) -> Result<Self> {
        if !(k.is_finite() && k > 0.0) {
            return Err(Error::invalid("K", format!("must be finite and positive, got {k}")));
        }
        if !(l.is_finite() && l >= k) {
            return Err(Error::invalid(
                "L",
                format!("must be finite and at least K = {k}, got {l}"),
            ));
        }
        if !(m.is_finite() && m >= 0.0) {
            return Err(Error::invalid("M", format!("must be finite and non-negative, got {m}")));
        }
        Ok(Self {
            strong_convexity: k,
            lipschitz: l,
            time_continuity: m,
            xi,
            lambda_max,
        })
    }

    /// `L / K`.
    pub fn condition_number(&self) -> f64 {
        self.lipschitz / self.strong_convexity
    }
}

/// Constants of a path whose family has known formulas (Gaussian, logistic).
pub fn compute_constants(p: &dyn AnnealingPotential) -> Result<AssumptionConstants> {
    p.assumption_constants()
}

/// Largest eigenvalue of `m⁻¹CᵀC` by power iteration, to relative tolerance
/// `1e-10`. Returns 0 for an empty or all-zero design.
pub fn power_iteration_lambda_max(model: &LogisticModel) -> Result<f64> {
    let d = model.dim();
    let m = model.observations();
    if m == 0 || model.rows().all(|r| r.iter().all(|&v| v == 0.0)) {
        return Ok(0.0);
    }
    let apply = |v: &[f64], out: &mut [f64]| {
        out.iter_mut().for_each(|o| *o = 0.0);
        for c in model.rows() {
            let s: f64 = c.iter().zip(v).map(|(a, b)| a * b).sum();
            for (o, &cj) in out.iter_mut().zip(c) {
                *o += s * cj;
            }
        }
        out.iter_mut().for_each(|o| *o /= m as f64);
    };
    // Start from the diagonal of CᵀC so the start is never orthogonal to the
    // top eigenvector of a non-zero PSD matrix with an all-positive diagonal
    // direction; add a small irregular component to break symmetric ties.
    let mut v: Vec<f64> = (0..d)
        .map(|j| model.rows().map(|c| c[j] * c[j]).sum::<f64>() + 1e-3 * (1.0 + j as f64).sqrt())
        .collect();
    normalize(&mut v);
    let mut w = vec![0.0; d];
    let mut lambda = 0.0;
    let mut residual = f64::INFINITY;
    for _ in 0..POWER_ITERATION_MAX {
        apply(&v, &mut w);
        let next: f64 = w.iter().zip(&v).map(|(a, b)| a * b).sum();
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        // ‖Av − (vᵀAv)v‖ bounds the distance of the Rayleigh quotient from
        // an eigenvalue.
        residual = w
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - next * b).powi(2))
            .sum::<f64>()
            .sqrt();
        let converged = (next - lambda).abs() <= POWER_ITERATION_TOL * next.abs()
            && residual <= POWER_ITERATION_TOL.sqrt() * next.abs();
        lambda = next;
        if norm == 0.0 {
            return Ok(0.0);
        }
        v.iter_mut().zip(&w).for_each(|(a, b)| *a = b / norm);
        if converged {
            return Ok(lambda);
        }
    }
    Err(Error::PowerIterationNotConverged {
        iterations: POWER_ITERATION_MAX,
        residual,
    })
}

fn normalize(v: &mut [f64]) {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= n);
}

/// `K = 1/σ̃²`, `L = (m·λ_max/4 + 1/σ̃²) ∨ ξ ∨ 1/σ̃²`, `M = ξ`.
pub(super) fn logistic_constants(model: &LogisticModel) -> Result<AssumptionConstants> {
    let inv = 1.0 / model.prior_var();
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let xi = norm(&model.cty()) + model.rows().map(norm).sum::<f64>();
    let lambda = power_iteration_lambda_max(model)?;
    let m = model.observations() as f64;
    let l = (0.25 * m * lambda + inv).max(xi.max(inv));
    AssumptionConstants::new(inv, l, xi, Some(xi), Some(lambda))
}
