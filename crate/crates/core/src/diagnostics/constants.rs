use crate::error::{Error, Result};

/// Which drift inequality a set of constants belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DriftContext {
    /// Continuous-time inhomogeneous diffusion, moments of order `2p`.
    Continuous,
    /// Frozen-time (homogeneous) diffusion.
    Homogeneous,
    /// Euler–Maruyama chain, second moments.
    Discrete,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DriftInputs {
    pub p_order: Option<f64>,
    pub kappa: Option<f64>,
    pub eps: f64,
    pub h: Option<f64>,
    pub k: f64,
    pub l: Option<f64>,
    pub d: usize,
    pub sup_dt_xstar: Option<f64>,
    pub sup_xstar: Option<f64>,
    pub delta_param: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftConstants {
    pub context: DriftContext,
    /// Drift rate `δ` (continuous contexts) or the free parameter `δ`
    /// (discrete context).
    pub delta: f64,
    pub r: Option<f64>,
    pub b: Option<f64>,
    pub alpha_p: Option<f64>,
    pub lambda_disc: Option<f64>,
    pub b_disc: Option<f64>,
    pub inputs: DriftInputs,
}

fn positive(name: &'static str, v: f64) -> Result<()> {
    if !(v.is_finite() && v > 0.0) {
        return Err(Error::invalid(name, format!("must be finite and positive, got {v}")));
    }
    Ok(())
}

fn non_negative(name: &'static str, v: f64) -> Result<()> {
    if !(v.is_finite() && v >= 0.0) {
        return Err(Error::invalid(
            name,
            format!("must be finite and non-negative, got {v}"),
        ));
    }
    Ok(())
}

/// `κ` defaults to `Kp/2`; must lie in `(0, Kp)`.
fn resolve_kappa(kappa: Option<f64>, k: f64, p: f64) -> Result<f64> {
    let kappa = kappa.unwrap_or(0.5 * k * p);
    if !(kappa > 0.0 && kappa < k * p) {
        return Err(Error::invalid(
            "kappa",
            format!("must lie in (0, Kp) = (0, {}), got {kappa}", k * p),
        ));
    }
    Ok(kappa)
}

fn check_common(p: f64, eps: f64, k: f64, d: usize) -> Result<()> {
    if !(p.is_finite() && p >= 1.0) {
        return Err(Error::invalid("p_order", format!("must be at least 1, got {p}")));
    }
    positive("eps", eps)?;
    positive("K", k)?;
    if d == 0 {
        return Err(Error::invalid("d", "dimension must be positive"));
    }
    Ok(())
}

/// `α = 2^{4p−2} ∨ [1 + 2^{2p−1}(b/δ + (1 + 2^{2p−1})·sup‖x*‖^{2p})]`.
fn alpha(p: f64, b_over_delta: f64, sup_xstar: f64) -> f64 {
    let two = |e: f64| 2f64.powf(e);
    two(4.0 * p - 2.0)
        .max(1.0 + two(2.0 * p - 1.0) * (b_over_delta + (1.0 + two(2.0 * p - 1.0)) * sup_xstar.powf(2.0 * p)))
}

/// Drift constants of `V_t^p(x) = ‖x − x_t*‖^{2p}` for the continuous-time
/// inhomogeneous diffusion.
pub fn continuous_drift_constants(
    p_order: f64,
    kappa: Option<f64>,
    eps: f64,
    k: f64,
    d: usize,
    sup_dt_xstar: f64,
    sup_xstar: f64,
) -> Result<DriftConstants> {
    check_common(p_order, eps, k, d)?;
    non_negative("sup_dt_xstar", sup_dt_xstar)?;
    non_negative("sup_xstar", sup_xstar)?;
    let p = p_order;
    let kappa = resolve_kappa(kappa, k, p)?;
    let delta = (k * p - kappa) / eps;
    let q = 2.0 * (p - 1.0) + d as f64;
    let a = p / kappa * eps * sup_dt_xstar;
    let r = a + (a * a + 2.0 * p / kappa * q).sqrt();
    let b = 2.0 * p * r.powf(2.0 * p - 1.0) * (sup_dt_xstar + q / (eps * r));
    Ok(DriftConstants {
        context: DriftContext::Continuous,
        delta,
        r: Some(r),
        b: Some(b),
        alpha_p: Some(alpha(p, b / delta, sup_xstar)),
        lambda_disc: None,
        b_disc: None,
        inputs: DriftInputs {
            p_order: Some(p),
            kappa: Some(kappa),
            eps,
            k,
            d,
            sup_dt_xstar: Some(sup_dt_xstar),
            sup_xstar: Some(sup_xstar),
            ..Default::default()
        },
    })
}

/// Drift constants for the frozen-time (homogeneous) diffusion.
pub fn frozen_drift_constants(
    p_order: f64,
    kappa: Option<f64>,
    eps: f64,
    k: f64,
    d: usize,
    sup_xstar: f64,
) -> Result<DriftConstants> {
    check_common(p_order, eps, k, d)?;
    non_negative("sup_xstar", sup_xstar)?;
    let p = p_order;
    let kappa = resolve_kappa(kappa, k, p)?;
    let delta = (k * p - kappa) / eps;
    let q = 2.0 * (p - 1.0) + d as f64;
    let r = ((4.0 * p * (p - 1.0) + 2.0 * p * d as f64) / kappa).sqrt();
    let rp = r.powf(2.0 * (p - 1.0));
    let b = 2.0 * p * rp * q / eps;
    let b_over_delta = 2.0 * p * rp / (k * p - kappa) * q;
    Ok(DriftConstants {
        context: DriftContext::Homogeneous,
        delta,
        r: Some(r),
        b: Some(b),
        alpha_p: Some(alpha(p, b_over_delta, sup_xstar)),
        lambda_disc: None,
        b_disc: None,
        inputs: DriftInputs {
            p_order: Some(p),
            kappa: Some(kappa),
            eps,
            k,
            d,
            sup_xstar: Some(sup_xstar),
            ..Default::default()
        },
    })
}

/// One-step drift `P̃_k V_{kh} ≤ λ·V_{(k−1)h} + b` of the Euler chain with
/// `V_t(x) = ‖x − x_t*‖²`. `delta_param` defaults to 1/2.
pub fn discrete_drift_constants(
    eps: f64,
    h: f64,
    k: f64,
    l: f64,
    d: usize,
    sup_dt_xstar: f64,
    delta_param: Option<f64>,
) -> Result<DriftConstants> {
    positive("eps", eps)?;
    positive("h", h)?;
    positive("K", k)?;
    positive("L", l)?;
    non_negative("sup_dt_xstar", sup_dt_xstar)?;
    if d == 0 {
        return Err(Error::invalid("d", "dimension must be positive"));
    }
    let delta = delta_param.unwrap_or(0.5);
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::invalid(
            "delta_param",
            format!("must lie in (0, 1), got {delta}"),
        ));
    }
    let a = h / eps;
    if a >= 2.0 * k / (l * l) {
        return Err(Error::invalid(
            "h",
            format!("h/eps = {a} must be below 2K/L² = {}", 2.0 * k / (l * l)),
        ));
    }
    let beta = 2.0 * a * k - a * a * l * l;
    let lambda = 1.0 - beta * (1.0 - delta);
    let b = sup_dt_xstar * sup_dt_xstar * (4.0 * h * h / (delta * beta) + h * h) + 2.0 * d as f64 * a;
    Ok(DriftConstants {
        context: DriftContext::Discrete,
        delta,
        r: None,
        b: None,
        alpha_p: None,
        lambda_disc: Some(lambda),
        b_disc: Some(b),
        inputs: DriftInputs {
            eps,
            h: Some(h),
            k,
            l: Some(l),
            d,
            sup_dt_xstar: Some(sup_dt_xstar),
            delta_param: Some(delta),
            ..Default::default()
        },
    })
}

/// Total-variation bound between the laws of the diffusion and of its
/// Euler–Maruyama interpolation on `[0, 1]`:
/// `½[L²d·h/ε² + (h³/(3ε))(M² + L⁴/ε²)(1/h + (μ_0(V_0) + b/h)/(1 − λ))]^{1/2}`.
#[allow(clippy::too_many_arguments)]
pub fn tv_bound(
    eps: f64,
    h: f64,
    k: f64,
    l: f64,
    m: f64,
    d: usize,
    mu0_v: f64,
    sup_dt_xstar: f64,
    delta_param: Option<f64>,
) -> Result<f64> {
    non_negative("M", m)?;
    non_negative("mu0_V", mu0_v)?;
    let c = discrete_drift_constants(eps, h, k, l, d, sup_dt_xstar, delta_param)?;
    let lambda = c.lambda_disc.expect("discrete constants");
    let b = c.b_disc.expect("discrete constants");
    let sum_moments = 1.0 / h + (mu0_v + b / h) / (1.0 - lambda);
    let inner =
        l * l * d as f64 * h / (eps * eps) + h.powi(3) / (3.0 * eps) * (m * m + l.powi(4) / (eps * eps)) * sum_moments;
    Ok(0.5 * inner.sqrt())
}
