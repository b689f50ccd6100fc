//! One-dimensional integration over the real line.
//!
//! Thin layer over the tanh-sinh rule of the `quadrature` crate: the line is
//! split into a core window of `CORE_PANELS` panels around `center` plus two
//! tails mapped onto `[0, 1)`, and the per-panel error estimates are summed.

use crate::error::{Error, Result};

const CORE_HALF_WIDTH: f64 = 12.0;
const CORE_PANELS: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub error_estimate: f64,
}

fn panel<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> Integral {
    let out = quadrature::double_exponential::integrate(f, a, b, tol);
    Integral {
        value: out.integral,
        error_estimate: out.error_estimate,
    }
}

/// Integrate `f` over the real line. `center`/`scale` locate the bulk of the
/// mass (mode and spread); `abs_tol` is the requested absolute error.
pub fn integrate_line<F>(f: F, center: f64, scale: f64, abs_tol: f64) -> Result<Integral>
where
    F: Fn(f64) -> f64,
{
    if !(scale > 0.0 && scale.is_finite() && center.is_finite()) {
        return Err(Error::invalid("scale", format!("center {center}, scale {scale}")));
    }
    let panels = CORE_PANELS + 2;
    let panel_tol = abs_tol / panels as f64;
    let lo = center - CORE_HALF_WIDTH * scale;
    let hi = center + CORE_HALF_WIDTH * scale;
    let width = (hi - lo) / CORE_PANELS as f64;

    let mut total = Integral {
        value: 0.0,
        error_estimate: 0.0,
    };
    let mut add = |part: Integral| {
        total.value += part.value;
        total.error_estimate += part.error_estimate;
    };
    for i in 0..CORE_PANELS {
        let a = lo + i as f64 * width;
        let b = if i + 1 == CORE_PANELS { hi } else { a + width };
        add(panel(&f, a, b, panel_tol));
    }
    // x = hi + scale * u / (1 - u)
    let right = |u: f64| {
        let w = 1.0 - u;
        let v = f(hi + scale * u / w);
        if v == 0.0 {
            0.0
        } else {
            v * scale / (w * w)
        }
    };
    add(panel(&right, 0.0, 1.0, panel_tol));
    let left = |u: f64| {
        let w = 1.0 - u;
        let v = f(lo - scale * u / w);
        if v == 0.0 {
            0.0
        } else {
            v * scale / (w * w)
        }
    };
    add(panel(&left, 0.0, 1.0, panel_tol));

    if !total.value.is_finite() || total.error_estimate > abs_tol {
        return Err(Error::QuadratureNotConverged {
            achieved: total.error_estimate,
            requested: abs_tol,
        });
    }
    Ok(total)
}

/// Locate the minimizer of a strictly convex 1-d function from its
/// derivative by bracketing and bisection.
pub fn convex_argmin(grad: impl Fn(f64) -> f64, start: f64) -> Result<f64> {
    let g0 = grad(start);
    if !g0.is_finite() {
        return Err(Error::NonFinite("convex_argmin"));
    }
    if g0 == 0.0 {
        return Ok(start);
    }
    let dir = if g0 > 0.0 { -1.0 } else { 1.0 };
    let mut step = 1.0;
    let mut far = start + dir * step;
    let mut expansions = 0;
    while grad(far).signum() == g0.signum() {
        step *= 2.0;
        far = start + dir * step;
        expansions += 1;
        if expansions > 200 {
            return Err(Error::invalid("grad", "no sign change; potential not convex"));
        }
    }
    let (mut a, mut b) = if dir > 0.0 { (start, far) } else { (far, start) };
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m == a || m == b {
            break;
        }
        if grad(m) > 0.0 {
            b = m;
        } else {
            a = m;
        }
    }
    Ok(0.5 * (a + b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_integral() {
        for &s in &[0.01, 1.0, 30.0] {
            let r = integrate_line(
                |x: f64| (-0.5 * (x - 2.0) * (x - 2.0) / (s * s)).exp(),
                2.0,
                s,
                1e-13 * s,
            )
            .unwrap();
            let exact = s * (2.0 * std::f64::consts::PI).sqrt();
            assert!(
                ((r.value - exact) / exact).abs() < 1e-12,
                "s={s}: {} vs {exact}",
                r.value
            );
        }
    }

    #[test]
    fn heavy_ish_tail() {
        // ∫ 1/(1+x²) = π
        let r = integrate_line(|x: f64| 1.0 / (1.0 + x * x), 0.0, 1.0, 1e-9).unwrap();
        assert!((r.value - std::f64::consts::PI).abs() < 1e-8);
    }

    #[test]
    fn argmin_quadratic() {
        let m = convex_argmin(|x| 3.0 * (x - 1.25), 0.0).unwrap();
        assert!((m - 1.25).abs() < 1e-14);
        let m = convex_argmin(|x| x + 7.5, 0.0).unwrap();
        assert!((m + 7.5).abs() < 1e-14);
    }
}
