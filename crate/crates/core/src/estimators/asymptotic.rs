//! Local asymptotic variances `ς_ℓ(s) = 2E[f_s·g_s] − ℓ·var(f_s)` of a
//! centred observable under the stationary frozen-time chain, with
//! `g_s = ℓ·Σ_{k=0}^{r} Q_{kℓ} f_s` (or `∫ Q_t f_s dt` at `ℓ = 0`), and their
//! integral `σ_ℓ² = ∫ ς_ℓ(s) ds`.
//!
//! The frozen semigroup `Q` is that of `dY = −∇U_s(Y)dt + √2 dB`, simulated
//! with step `h_eff`. A single long stationary chain supplies every start:
//! by stationarity `E[f(Y_0)·f(Y_τ)] = E[f(Y_τ)·f(Y_0)]`, so `f(Y_i)` is paired
//! with the backward sum `Σ_k f(Y_{i−km})`, kept per residue class `i mod m`
//! in O(1) work per step. Standard errors come from batch means.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::potential::AnnealingPotential;
use crate::rng::NoiseKey;
use crate::sde::run_frozen;

/// `φ_λ(ℓ) = ℓ(1 + e^{−ℓλ})/(1 − e^{−ℓλ})`, continuous at `ℓ = 0` with value
/// `2/λ`: the local asymptotic variance contributed by an eigenvalue `λ` of
/// unit spectral mass.
pub fn spectral_phi(lambda: f64, ell: f64) -> Result<f64> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::invalid(
            "lambda",
            format!("must be finite and positive, got {lambda}"),
        ));
    }
    if !(ell.is_finite() && ell >= 0.0) {
        return Err(Error::invalid(
            "ell",
            format!("must be finite and non-negative, got {ell}"),
        ));
    }
    let x = ell * lambda;
    if x < 1e-6 {
        // (2/λ)·(x/2)·coth(x/2) = (2/λ)(1 + x²/12 − x⁴/720 + …)
        let x2 = x * x;
        return Ok(2.0 / lambda * (1.0 + x2 / 12.0 - x2 * x2 / 720.0));
    }
    Ok(ell / (0.5 * x).tanh())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AsymptoticVarianceConfig {
    /// Step of the frozen chain; `ℓ` must be a multiple of it.
    pub h_eff: f64,
    /// Stationary starts per `s` (after burn-in and window fill).
    pub samples: usize,
    /// Truncation tolerance of the series/integral defining `g_s`.
    pub tol: f64,
    /// Number of batches for batch-means standard errors.
    pub batches: usize,
    pub seed: u64,
    /// Strong convexity constant; taken from the path when `None`.
    pub strong_convexity: Option<f64>,
}

impl AsymptoticVarianceConfig {
    pub fn new(h_eff: f64, samples: usize, seed: u64) -> Self {
        Self {
            h_eff,
            samples,
            tol: 1e-6,
            batches: 50,
            seed,
            strong_convexity: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalVariance {
    pub s: f64,
    pub value: f64,
    pub stderr: f64,
    /// Sample mean of `f_s` along the chain (centering diagnostic).
    pub mean_f: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AsymptoticVarianceResult {
    pub ell: f64,
    /// Equal-weight Riemann sum of the local values over the `s` grid.
    pub sigma2: f64,
    pub stderr: f64,
    pub per_s_values: Vec<LocalVariance>,
    pub truncation_r: usize,
    /// Frozen-chain burn-in steps (0 when exact stationary draws were used).
    pub burn_in: usize,
}

/// Lag structure: spacing `m` steps, weight `w`, `r + 1` terms.
#[derive(Debug, Clone, Copy)]
struct Window {
    m: usize,
    w: f64,
    r: usize,
}

fn window(ell: f64, h_eff: f64, k: f64, tol: f64) -> Result<Window> {
    let (m, w) = if ell == 0.0 {
        (1, h_eff)
    } else {
        let m = (ell / h_eff).round();
        if m < 1.0 || ((m * h_eff - ell) / ell).abs() > 1e-9 {
            return Err(Error::invalid(
                "ell",
                format!("ell = {ell} is not a positive multiple of h_eff = {h_eff}"),
            ));
        }
        (m as usize, ell)
    };
    let r = (-tol.ln() / (k * ell.max(h_eff))).ceil().max(1.0) as usize;
    Ok(Window { m, w, r })
}

pub fn asymptotic_variance<P>(
    p: &P,
    f: &(dyn Fn(f64, &[f64]) -> f64 + Sync),
    ell: f64,
    cfg: &AsymptoticVarianceConfig,
    s_grid: &[f64],
) -> Result<AsymptoticVarianceResult>
where
    P: AnnealingPotential + ?Sized,
{
    if s_grid.is_empty() {
        return Err(Error::EmptyInput("asymptotic_variance s_grid"));
    }
    if !(ell.is_finite() && ell >= 0.0) {
        return Err(Error::invalid(
            "ell",
            format!("must be finite and non-negative, got {ell}"),
        ));
    }
    if !(cfg.h_eff.is_finite() && cfg.h_eff > 0.0) {
        return Err(Error::invalid("h_eff", "must be finite and positive"));
    }
    if !(cfg.tol > 0.0 && cfg.tol < 1.0) {
        return Err(Error::invalid("tol", "must lie in (0, 1)"));
    }
    if cfg.batches < 2 || cfg.samples < cfg.batches {
        return Err(Error::invalid(
            "samples",
            "need at least two batches of at least one sample",
        ));
    }
    let k = match cfg.strong_convexity {
        Some(k) => k,
        None => p.assumption_constants()?.strong_convexity,
    };
    if !(k.is_finite() && k > 0.0) {
        return Err(Error::invalid("strong_convexity", format!("must be positive, got {k}")));
    }
    let win = window(ell, cfg.h_eff, k, cfg.tol)?;
    let burn = (5.0 / (k * cfg.h_eff)).ceil() as usize;

    let runs: Vec<Result<(LocalVariance, usize)>> = s_grid
        .par_iter()
        .map(|&s| local_variance(p, f, s, ell, win, burn, cfg))
        .collect();
    let mut per_s = Vec::with_capacity(s_grid.len());
    let mut burn_in = 0;
    for r in runs {
        let (lv, b) = r?;
        burn_in = burn_in.max(b);
        per_s.push(lv);
    }
    let g = per_s.len() as f64;
    let sigma2 = per_s.iter().map(|v| v.value).sum::<f64>() / g;
    let stderr = per_s.iter().map(|v| v.stderr * v.stderr).sum::<f64>().sqrt() / g;
    Ok(AsymptoticVarianceResult {
        ell,
        sigma2,
        stderr,
        per_s_values: per_s,
        truncation_r: win.r,
        burn_in,
    })
}

#[derive(Default, Clone, Copy)]
struct Batch {
    fg: f64,
    f: f64,
    f2: f64,
}

fn local_variance<P>(
    p: &P,
    f: &(dyn Fn(f64, &[f64]) -> f64 + Sync),
    s: f64,
    ell: f64,
    win: Window,
    burn: usize,
    cfg: &AsymptoticVarianceConfig,
) -> Result<(LocalVariance, usize)>
where
    P: AnnealingPotential + ?Sized,
{
    let key = NoiseKey::new(cfg.seed, s.to_bits());
    let mut noise = key.increments();
    let (mut y, burn) = match p.sample_pi_t(s, &mut key.initial_rng()) {
        Ok(y) => (y, 0),
        Err(Error::Unavailable(_)) => {
            let mut y = p.minimizer(s).unwrap_or_else(|_| vec![0.0; p.dim()]);
            run_frozen(p, s, 1.0, cfg.h_eff, &mut y, burn, &mut noise, |_, _| {})?;
            (y, burn)
        }
        Err(e) => return Err(e),
    };

    let Window { m, w, r } = win;
    let span = r * m;
    let ring_len = span + m;
    let mut ring = vec![0.0; ring_len];
    let mut class_sum = vec![0.0; m];
    let per_batch = cfg.samples / cfg.batches;
    let used = per_batch * cfg.batches;
    let mut batches = vec![Batch::default(); cfg.batches];

    run_frozen(p, s, 1.0, cfg.h_eff, &mut y, span + used - 1, &mut noise, |i, yi| {
        let fi = f(s, yi);
        let c = i % m;
        let slot = i % ring_len;
        // ring[slot] currently holds f_{i − ring_len} = f_{i − (r+1)m}.
        if i >= ring_len {
            class_sum[c] -= ring[slot];
        }
        ring[slot] = fi;
        class_sum[c] += fi;
        if i >= span {
            let b = &mut batches[(i - span) / per_batch];
            b.fg += fi * class_sum[c];
            b.f += fi;
            b.f2 += fi * fi;
        }
    })?;

    let nb = per_batch as f64;
    let sigma_of = |fg: f64, f1: f64, f2: f64, n: f64| {
        let mean = f1 / n;
        2.0 * w * fg / n - ell * (f2 / n - mean * mean)
    };
    let tot = batches.iter().fold(Batch::default(), |a, b| Batch {
        fg: a.fg + b.fg,
        f: a.f + b.f,
        f2: a.f2 + b.f2,
    });
    let value = sigma_of(tot.fg, tot.f, tot.f2, used as f64);
    let vals: Vec<f64> = batches.iter().map(|b| sigma_of(b.fg, b.f, b.f2, nb)).collect();
    let means: Vec<f64> = batches.iter().map(|b| b.f / nb).collect();
    let se = |xs: &[f64]| (super::mean_var(xs).1 / xs.len() as f64).sqrt();
    let stderr = se(&vals);
    let mean_f = tot.f / used as f64;
    let se_f = se(&means);
    if !(value.is_finite() && stderr.is_finite()) {
        return Err(Error::NonFinite("asymptotic_variance"));
    }
    if mean_f.abs() > 5.0 * se_f {
        return Err(Error::NotCentered {
            s,
            mean: mean_f,
            stderr: se_f,
        });
    }
    Ok((
        LocalVariance {
            s,
            value,
            stderr,
            mean_f,
        },
        burn,
    ))
}
