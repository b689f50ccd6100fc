//! Estimators built from simulated annealing paths.
//!
//! Every estimator returns an [`EstimateReport`] whose `stderr` equals
//! `√(variance / replicates)`. For the nonlinear estimators (Jarzynski,
//! self-normalized expectations) the standard error comes from a bootstrap
//! and `variance` is back-filled so that the identity still holds.

mod asymptotic;
mod importance;

pub use asymptotic::{
    asymptotic_variance, spectral_phi, AsymptoticVarianceConfig, AsymptoticVarianceResult, LocalVariance,
};
pub(crate) use importance::importance_constant;
pub use importance::{naive_is, product_is_relvar, NaiveIsResult, Observable};

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::potential::{log_ratio, AnnealingPotential};
use crate::rng::mix_seed;
use crate::sde::SkeletonPath;

pub const BOOTSTRAP_RESAMPLES: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ReferenceSource {
    Analytic,
    Quadrature,
    None,
}

impl fmt::Display for ReferenceSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ReferenceSource::Analytic => "analytic",
            ReferenceSource::Quadrature => "quadrature",
            ReferenceSource::None => "none",
        })
    }
}

/// A reference value to compare an estimate against.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reference {
    pub value: Option<f64>,
    pub source: ReferenceSource,
}

impl Reference {
    pub fn none() -> Self {
        Self {
            value: None,
            source: ReferenceSource::None,
        }
    }

    pub fn analytic(value: f64) -> Self {
        Self {
            value: Some(value),
            source: ReferenceSource::Analytic,
        }
    }

    pub fn quadrature(value: f64) -> Self {
        Self {
            value: Some(value),
            source: ReferenceSource::Quadrature,
        }
    }

    /// `log Z_1/Z_0` if the path can supply it.
    pub fn log_ratio_of<P: AnnealingPotential + ?Sized>(p: &P) -> Self {
        match log_ratio(p) {
            Ok(v) if p.log_z_source() != ReferenceSource::None => Self {
                value: Some(v),
                source: p.log_z_source(),
            },
            _ => Self::none(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateReport {
    pub estimator: String,
    pub estimate: f64,
    /// Per-replicate values the estimate was built from.
    pub values: Vec<f64>,
    pub variance: f64,
    pub stderr: f64,
    pub reference: Option<f64>,
    pub reference_source: ReferenceSource,
}

impl EstimateReport {
    pub fn replicates(&self) -> usize {
        self.values.len()
    }

    pub fn abs_error(&self) -> Option<f64> {
        self.reference.map(|r| (self.estimate - r).abs())
    }

    /// `|estimate − reference| ≤ k·stderr`; `None` without a reference.
    pub fn within(&self, k: f64) -> Option<bool> {
        self.abs_error().map(|e| e <= k * self.stderr)
    }

    fn with_reference(mut self, reference: Reference) -> Self {
        self.reference = reference.value;
        self.reference_source = reference.source;
        self
    }
}

/// Mean and unbiased sample variance (0 for a single value).
pub fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = xs.iter().map(|x| (x - mean) * (x - mean)).sum();
    (mean, ss / (n - 1.0))
}

/// `log((1/n)·Σ e^{a_i})`, stable for large `|a_i|`.
pub fn log_mean_exp(a: &[f64]) -> Result<f64> {
    if a.is_empty() {
        return Err(Error::EmptyInput("log_mean_exp"));
    }
    if a.iter().any(|v| v.is_nan() || *v == f64::INFINITY) {
        return Err(Error::NonFinite("log_mean_exp"));
    }
    let max = a.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(Error::DegenerateWeights);
    }
    let s: f64 = a.iter().map(|v| (v - max).exp()).sum();
    Ok(max + (s / a.len() as f64).ln())
}

fn check_paths(paths: &[SkeletonPath], what: &'static str) -> Result<Vec<f64>> {
    if paths.is_empty() {
        return Err(Error::EmptyInput(what));
    }
    let v: Vec<f64> = paths.iter().map(|p| -p.sum_dt_u).collect();
    if v.iter().any(|x| x.is_nan()) {
        return Err(Error::NonFinite(what));
    }
    Ok(v)
}

/// Thermodynamic integration: the mean of `−h·Σ ∂_tU_{kh}(X_{kh})`.
pub fn ti_log_ratio(paths: &[SkeletonPath], reference: Reference) -> Result<EstimateReport> {
    let values = check_paths(paths, "ti_log_ratio")?;
    let (estimate, variance) = mean_var(&values);
    Ok(EstimateReport {
        estimator: "ti".into(),
        estimate,
        stderr: (variance / values.len() as f64).sqrt(),
        variance,
        values,
        reference: None,
        reference_source: ReferenceSource::None,
    }
    .with_reference(reference))
}

/// Bootstrap standard deviation of `stat` over `BOOTSTRAP_RESAMPLES`
/// resamples of the indices `0..n`.
fn bootstrap_se(n: usize, seed: u64, mut stat: impl FnMut(&[usize]) -> Result<f64>) -> Result<f64> {
    if n < 2 {
        return Ok(0.0);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(&[seed, n as u64]));
    let mut idx = vec![0usize; n];
    let mut stats = Vec::with_capacity(BOOTSTRAP_RESAMPLES);
    for _ in 0..BOOTSTRAP_RESAMPLES {
        idx.iter_mut().for_each(|i| *i = rng.random_range(0..n));
        let s = stat(&idx)?;
        if s.is_finite() {
            stats.push(s);
        }
    }
    if stats.len() < 2 {
        return Err(Error::DegenerateWeights);
    }
    Ok(mean_var(&stats).1.sqrt())
}

/// Jarzynski: `log mean exp(−h·Σ ∂_tU)`, with a bootstrap standard error.
pub fn jarzynski_log_ratio(
    paths: &[SkeletonPath],
    reference: Reference,
    bootstrap_seed: u64,
) -> Result<EstimateReport> {
    let values = check_paths(paths, "jarzynski_log_ratio")?;
    let estimate = log_mean_exp(&values)?;
    let mut buf = vec![0.0; values.len()];
    let stderr = bootstrap_se(values.len(), bootstrap_seed, |idx| {
        buf.iter_mut().zip(idx).for_each(|(b, &i)| *b = values[i]);
        log_mean_exp(&buf)
    })?;
    Ok(EstimateReport {
        estimator: "jarzynski".into(),
        estimate,
        variance: values.len() as f64 * stderr * stderr,
        stderr,
        values,
        reference: None,
        reference_source: ReferenceSource::None,
    }
    .with_reference(reference))
}

/// Normalized weights `e^{a_i} / Σ e^{a_j}`.
pub fn normalized_weights(log_w: &[f64]) -> Result<Vec<f64>> {
    let max = log_mean_exp(log_w).map(|_| log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max))?;
    let w: Vec<f64> = log_w.iter().map(|a| (a - max).exp()).collect();
    let total: f64 = w.iter().sum();
    Ok(w.into_iter().map(|v| v / total).collect())
}

fn self_normalized(log_w: &[f64], phi: &[f64], idx: impl Iterator<Item = usize> + Clone) -> f64 {
    let max = idx.clone().map(|i| log_w[i]).fold(f64::NEG_INFINITY, f64::max);
    let (mut num, mut den) = (0.0, 0.0);
    for i in idx {
        let w = (log_w[i] - max).exp();
        num += w * phi[i];
        den += w;
    }
    num / den
}

/// Self-normalized estimate of `π_1(φ)` from path endpoints with weights
/// `exp(−h·Σ ∂_tU)`. `values` holds `φ(endpoint)` per replicate.
pub fn weighted_expectation(
    paths: &[SkeletonPath],
    phi: impl Fn(&[f64]) -> f64,
    reference: Reference,
    bootstrap_seed: u64,
) -> Result<EstimateReport> {
    let log_w = check_paths(paths, "weighted_expectation")?;
    if log_w.iter().all(|&a| a == f64::NEG_INFINITY) {
        return Err(Error::DegenerateWeights);
    }
    let values: Vec<f64> = paths.iter().map(|p| phi(&p.endpoint)).collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("weighted_expectation"));
    }
    let estimate = self_normalized(&log_w, &values, 0..values.len());
    let stderr = bootstrap_se(values.len(), bootstrap_seed, |idx| {
        Ok(self_normalized(&log_w, &values, idx.iter().copied()))
    })?;
    Ok(EstimateReport {
        estimator: "weighted".into(),
        estimate,
        variance: values.len() as f64 * stderr * stderr,
        stderr,
        values,
        reference: None,
        reference_source: ReferenceSource::None,
    }
    .with_reference(reference))
}
