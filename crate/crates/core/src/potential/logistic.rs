use std::f64::consts::PI;
use std::path::Path;
use std::sync::OnceLock;

use rand::RngCore;

use super::gaussian::norm2;
use super::{AnnealingPotential, AssumptionConstants};
use crate::error::{Error, Result};
use crate::estimators::ReferenceSource;
use crate::rng::fill_standard_normal;

/// `log(1 + e^z)` without overflow.
#[inline]
pub fn softplus(z: f64) -> f64 {
    if z > 30.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// `1 / (1 + e^{−z})`.
#[inline]
pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Bayesian logistic regression data: `m` binary responses, an `m × d`
/// covariate matrix (row-major) and the prior variance `σ̃²` of the
/// isotropic Gaussian prior.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticModel {
    d: usize,
    covariates: Vec<f64>,
    responses: Vec<f64>,
    prior_var: f64,
}

impl LogisticModel {
    /// `covariates` holds one row per observation.
    ///
    /// An empty data set (`m = 0`) is accepted: the path is then constant and
    /// `π_1` is the prior.
    pub fn new(d: usize, covariates: Vec<Vec<f64>>, responses: Vec<f64>, prior_var: f64) -> Result<Self> {
        if d == 0 {
            return Err(Error::invalid("d", "dimension must be positive"));
        }
        if covariates.len() != responses.len() {
            return Err(Error::invalid(
                "responses",
                format!("{} responses for {} covariate rows", responses.len(), covariates.len()),
            ));
        }
        if !(prior_var.is_finite() && prior_var > 0.0) {
            return Err(Error::invalid(
                "prior_var",
                format!("must be finite and positive, got {prior_var}"),
            ));
        }
        let mut flat = Vec::with_capacity(d * covariates.len());
        for (i, row) in covariates.iter().enumerate() {
            if row.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: row.len(),
                });
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::Data(format!("row {i} has non-finite covariates")));
            }
            flat.extend_from_slice(row);
        }
        if let Some(i) = responses.iter().position(|&y| y != 0.0 && y != 1.0) {
            return Err(Error::Data(format!(
                "response {i} is {}, expected 0 or 1",
                responses[i]
            )));
        }
        Ok(Self {
            d,
            covariates: flat,
            responses,
            prior_var,
        })
    }

    /// Load `response,cov_1,...,cov_d` rows (with a header line).
    pub fn from_csv(path: impl AsRef<Path>, prior_var: f64) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_path(path.as_ref())?;
        let width = reader.headers()?.len();
        if width < 2 {
            return Err(Error::Data(
                "expected a response column and at least one covariate".into(),
            ));
        }
        let mut rows = Vec::new();
        let mut ys = Vec::new();
        for (i, rec) in reader.records().enumerate() {
            let rec = rec?;
            let mut vals = rec.iter().map(|s| {
                s.parse::<f64>()
                    .map_err(|e| Error::Data(format!("line {}: cannot parse `{s}`: {e}", i + 2)))
            });
            ys.push(vals.next().unwrap_or(Err(Error::Data("empty row".into())))?);
            rows.push(vals.collect::<Result<Vec<f64>>>()?);
        }
        Self::new(width - 1, rows, ys, prior_var)
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn observations(&self) -> usize {
        self.responses.len()
    }

    pub fn prior_var(&self) -> f64 {
        self.prior_var
    }

    pub fn responses(&self) -> &[f64] {
        &self.responses
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.covariates[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.covariates.chunks_exact(self.d)
    }

    /// `Cᵀy`.
    pub fn cty(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.d];
        for (row, &y) in self.rows().zip(&self.responses) {
            if y != 0.0 {
                for (o, c) in out.iter_mut().zip(row) {
                    *o += y * c;
                }
            }
        }
        out
    }
}

/// `U_t(x) = −t·yᵀCx + t·Σ log(1 + e^{⟨x, c_i⟩}) + ‖x‖²/(2σ̃²)`: the prior at
/// `t = 0`, the posterior at `t = 1`.
#[derive(Debug, Clone)]
pub struct LogisticPath {
    model: LogisticModel,
    cty: Vec<f64>,
    solve_minimizer: bool,
    lambda_max: OnceLock<f64>,
}

impl LogisticPath {
    pub fn new(model: LogisticModel) -> Self {
        let cty = model.cty();
        Self {
            model,
            cty,
            solve_minimizer: false,
            lambda_max: OnceLock::new(),
        }
    }

    /// Expose `x_t*` for every `t` by solving `∇U_t(x) = 0` numerically.
    /// Without this, the minimizer is only available at `t = 0`.
    pub fn with_numerical_minimizer(mut self) -> Self {
        self.solve_minimizer = true;
        self
    }

    pub fn model(&self) -> &LogisticModel {
        &self.model
    }

    /// `Σ log(1 + e^{⟨x,c_i⟩}) − yᵀCx`, the negative log-likelihood.
    pub fn neg_log_likelihood(&self, x: &[f64]) -> f64 {
        let lin: f64 = self.cty.iter().zip(x).map(|(a, b)| a * b).sum();
        let sp: f64 = self.model.rows().map(|c| softplus(dot(c, x))).sum();
        sp - lin
    }

    /// Largest eigenvalue of `CᵀC`, computed once.
    pub fn lambda_max(&self) -> Result<f64> {
        if let Some(&v) = self.lambda_max.get() {
            return Ok(v);
        }
        let v = super::power_iteration_lambda_max(&self.model)?;
        Ok(*self.lambda_max.get_or_init(|| v))
    }

    /// `∇²U_t(x) = I/σ̃² + t·Σ ϱ_i(1 − ϱ_i)·c_i c_iᵀ`, row-major `d × d`.
    pub fn hessian(&self, t: f64, x: &[f64]) -> Vec<f64> {
        let d = self.model.d;
        let mut out = vec![0.0; d * d];
        for j in 0..d {
            out[j * d + j] = 1.0 / self.model.prior_var;
        }
        if t != 0.0 {
            for c in self.model.rows() {
                let s = sigmoid(dot(c, x));
                let w = t * s * (1.0 - s);
                for i in 0..d {
                    for j in 0..d {
                        out[i * d + j] += w * c[i] * c[j];
                    }
                }
            }
        }
        out
    }

    /// Gradient descent with step `1/L`; `U_t` is `K`-strongly convex with
    /// `L`-Lipschitz gradient, so this converges geometrically.
    pub fn solve_minimizer(&self, t: f64) -> Result<Vec<f64>> {
        let d = self.model.d;
        let mut x = vec![0.0; d];
        if t == 0.0 || self.model.observations() == 0 {
            return Ok(x);
        }
        let m = self.model.observations() as f64;
        let lambda = self.lambda_max()?;
        let step = 1.0 / (t * 0.25 * m * lambda + 1.0 / self.model.prior_var);
        let mut g = vec![0.0; d];
        for _ in 0..200_000 {
            self.grad_u(t, &x, &mut g);
            let gn = norm2(&g).sqrt();
            if gn <= 1e-13 * (1.0 + norm2(&x).sqrt()) {
                return Ok(x);
            }
            for (xi, gi) in x.iter_mut().zip(&g) {
                *xi -= step * gi;
            }
        }
        Err(Error::invalid(
            "minimizer",
            format!("gradient descent did not converge at t = {t}"),
        ))
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| u * v).sum()
}

impl AnnealingPotential for LogisticPath {
    fn family(&self) -> &'static str {
        "logistic"
    }

    fn dim(&self) -> usize {
        self.model.d
    }

    fn u(&self, t: f64, x: &[f64]) -> f64 {
        t * self.neg_log_likelihood(x) + norm2(x) / (2.0 * self.model.prior_var)
    }

    fn grad_u(&self, t: f64, x: &[f64], out: &mut [f64]) {
        let inv = 1.0 / self.model.prior_var;
        for ((o, &xi), &b) in out.iter_mut().zip(x).zip(&self.cty) {
            *o = xi * inv - t * b;
        }
        if t != 0.0 {
            for c in self.model.rows() {
                let w = t * sigmoid(dot(c, x));
                for (o, &cj) in out.iter_mut().zip(c) {
                    *o += w * cj;
                }
            }
        }
    }

    fn dt_u(&self, _t: f64, x: &[f64]) -> f64 {
        self.neg_log_likelihood(x)
    }

    /// Only the prior normalizer is analytic.
    fn log_z(&self, t: f64) -> Result<f64> {
        if t == 0.0 || self.model.observations() == 0 {
            Ok(0.5 * self.model.d as f64 * (2.0 * PI * self.model.prior_var).ln())
        } else {
            Err(Error::Unavailable("log_z (logistic path, t > 0)"))
        }
    }

    fn log_z_source(&self) -> ReferenceSource {
        if self.model.observations() == 0 {
            ReferenceSource::Analytic
        } else {
            ReferenceSource::None
        }
    }

    fn minimizer(&self, t: f64) -> Result<Vec<f64>> {
        if t == 0.0 || self.model.observations() == 0 || self.solve_minimizer {
            self.solve_minimizer(t)
        } else {
            Err(Error::Unavailable("minimizer (logistic path, t > 0)"))
        }
    }

    fn sample_pi0(&self, rng: &mut dyn RngCore) -> Result<Vec<f64>> {
        let mut x = vec![0.0; self.model.d];
        fill_standard_normal(rng, &mut x);
        let sd = self.model.prior_var.sqrt();
        x.iter_mut().for_each(|v| *v *= sd);
        Ok(x)
    }

    fn assumption_constants(&self) -> Result<AssumptionConstants> {
        super::constants::logistic_constants(&self.model)
    }
}
