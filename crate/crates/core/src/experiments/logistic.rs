use std::cell::RefCell;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::Config;
use super::diagnose::{coupled_contraction, minimizer_grid_speed};
use super::estimate::Cell;
use super::output::{to_csv, write_atomic, CsvRow, ReportRow, CSV_HEADER, REPORT_HEADER};
use crate::diagnostics::{discrete_drift_constants, drift_check, BoundReport};
use crate::error::{Error, Result};
use crate::estimators::{jarzynski_log_ratio, ti_log_ratio, EstimateReport, Reference};
use crate::potential::{AnnealingPotential, AssumptionConstants, LogisticModel, LogisticPath};
use crate::quad::integrate_line;
use crate::rng::{fill_standard_normal, mix_seed};
use crate::sde::{simulate_replicates, RunConfig};

const DRIFT_SALT: u64 = 0x6472_6966;
const BOOTSTRAP_SALT: u64 = 0x626f_6f74;
/// Drift trial points used by the pipeline (the full suite uses more).
const PIPELINE_TRIAL_POINTS: usize = 100;

/// Synthetic regression data: covariates `N(0, 1)`, coefficients
/// `β ~ N(0, I)`, responses `y_i ~ Bernoulli(sigmoid(⟨c_i, β⟩))`.
pub fn synthetic_logistic_data(d: usize, m: usize, prior_var: f64, seed: u64) -> Result<LogisticModel> {
    if d == 0 {
        return Err(Error::Config("synthetic data needs d > 0".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(&[seed, d as u64, m as u64]));
    let mut beta = vec![0.0; d];
    fill_standard_normal(&mut rng, &mut beta);
    let mut rows = Vec::with_capacity(m);
    let mut ys = Vec::with_capacity(m);
    for _ in 0..m {
        let mut c = vec![0.0; d];
        fill_standard_normal(&mut rng, &mut c);
        let z: f64 = c.iter().zip(&beta).map(|(a, b)| a * b).sum();
        let u: f64 = rng.random();
        ys.push(if u < crate::potential::sigmoid(z) { 1.0 } else { 0.0 });
        rows.push(c);
    }
    LogisticModel::new(d, rows, ys, prior_var)
}

/// Write data in the loader's format: header, response first.
pub fn write_logistic_csv(model: &LogisticModel, path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["y".to_string()];
    header.extend((1..=model.dim()).map(|j| format!("x{j}")));
    w.write_record(&header)?;
    for (y, row) in model.responses().iter().zip(model.rows()) {
        let rec: Vec<String> = std::iter::once(*y)
            .chain(row.iter().copied())
            .map(|v| v.to_string())
            .collect();
        w.write_record(&rec)?;
    }
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    write_atomic(path, &bytes)
}

/// `log Z_1 = log ∫ e^{−U_1}` by nested adaptive quadrature around the
/// posterior mode, for `d ≤ 2`.
pub fn logistic_log_z1_quadrature(path: &LogisticPath) -> Result<f64> {
    let d = path.dim();
    if d > 2 {
        return Err(Error::Unavailable("quadrature reference for d > 2"));
    }
    let mode = path.solve_minimizer(1.0)?;
    let u_mode = path.u(1.0, &mode);
    let hess = path.hessian(1.0, &mode);
    // Laplace approximation of the shifted integral sets the tolerance.
    if d == 1 {
        let sd = 1.0 / hess[0].sqrt();
        let laplace = (2.0 * std::f64::consts::PI).sqrt() * sd;
        let f = |x: f64| (-(path.u(1.0, &[x]) - u_mode)).exp();
        let z = integrate_line(f, mode[0], sd, 1e-11 * laplace)?.value;
        return Ok(z.ln() - u_mode);
    }
    let (h11, h12, h22) = (hess[0], hess[1], hess[3]);
    let det = h11 * h22 - h12 * h12;
    let outer_sd = (h22 / det).sqrt();
    let inner_sd = 1.0 / h22.sqrt();
    let laplace = 2.0 * std::f64::consts::PI / det.sqrt();
    let inner_laplace = (2.0 * std::f64::consts::PI).sqrt() * inner_sd;
    let inner_err: RefCell<Option<Error>> = RefCell::new(None);
    let outer = |x1: f64| {
        // Gaussian approximation of the conditional mode of x2 given x1.
        let center = mode[1] - h12 / h22 * (x1 - mode[0]);
        let g = |x2: f64| (-(path.u(1.0, &[x1, x2]) - u_mode)).exp();
        integrate_line(g, center, inner_sd, 1e-12 * inner_laplace).map_or_else(
            |e| {
                inner_err.borrow_mut().get_or_insert(e);
                f64::NAN
            },
            |i| i.value,
        )
    };
    let z = integrate_line(outer, mode[0], outer_sd, 1e-10 * laplace);
    if let Some(e) = inner_err.into_inner() {
        return Err(e);
    }
    Ok(z?.value.ln() - u_mode)
}

/// Result of the logistic-regression marginal-likelihood pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticReport {
    pub d: usize,
    pub m: usize,
    pub constants: AssumptionConstants,
    pub epsilon: f64,
    pub h: f64,
    pub replicates: usize,
    pub log_z0: f64,
    /// Estimates of `log Z_1`.
    pub ti: EstimateReport,
    pub jarzynski: EstimateReport,
    pub contraction: BoundReport,
    /// `None` when `h/ε ≥ 2K/L²` (the drift constants do not exist).
    pub drift: Option<BoundReport>,
}

impl LogisticReport {
    pub fn report_rows(&self) -> Vec<ReportRow> {
        [&self.ti, &self.jarzynski]
            .iter()
            .map(|r| ReportRow::from_report(r, self.d, self.epsilon, self.h))
            .collect()
    }

    pub fn summary_csv(&self) -> Result<String> {
        Ok(String::from_utf8(to_csv(&self.report_rows(), REPORT_HEADER)?).expect("csv output is utf-8"))
    }
}

fn shift(mut r: EstimateReport, by: f64, name: &str, reference: Reference) -> EstimateReport {
    r.estimator = name.into();
    r.estimate += by;
    r.values.iter_mut().for_each(|v| *v += by);
    r.reference = reference.value;
    r.reference_source = reference.source;
    r
}

/// Constants, annealing estimates of `log Z_1` (TI and Jarzynski, shifted
/// by the analytic `log Z_0`), a quadrature reference when `d ≤ 2`, and
/// contraction and drift diagnostics with the computed constants.
///
/// Per-replicate rows are written to `output.path`.
pub fn run_logistic_pipeline(model: LogisticModel, config: &Config) -> Result<LogisticReport> {
    config.validate()?;
    let (d, m) = (model.dim(), model.observations());
    let path = LogisticPath::new(model).with_numerical_minimizer();
    let constants = path.assumption_constants()?;
    let (epsilon, h) = (config.run.epsilon, config.step());
    let seed = Cell {
        family: "logistic".into(),
        d,
        epsilon,
        h,
        ell: h / epsilon,
    }
    .seed(config.run.seed);
    let cfg = RunConfig::new(epsilon, h, seed)?;
    let log_z0 = path.log_z(0.0)?;
    let reference = if m == 0 {
        Reference::analytic(log_z0)
    } else if d <= 2 {
        Reference::quadrature(logistic_log_z1_quadrature(&path)?)
    } else {
        Reference::none()
    };
    let reps = config.run.replicates;

    let (paths, contraction) = super::with_workers(config.run.workers, || -> Result<_> {
        let paths = simulate_replicates(&path, &cfg, reps, None)?;
        let (c, _) = coupled_contraction(&path, &cfg, config.diagnostics.coupled_pairs, &constants, seed)?;
        Ok((paths, c))
    })??;

    let ti = ti_log_ratio(&paths, Reference::none())?;
    let jz = jarzynski_log_ratio(&paths, Reference::none(), mix_seed(&[seed, BOOTSTRAP_SALT]))?;
    let ti = shift(ti, log_z0, "ti_log_z1", reference);
    let jarzynski = shift(jz, log_z0, "jarzynski_log_z1", reference);

    let drift = if h / epsilon < 2.0 * constants.strong_convexity / constants.lipschitz.powi(2) {
        let speed = minimizer_grid_speed(&path, h)?;
        let consts = discrete_drift_constants(
            epsilon,
            h,
            constants.strong_convexity,
            constants.lipschitz,
            d,
            speed,
            Some(config.diagnostics.delta),
        )?;
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(&[seed, DRIFT_SALT]));
        let points: Vec<Vec<f64>> = (0..PIPELINE_TRIAL_POINTS)
            .map(|_| path.sample_pi0(&mut rng))
            .collect::<Result<_>>()?;
        Some(drift_check(&path, &consts, &points)?)
    } else {
        None
    };

    let mut rows = Vec::with_capacity(2 * reps);
    for (name, rep) in [("ti_log_z1", &ti), ("jarzynski_log_z1", &jarzynski)] {
        for (r, v) in rep.values.iter().enumerate() {
            rows.push(CsvRow {
                family: "logistic".into(),
                d,
                epsilon,
                h,
                ell: h / epsilon,
                replicate: r as u64,
                estimator: name.into(),
                value: *v,
                seed: mix_seed(&[seed, r as u64]),
            });
        }
    }
    write_atomic(&config.output.path, &to_csv(&rows, CSV_HEADER)?)?;
    let report = LogisticReport {
        d,
        m,
        constants,
        epsilon,
        h,
        replicates: reps,
        log_z0,
        ti,
        jarzynski,
        contraction,
        drift,
    };
    if let Some(p) = &config.output.report {
        write_atomic(p, report.summary_csv()?.as_bytes())?;
    }
    Ok(report)
}
