use std::path::PathBuf;

use super::config::{Config, EstimatorSection, FamilyConfig};
use super::output::{rows_to_csv, to_csv, write_atomic, CsvRow, ReportRow, CSV_HEADER, REPORT_HEADER};
use crate::error::Result;
use crate::estimators::{jarzynski_log_ratio, naive_is, product_is_relvar, ti_log_ratio, EstimateReport, Reference};
use crate::potential::AnnealingPotential;
use crate::rng::mix_seed;
use crate::sde::{simulate_replicates, RunConfig};

/// Salt words separating auxiliary streams from replicate streams.
const BOOTSTRAP_SALT: u64 = 0x626f_6f74;
const NAIVE_IS_SALT: u64 = 0x6e69_7321;

/// One point of a parameter grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub family: String,
    pub d: usize,
    pub epsilon: f64,
    pub h: f64,
    pub ell: f64,
}

impl Cell {
    /// Identity used for resuming sweeps; floats are written in a form that
    /// survives a CSV round trip.
    pub fn key(&self) -> String {
        format!(
            "{}|{}|{:e}|{:e}|{:e}",
            self.family, self.d, self.epsilon, self.h, self.ell
        )
    }

    pub fn hash(&self) -> String {
        crate::diagnostics::params_hash(&self.key())
    }

    /// Simulation seed of the cell; replicate `r` then uses `mix(seed, r)`.
    pub fn seed(&self, base: u64) -> u64 {
        mix_seed(&[base, self.d as u64, self.epsilon.to_bits(), self.h.to_bits()])
    }
}

/// Empirical `var[W]/mean[W]²` of naive importance sampling, with the
/// `c^d − 1` value when the family has one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelvarSummary {
    pub estimate: f64,
    pub reference: Option<f64>,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellOutcome {
    pub cell: Cell,
    pub rows: Vec<CsvRow>,
    pub reports: Vec<EstimateReport>,
    pub relvar: Option<RelvarSummary>,
}

impl CellOutcome {
    pub fn report_rows(&self) -> Vec<ReportRow> {
        let c = &self.cell;
        let mut out: Vec<ReportRow> = self
            .reports
            .iter()
            .map(|r| ReportRow::from_report(r, c.d, c.epsilon, c.h))
            .collect();
        if let Some(rv) = self.relvar {
            out.push(ReportRow {
                estimator: "naive_is_relvar".into(),
                d: c.d,
                epsilon: c.epsilon,
                h: c.h,
                replicates: rv.samples,
                estimate: rv.estimate,
                variance: f64::NAN,
                stderr: f64::NAN,
                reference: rv.reference,
                abs_error: rv.reference.map(|r| (rv.estimate - r).abs()),
            });
        }
        out
    }

    pub(crate) fn rows_csv(&self) -> Result<Vec<u8>> {
        rows_to_csv(&self.rows)
    }
}

/// `0.0 − x` maps `−0.0` to `0.0` so identity paths print as `0`.
fn neg(x: f64) -> f64 {
    0.0 - x
}

/// Run every enabled estimator on one cell.
///
/// TI rows hold `−h·Σ∂_tU` per replicate and Jarzynski rows the weight
/// `exp(−h·Σ∂_tU)`. Naive importance sampling contributes two cell-level
/// rows (replicate 0): the ratio estimate and the relative variance.
pub fn run_cell(
    p: &dyn AnnealingPotential,
    family: &FamilyConfig,
    cell: &Cell,
    base_seed: u64,
    replicates: usize,
    estimators: &EstimatorSection,
) -> Result<CellOutcome> {
    let seed = cell.seed(base_seed);
    let cfg = RunConfig::new(cell.epsilon, cell.h, seed)?;
    let mut rows = Vec::new();
    let mut reports = Vec::new();
    let row = |replicate: u64, estimator: &str, value: f64, seed: u64| CsvRow {
        family: cell.family.clone(),
        d: cell.d,
        epsilon: cell.epsilon,
        h: cell.h,
        ell: cell.ell,
        replicate,
        estimator: estimator.into(),
        value,
        seed,
    };

    if estimators.ti || estimators.jarzynski {
        let paths = simulate_replicates(p, &cfg, replicates, None)?;
        let reference = Reference::log_ratio_of(p);
        let rep_seed = |r: usize| mix_seed(&[seed, r as u64]);
        if estimators.ti {
            reports.push(ti_log_ratio(&paths, reference)?);
            for (r, path) in paths.iter().enumerate() {
                rows.push(row(r as u64, "ti", neg(path.sum_dt_u), rep_seed(r)));
            }
        }
        if estimators.jarzynski {
            reports.push(jarzynski_log_ratio(
                &paths,
                reference,
                mix_seed(&[seed, BOOTSTRAP_SALT]),
            )?);
            for (r, path) in paths.iter().enumerate() {
                rows.push(row(r as u64, "jarzynski", (-path.sum_dt_u).exp(), rep_seed(r)));
            }
        }
    }

    let mut relvar = None;
    if estimators.naive_is {
        let is_seed = mix_seed(&[seed, NAIVE_IS_SALT]);
        let res = naive_is(p, estimators.naive_is_samples, None, is_seed)?;
        rows.push(row(0, "naive_is", res.ratio.estimate, is_seed));
        rows.push(row(0, "naive_is_relvar", res.relative_variance, is_seed));
        let reference = match family.gaussian_variances() {
            Some((v0, v1)) => Some(product_is_relvar(
                |x| x * x / (2.0 * v0),
                |x| x * x / (2.0 * v1),
                cell.d,
            )?),
            None => None,
        };
        relvar = Some(RelvarSummary {
            estimate: res.relative_variance,
            reference,
            samples: estimators.naive_is_samples,
        });
        reports.push(res.ratio);
    }
    Ok(CellOutcome {
        cell: cell.clone(),
        rows,
        reports,
        relvar,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateOutcome {
    pub output: PathBuf,
    pub cell: CellOutcome,
}

impl EstimateOutcome {
    /// Summary table as CSV text.
    pub fn summary_csv(&self) -> Result<String> {
        let bytes = to_csv(&self.cell.report_rows(), REPORT_HEADER)?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

/// Simulate the configured cell, write per-replicate rows to
/// `output.path` (and the summary to `output.report` when set).
pub fn run_estimate(config: &Config) -> Result<EstimateOutcome> {
    config.validate()?;
    let p = config.family.build(None)?;
    let (epsilon, h) = (config.run.epsilon, config.step());
    let cell = Cell {
        family: config.family.name().into(),
        d: p.dim(),
        epsilon,
        h,
        ell: h / epsilon,
    };
    let outcome = super::with_workers(config.run.workers, || {
        run_cell(
            p.as_ref(),
            &config.family,
            &cell,
            config.run.seed,
            config.run.replicates,
            &config.estimators,
        )
    })??;
    let mut bytes = to_csv::<CsvRow>(&[], CSV_HEADER)?;
    bytes.extend(outcome.rows_csv()?);
    write_atomic(&config.output.path, &bytes)?;
    let result = EstimateOutcome {
        output: config.output.path.clone(),
        cell: outcome,
    };
    if let Some(report) = &config.output.report {
        write_atomic(report, result.summary_csv()?.as_bytes())?;
    }
    Ok(result)
}
