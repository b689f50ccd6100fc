use std::collections::HashSet;
use std::path::PathBuf;

use super::config::{Config, EstimatorSection, FamilyConfig, ScalingMode};
use super::estimate::{run_cell, Cell, CellOutcome};
use super::output::{read_rows, to_csv, write_atomic, CsvRow, CSV_HEADER};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Scaling {
    /// `h = ell·epsilon`.
    Ell { ell: f64, epsilon: f64 },
    /// `epsilon = coeff·d^(−eps_power)`, `h = epsilon^h_power`.
    Power { coeff: f64, eps_power: f64, h_power: f64 },
}

impl Scaling {
    /// `(epsilon, h, ell)` for dimension `d`.
    pub fn cell_params(&self, d: usize) -> (f64, f64, f64) {
        match *self {
            Scaling::Ell { ell, epsilon } => (epsilon, ell * epsilon, ell),
            Scaling::Power {
                coeff,
                eps_power,
                h_power,
            } => {
                let eps = coeff * (d as f64).powf(-eps_power);
                let h = eps.powf(h_power);
                (eps, h, h / eps)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub family: FamilyConfig,
    pub d_grid: Vec<usize>,
    pub scaling: Scaling,
    pub replicates: usize,
    pub base_seed: u64,
    pub estimators: EstimatorSection,
    pub output: PathBuf,
    pub max_cells: Option<usize>,
    pub workers: Option<usize>,
}

impl SweepSpec {
    pub fn from_config(config: &Config) -> Result<Self> {
        config.validate()?;
        let s = config
            .sweep
            .as_ref()
            .ok_or_else(|| Error::Config("missing [sweep] section".into()))?;
        let scaling = match s.scaling {
            ScalingMode::Ell => Scaling::Ell {
                ell: s.ell.expect("validated"),
                epsilon: s.epsilon.unwrap_or(config.run.epsilon),
            },
            ScalingMode::Power => Scaling::Power {
                coeff: s.eps_coeff.expect("validated"),
                eps_power: s.eps_power.expect("validated"),
                h_power: s.h_power.unwrap_or(config.run.h_power),
            },
        };
        Ok(Self {
            family: config.family.clone(),
            d_grid: s.d_grid.clone(),
            scaling,
            replicates: config.run.replicates,
            base_seed: config.run.seed,
            estimators: config.estimators.clone(),
            output: config.output.path.clone(),
            max_cells: s.max_cells,
            workers: config.run.workers,
        })
    }

    pub fn cells(&self) -> Vec<Cell> {
        self.d_grid
            .iter()
            .map(|&d| {
                let (epsilon, h, ell) = self.scaling.cell_params(d);
                Cell {
                    family: self.family.name().into(),
                    d,
                    epsilon,
                    h,
                    ell,
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutcome {
    /// Cells computed by this invocation, in grid order.
    pub computed: Vec<CellOutcome>,
    pub skipped: usize,
    /// Every grid cell is present in the output file.
    pub complete: bool,
}

fn existing_cells(spec: &SweepSpec) -> Result<(Vec<u8>, HashSet<String>)> {
    if !spec.output.exists() {
        return Ok((to_csv::<CsvRow>(&[], CSV_HEADER)?, HashSet::new()));
    }
    let bytes = std::fs::read(&spec.output)?;
    let header = bytes.split(|&b| b == b'\n').next().unwrap_or_default();
    if header != CSV_HEADER.as_bytes() {
        return Err(Error::Data(format!(
            "{} exists but does not start with the results header",
            spec.output.display()
        )));
    }
    let done = read_rows(&spec.output)?
        .into_iter()
        .map(|r| {
            Cell {
                family: r.family,
                d: r.d,
                epsilon: r.epsilon,
                h: r.h,
                ell: r.ell,
            }
            .hash()
        })
        .collect();
    Ok((bytes, done))
}

/// Run every grid cell not yet present in the output file. After each cell
/// the whole file is rewritten through a temp file and renamed, so an
/// interruption leaves only complete cells behind and a rerun picks up
/// where it stopped.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepOutcome> {
    if spec.d_grid.is_empty() {
        return Err(Error::Config("empty d_grid".into()));
    }
    let (mut buffer, done) = existing_cells(spec)?;
    let mut computed = Vec::new();
    let mut skipped = 0;
    let cells = spec.cells();
    let mut remaining = cells.len();
    for cell in &cells {
        if done.contains(&cell.hash()) {
            skipped += 1;
            remaining -= 1;
            continue;
        }
        if spec.max_cells.is_some_and(|m| computed.len() >= m) {
            break;
        }
        let p = spec.family.build(Some(cell.d))?;
        let outcome = super::with_workers(spec.workers, || {
            run_cell(
                p.as_ref(),
                &spec.family,
                cell,
                spec.base_seed,
                spec.replicates,
                &spec.estimators,
            )
        })??;
        buffer.extend(outcome.rows_csv()?);
        write_atomic(&spec.output, &buffer)?;
        computed.push(outcome);
        remaining -= 1;
    }
    Ok(SweepOutcome {
        computed,
        skipped,
        complete: remaining == 0,
    })
}
