//! Config-driven runs: single estimates, resumable parameter sweeps, the
//! logistic-regression marginal-likelihood pipeline and the diagnostics
//! suite. Every run writes CSV; `(config, seed)` determines the bytes.
//!
//! Exit-code contract for front ends: [`EXIT_OK`], [`EXIT_CONFIG`],
//! [`EXIT_DIVERGENCE`], [`EXIT_DIAGNOSTIC`].

mod config;
mod diagnose;
mod estimate;
mod logistic;
mod output;
mod sweep;

pub use config::{
    Config, DiagnosticsSection, EstimatorSection, FamilyConfig, OutputSection, RunSection, ScalingMode, SweepSection,
    SyntheticConfig,
};
pub use diagnose::{run_diagnostics, DiagnosticsOutcome};
pub use estimate::{run_cell, run_estimate, Cell, CellOutcome, EstimateOutcome, RelvarSummary};
pub use logistic::{
    logistic_log_z1_quadrature, run_logistic_pipeline, synthetic_logistic_data, write_logistic_csv, LogisticReport,
};
pub use output::{
    read_rows, to_csv, write_atomic, CsvRow, DiagnosticRow, ReportRow, CSV_HEADER, DIAGNOSTIC_HEADER, REPORT_HEADER,
};
pub use sweep::{run_sweep, Scaling, SweepOutcome, SweepSpec};

use crate::error::{Error, Result};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_DIVERGENCE: i32 = 2;
pub const EXIT_DIAGNOSTIC: i32 = 3;

/// Exit code for a failed run. Diagnostic failures are not errors; callers
/// map a failed suite to [`EXIT_DIAGNOSTIC`] themselves.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Divergence { .. } | Error::NonFinite(_) => EXIT_DIVERGENCE,
        _ => EXIT_CONFIG,
    }
}

/// Run `f` on a dedicated pool of `workers` threads, or on the global pool.
pub(crate) fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match workers {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Config(format!("cannot start {n} workers: {e}")))?;
            Ok(pool.install(f))
        }
    }
}
