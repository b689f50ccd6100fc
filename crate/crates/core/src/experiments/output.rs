use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::diagnostics::BoundReport;
use crate::error::Result;
use crate::estimators::EstimateReport;

/// Header of the per-replicate results file.
pub const CSV_HEADER: &str = "family,d,epsilon,h,ell,replicate,estimator,value,seed";
pub const REPORT_HEADER: &str = "estimator,d,epsilon,h,replicates,estimate,variance,stderr,reference,abs_error";
pub const DIAGNOSTIC_HEADER: &str = "check,params_hash,bound,observed,slack,pass";

/// One replicate of one estimator in one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub family: String,
    pub d: usize,
    pub epsilon: f64,
    pub h: f64,
    pub ell: f64,
    pub replicate: u64,
    pub estimator: String,
    pub value: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub estimator: String,
    pub d: usize,
    pub epsilon: f64,
    pub h: f64,
    pub replicates: usize,
    pub estimate: f64,
    pub variance: f64,
    pub stderr: f64,
    pub reference: Option<f64>,
    pub abs_error: Option<f64>,
}

impl ReportRow {
    pub fn from_report(r: &EstimateReport, d: usize, epsilon: f64, h: f64) -> Self {
        Self {
            estimator: r.estimator.clone(),
            d,
            epsilon,
            h,
            replicates: r.replicates(),
            estimate: r.estimate,
            variance: r.variance,
            stderr: r.stderr,
            reference: r.reference,
            abs_error: r.abs_error(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticRow {
    pub check: String,
    pub params_hash: String,
    pub bound: f64,
    pub observed: f64,
    pub slack: f64,
    pub pass: bool,
}

impl DiagnosticRow {
    pub fn from_report(r: &BoundReport, params: &str) -> Self {
        Self {
            check: r.name.clone(),
            params_hash: crate::diagnostics::params_hash(params),
            bound: r.bound,
            observed: r.observed,
            slack: r.slack,
            pass: r.satisfied,
        }
    }
}

/// Serialize rows (with header) to CSV text.
pub fn to_csv<T: Serialize>(rows: &[T], header: &str) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(header.split(','))?;
    for r in rows {
        w.serialize(r)?;
    }
    Ok(w.into_inner().map_err(|e| e.into_error())?)
}

/// Serialize rows without a header.
pub(crate) fn rows_to_csv<T: Serialize>(rows: &[T]) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    Ok(w.into_inner().map_err(|e| e.into_error())?)
}

pub fn read_rows(path: impl AsRef<Path>) -> Result<Vec<CsvRow>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}

fn temp_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".tmp");
    path.with_file_name(name)
}

/// Replace `path` with `bytes` via a sibling temp file and rename, so readers
/// never see a partial file.
pub fn write_atomic(path: impl AsRef<Path>, bytes: &[u8]) -> Result<()> {
    let path = path.as_ref();
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let tmp = temp_path(path);
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}
