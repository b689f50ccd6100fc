use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("capability `{0}` is not provided by this potential")]
    Unavailable(&'static str),

    #[error("non-finite input to {0}")]
    NonFinite(&'static str),

    #[error("simulation diverged at step {step} (t = {time}); reduce h/epsilon")]
    Divergence { step: usize, time: f64 },

    #[error("quadrature did not converge: achieved error {achieved:e}, requested {requested:e}")]
    QuadratureNotConverged { achieved: f64, requested: f64 },

    #[error("power iteration did not converge after {iterations} iterations (relative change {residual:e})")]
    PowerIterationNotConverged { iterations: usize, residual: f64 },

    #[error("empty input to {0}")]
    EmptyInput(&'static str),

    #[error("all importance weights are zero")]
    DegenerateWeights,

    #[error("observable is not centred at s = {s}: mean {mean:e}, standard error {stderr:e}")]
    NotCentered { s: f64, mean: f64, stderr: f64 },

    #[error("inconsistent quadrature: c = {0} < 1 violates Jensen's inequality")]
    JensenViolation(f64),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

pub(crate) fn ensure_finite(xs: &[f64], context: &'static str) -> Result<()> {
    if xs.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(context))
    }
}
