//! Closed-form drift and discretization constants, and empirical checks of
//! the inequalities they enter.
//!
//! Each check returns a [`BoundReport`]: a bound, an observed value and
//! whether `observed ≤ bound·(1 + tolerance)`.

mod checks;
mod constants;

pub use checks::{
    clt_check, contraction_check, drift_check, empirical_variance_bound_check, gaussian_s_moments,
    gaussian_step_factor_check, gaussian_sup_variance, ks_statistic, normal_cdf, thermo_identity_check, variance_bound,
    variance_bound_check, DEFAULT_KS_THRESHOLD_FACTOR,
};
pub use constants::{
    continuous_drift_constants, discrete_drift_constants, frozen_drift_constants, tv_bound, DriftConstants,
    DriftContext, DriftInputs,
};

use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub name: String,
    pub bound: f64,
    pub observed: f64,
    pub satisfied: bool,
    /// `observed / bound` (0 when both vanish).
    pub slack: f64,
    pub tolerance: f64,
    /// Number of individual comparisons that failed.
    pub violations: usize,
    /// Number of individual comparisons made.
    pub checked: usize,
}

impl BoundReport {
    pub fn new(name: impl Into<String>, bound: f64, observed: f64, tolerance: f64) -> Self {
        let satisfied = observed <= bound * (1.0 + tolerance) || observed <= bound;
        let slack = if bound == 0.0 && observed == 0.0 {
            0.0
        } else {
            observed / bound
        };
        Self {
            name: name.into(),
            bound,
            observed,
            satisfied,
            slack,
            tolerance,
            violations: usize::from(!satisfied),
            checked: 1,
        }
    }

    fn with_counts(mut self, violations: usize, checked: usize) -> Self {
        self.violations = violations;
        self.checked = checked;
        self.satisfied = self.satisfied && violations == 0;
        self
    }
}

/// Short stable digest of a parameter description, for CSV rows.
pub fn params_hash(description: &str) -> String {
    let digest = Sha256::digest(description.as_bytes());
    digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn report_semantics() {
        let r = BoundReport::new("x", 1.0, 1.0 + 1e-13, 1e-12);
        assert!(r.satisfied);
        let r = BoundReport::new("x", 1.0, 1.1, 1e-12);
        assert!(!r.satisfied && r.violations == 1);
        let r = BoundReport::new("zero", 0.0, 0.0, 0.0);
        assert!(r.satisfied && r.slack == 0.0);
    }

    #[test]
    fn hash_is_stable() {
        assert_eq!(params_hash("abc"), params_hash("abc"));
        assert_ne!(params_hash("abc"), params_hash("abd"));
        assert_eq!(params_hash("abc").len(), 16);
        // SHA-256("abc") begins ba7816bf8f01cfea.
        assert_eq!(params_hash("abc"), "ba7816bf8f01cfea");
    }
}
