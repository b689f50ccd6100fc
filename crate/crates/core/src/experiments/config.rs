use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potential::{AnnealingPotential, GaussianPath, LogisticModel, LogisticPath, ProductPath, ScalarGaussian};

/// Run configuration, read from TOML.
///
/// ```toml
/// [family]
/// kind = "gaussian"        # gaussian | product_gaussian | logistic
/// d = 2
/// var0 = 1.0
/// var1 = 0.5
///
/// [run]
/// epsilon = 0.01
/// h = 1e-4                 # or omit and set h_power: h = epsilon^h_power
/// replicates = 200
/// seed = 1
///
/// [output]
/// path = "out.csv"
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub family: FamilyConfig,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub estimators: EstimatorSection,
    #[serde(default)]
    pub sweep: Option<SweepSection>,
    #[serde(default)]
    pub diagnostics: DiagnosticsSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FamilyConfig {
    /// `U_t(x) = ‖x‖²/(2σ_t²)` with `σ_t²` linear between `var0` and `var1`.
    Gaussian { d: usize, var0: f64, var1: f64 },
    /// The same target written as a product of 1-d factors; constants and
    /// references go through the generic product machinery.
    ProductGaussian { d: usize, var0: f64, var1: f64 },
    /// Bayesian logistic regression, from a data file or generated.
    Logistic {
        #[serde(default)]
        data: Option<PathBuf>,
        #[serde(default = "default_prior_var")]
        prior_var: f64,
        #[serde(default)]
        synthetic: Option<SyntheticConfig>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticConfig {
    pub d: usize,
    pub m: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub epsilon: f64,
    /// Step size; `epsilon^h_power` when absent.
    pub h: Option<f64>,
    pub h_power: f64,
    pub replicates: usize,
    pub seed: u64,
    /// Worker threads; all available cores when absent.
    pub workers: Option<usize>,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            epsilon: 0.01,
            h: None,
            h_power: 3.0,
            replicates: 200,
            seed: 0,
            workers: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimatorSection {
    pub ti: bool,
    pub jarzynski: bool,
    pub naive_is: bool,
    pub naive_is_samples: usize,
}

impl Default for EstimatorSection {
    fn default() -> Self {
        Self {
            ti: true,
            jarzynski: true,
            naive_is: false,
            naive_is_samples: 100_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalingMode {
    /// `h = ell·epsilon` at fixed `epsilon`.
    Ell,
    /// `epsilon = eps_coeff·d^(−eps_power)`, `h = epsilon^h_power`.
    Power,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub d_grid: Vec<usize>,
    pub scaling: ScalingMode,
    #[serde(default)]
    pub ell: Option<f64>,
    /// Fixed `epsilon` under ell-scaling; defaults to `run.epsilon`.
    #[serde(default)]
    pub epsilon: Option<f64>,
    #[serde(default)]
    pub eps_coeff: Option<f64>,
    #[serde(default)]
    pub eps_power: Option<f64>,
    /// Defaults to `run.h_power`.
    #[serde(default)]
    pub h_power: Option<f64>,
    /// Stop after this many newly computed cells.
    #[serde(default)]
    pub max_cells: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnosticsSection {
    pub trial_points: usize,
    pub coupled_pairs: usize,
    pub t_grid_points: usize,
    pub variance_replicates: usize,
    pub clt_replicates: usize,
    /// Defaults to `run.epsilon`.
    pub clt_epsilon: Option<f64>,
    pub clt_h_power: f64,
    pub ks_factor: f64,
    pub delta: f64,
    /// Replace `λ` by 0 in the drift check (falsification control).
    pub corrupt_lambda: bool,
    pub tv_h_grid: Vec<f64>,
    pub ell_grid: Vec<f64>,
    pub ou_h_eff: f64,
    pub ou_samples: usize,
}

impl Default for DiagnosticsSection {
    fn default() -> Self {
        Self {
            trial_points: 1000,
            coupled_pairs: 50,
            t_grid_points: 101,
            variance_replicates: 500,
            clt_replicates: 500,
            clt_epsilon: None,
            clt_h_power: 3.0,
            ks_factor: crate::diagnostics::DEFAULT_KS_THRESHOLD_FACTOR,
            delta: 0.5,
            corrupt_lambda: false,
            tv_h_grid: vec![1e-5, 1e-4, 1e-3],
            ell_grid: vec![0.0, 0.5, 1.0, 2.0],
            ou_h_eff: 0.01,
            ou_samples: 1_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub path: PathBuf,
    /// Optional file for the summary table.
    pub report: Option<PathBuf>,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            path: PathBuf::from("results.csv"),
            report: None,
        }
    }
}

fn default_prior_var() -> f64 {
    1.0
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn require(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(config_err(msg()))
    }
}

impl Config {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(text).map_err(|e| config_err(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        match &self.family {
            FamilyConfig::Gaussian { d, var0, var1 } | FamilyConfig::ProductGaussian { d, var0, var1 } => {
                require(*d > 0, || "family.d must be positive".into())?;
                require(
                    *var0 > 0.0 && *var1 > 0.0 && var0.is_finite() && var1.is_finite(),
                    || format!("family variances must be positive, got {var0}, {var1}"),
                )?;
            }
            FamilyConfig::Logistic {
                data,
                prior_var,
                synthetic,
            } => {
                require(*prior_var > 0.0 && prior_var.is_finite(), || {
                    format!("family.prior_var must be positive, got {prior_var}")
                })?;
                require(!(data.is_some() && synthetic.is_some()), || {
                    "family.data and family.synthetic are exclusive".into()
                })?;
                if let Some(s) = synthetic {
                    require(s.d > 0, || "family.synthetic.d must be positive".into())?;
                }
            }
        }
        let r = &self.run;
        require(r.epsilon > 0.0 && r.epsilon.is_finite(), || {
            format!("run.epsilon must be positive, got {}", r.epsilon)
        })?;
        if let Some(h) = r.h {
            require(h > 0.0 && h <= 1.0, || format!("run.h must lie in (0, 1], got {h}"))?;
        }
        require(r.h_power > 1.0, || {
            format!("run.h_power must exceed 1, got {}", r.h_power)
        })?;
        require(r.replicates >= 2, || "run.replicates must be at least 2".into())?;
        require(r.workers != Some(0), || "run.workers must be positive".into())?;
        let e = &self.estimators;
        require(e.ti || e.jarzynski || e.naive_is, || {
            "enable at least one estimator".into()
        })?;
        require(
            !self.estimators.naive_is || self.estimators.naive_is_samples >= 2,
            || "estimators.naive_is_samples must be at least 2".into(),
        )?;
        if let Some(s) = &self.sweep {
            require(!s.d_grid.is_empty() && s.d_grid.iter().all(|&d| d > 0), || {
                "sweep.d_grid must be a non-empty list of positive integers".into()
            })?;
            match s.scaling {
                ScalingMode::Ell => {
                    let ell = s
                        .ell
                        .ok_or_else(|| config_err("sweep.ell is required for ell scaling"))?;
                    require(ell > 0.0 && ell.is_finite(), || {
                        format!(
                            "sweep.ell must be positive under ell scaling (use power scaling for ell = 0), got {ell}"
                        )
                    })?;
                    if let Some(e) = s.epsilon {
                        require(e > 0.0 && e.is_finite(), || {
                            format!("sweep.epsilon must be positive, got {e}")
                        })?;
                    }
                }
                ScalingMode::Power => {
                    let coeff = s
                        .eps_coeff
                        .ok_or_else(|| config_err("sweep.eps_coeff is required for power scaling"))?;
                    let a = s
                        .eps_power
                        .ok_or_else(|| config_err("sweep.eps_power is required for power scaling"))?;
                    require(coeff > 0.0 && coeff.is_finite(), || {
                        format!("sweep.eps_coeff must be positive, got {coeff}")
                    })?;
                    require(a >= 0.0 && a.is_finite(), || {
                        format!("sweep.eps_power must be non-negative, got {a}")
                    })?;
                    let c = s.h_power.unwrap_or(r.h_power);
                    require(c > 1.0, || format!("sweep.h_power must exceed 1, got {c}"))?;
                }
            }
        }
        let g = &self.diagnostics;
        require(
            g.trial_points > 0 && g.coupled_pairs > 0 && g.t_grid_points >= 2,
            || "diagnostics.trial_points, coupled_pairs must be positive and t_grid_points at least 2".into(),
        )?;
        require(g.variance_replicates >= 2 && g.clt_replicates >= 2, || {
            "diagnostics replicate counts must be at least 2".into()
        })?;
        require(g.clt_h_power > 1.0, || "diagnostics.clt_h_power must exceed 1".into())?;
        require(g.delta > 0.0 && g.delta < 1.0, || {
            "diagnostics.delta must lie in (0, 1)".into()
        })?;
        require(g.ks_factor > 0.0, || "diagnostics.ks_factor must be positive".into())?;
        require(g.tv_h_grid.iter().all(|&h| h > 0.0), || {
            "diagnostics.tv_h_grid must be positive".into()
        })?;
        require(g.ell_grid.iter().all(|&l| l >= 0.0 && l.is_finite()), || {
            "diagnostics.ell_grid must be non-negative".into()
        })?;
        require(g.ou_h_eff > 0.0 && g.ou_samples >= 100, || {
            "diagnostics.ou_h_eff must be positive and ou_samples at least 100".into()
        })?;
        Ok(())
    }

    /// Step size for the `[run]` section.
    pub fn step(&self) -> f64 {
        self.run.h.unwrap_or_else(|| self.run.epsilon.powf(self.run.h_power))
    }
}

impl FamilyConfig {
    pub fn name(&self) -> &'static str {
        match self {
            FamilyConfig::Gaussian { .. } => "gaussian",
            FamilyConfig::ProductGaussian { .. } => "product_gaussian",
            FamilyConfig::Logistic { .. } => "logistic",
        }
    }

    /// Variances of a Gaussian family.
    pub fn gaussian_variances(&self) -> Option<(f64, f64)> {
        match self {
            FamilyConfig::Gaussian { var0, var1, .. } | FamilyConfig::ProductGaussian { var0, var1, .. } => {
                Some((*var0, *var1))
            }
            FamilyConfig::Logistic { .. } => None,
        }
    }

    /// Canonical text for hashing.
    pub fn describe(&self) -> String {
        match self {
            FamilyConfig::Gaussian { var0, var1, .. } | FamilyConfig::ProductGaussian { var0, var1, .. } => {
                format!("{}|var0={var0:e}|var1={var1:e}", self.name())
            }
            FamilyConfig::Logistic {
                data,
                prior_var,
                synthetic,
            } => format!(
                "logistic|prior_var={prior_var:e}|data={}|synthetic={}",
                data.as_ref().map(|p| p.display().to_string()).unwrap_or_default(),
                synthetic
                    .map(|s| format!("{}x{}@{}", s.m, s.d, s.seed))
                    .unwrap_or_default()
            ),
        }
    }

    /// Load or generate the logistic data set. `d` overrides the synthetic
    /// dimension (sweeps).
    pub fn logistic_model(&self, d: Option<usize>) -> Result<LogisticModel> {
        match self {
            FamilyConfig::Logistic {
                data: Some(path),
                prior_var,
                ..
            } => {
                let model = LogisticModel::from_csv(path, *prior_var)?;
                if let Some(d) = d {
                    require(model.dim() == d, || {
                        format!("data file has {} covariates but d = {d} was requested", model.dim())
                    })?;
                }
                Ok(model)
            }
            FamilyConfig::Logistic {
                synthetic: Some(s),
                prior_var,
                ..
            } => super::synthetic_logistic_data(d.unwrap_or(s.d), s.m, *prior_var, s.seed),
            FamilyConfig::Logistic { .. } => Err(config_err("logistic family needs `data` or `synthetic`")),
            _ => Err(config_err(format!("family `{}` is not logistic", self.name()))),
        }
    }

    /// Build the potential, with `d` overriding the configured dimension.
    pub fn build(&self, d: Option<usize>) -> Result<Box<dyn AnnealingPotential>> {
        Ok(match self {
            FamilyConfig::Gaussian { d: d0, var0, var1 } => {
                Box::new(GaussianPath::new(d.unwrap_or(*d0), *var0, *var1)?)
            }
            FamilyConfig::ProductGaussian { d: d0, var0, var1 } => {
                Box::new(ProductPath::new(d.unwrap_or(*d0), ScalarGaussian::new(*var0, *var1)?)?)
            }
            FamilyConfig::Logistic { .. } => Box::new(LogisticPath::new(self.logistic_model(d)?)),
        })
    }

    /// Configured dimension, if fixed by the family section.
    pub fn dim(&self) -> Option<usize> {
        match self {
            FamilyConfig::Gaussian { d, .. } | FamilyConfig::ProductGaussian { d, .. } => Some(*d),
            FamilyConfig::Logistic { synthetic, .. } => synthetic.map(|s| s.d),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[family]
kind = "gaussian"
d = 2
var0 = 1.0
var1 = 0.5
"#;

    #[test]
    fn defaults_fill_missing_sections() {
        let c = Config::from_toml_str(MINIMAL).unwrap();
        assert_eq!(c.run, RunSection::default());
        assert_eq!(c.step(), 0.01f64.powf(3.0));
        assert!(c.sweep.is_none());
        assert!(c.estimators.ti && c.estimators.jarzynski && !c.estimators.naive_is);
    }

    #[test]
    fn explicit_step_wins() {
        let c = Config::from_toml_str(&format!("{MINIMAL}\n[run]\nepsilon = 0.02\nh = 1e-4\n")).unwrap();
        assert_eq!(c.step(), 1e-4);
    }

    #[test]
    fn rejects_bad_values() {
        for extra in [
            "[run]\nepsilon = -1.0\n",
            "[run]\nh_power = 1.0\n",
            "[run]\nreplicates = 1\n",
            "[run]\nunknown = 3\n",
            "[sweep]\nd_grid = []\nscaling = \"ell\"\nell = 1.0\n",
            "[sweep]\nd_grid = [1]\nscaling = \"ell\"\nell = 0.0\n",
            "[sweep]\nd_grid = [1]\nscaling = \"power\"\neps_coeff = 1.0\n",
            "[diagnostics]\ndelta = 1.0\n",
            "[estimators]\nti = false\njarzynski = false\n",
        ] {
            let r = Config::from_toml_str(&format!("{MINIMAL}\n{extra}"));
            assert!(matches!(r, Err(Error::Config(_))), "{extra}");
        }
        assert!(Config::from_toml_str("[family]\nkind = \"cubic\"\n").is_err());
        assert!(Config::from_toml_str("[family]\nkind = \"gaussian\"\nd = 0\nvar0 = 1.0\nvar1 = 1.0\n").is_err());
    }

    #[test]
    fn logistic_synthetic_section() {
        let c = Config::from_toml_str(
            "[family]\nkind = \"logistic\"\nprior_var = 2.0\n[family.synthetic]\nd = 2\nm = 10\nseed = 4\n",
        )
        .unwrap();
        let p = c.family.build(None).unwrap();
        assert_eq!(p.dim(), 2);
        assert_eq!(p.family(), "logistic");
        assert_eq!(c.family.dim(), Some(2));
    }

    #[test]
    fn round_trip() {
        let c = Config::from_toml_str(MINIMAL).unwrap();
        let text = toml::to_string(&c).unwrap();
        assert_eq!(Config::from_toml_str(&text).unwrap(), c);
    }
}
