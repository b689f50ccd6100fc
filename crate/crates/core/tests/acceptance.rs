//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails. Pass criterion numbers as arguments to run a
//! subset, e.g. `cargo test --test acceptance -- 3 5`.

use std::path::Path;
use std::time::Instant;

use anneal_core::diagnostics::{
    clt_check, contraction_check, discrete_drift_constants, drift_check, gaussian_s_moments,
    gaussian_step_factor_check, thermo_identity_check, variance_bound_check,
};
use anneal_core::estimators::{
    asymptotic_variance, jarzynski_log_ratio, mean_var, naive_is, product_is_relvar, spectral_phi, ti_log_ratio,
    AsymptoticVarianceConfig, Reference, ReferenceSource,
};
use anneal_core::experiments::{
    run_estimate, run_logistic_pipeline, run_sweep, synthetic_logistic_data, Config, SweepSpec,
};
use anneal_core::potential::{
    compute_constants, AnnealingPotential, GaussianPath, LogisticModel, LogisticPath, ProductPath, ScalarGaussian,
};
use anneal_core::rng::{fill_standard_normal, mix_seed};
use anneal_core::sde::{simulate_coupled, simulate_replicates, RunConfig};
use anneal_core::Result;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};

const SEED: u64 = 20_240_601;
const LOG_HALF: f64 = -std::f64::consts::LN_2;

type Criterion<'a> = Box<dyn Fn() -> Result<Outcome> + 'a>;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Result<Outcome> {
    Ok(Outcome {
        pass,
        detail: detail.into(),
    })
}

fn gaussian_d2() -> GaussianPath {
    GaussianPath::new(2, 1.0, 0.5).unwrap()
}

fn s_values(p: &dyn AnnealingPotential, cfg: &RunConfig, n: usize) -> Result<Vec<f64>> {
    Ok(simulate_replicates(p, cfg, n, None)?
        .iter()
        .map(|x| x.sum_dt_u)
        .collect())
}

fn normal_points(d: usize, n: usize, scale: f64, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let mut x = vec![0.0; d];
            fill_standard_normal(&mut rng, &mut x);
            x.iter().map(|v| v * scale).collect()
        })
        .collect()
}

fn c1_gaussian_ti() -> Result<Outcome> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let start = Instant::now();
    let (ti, jz) = pool.install(|| -> Result<_> {
        let p = gaussian_d2();
        let cfg = RunConfig::new(0.01, 1e-4, mix_seed(&[SEED, 1]))?;
        let paths = simulate_replicates(&p, &cfg, 200, None)?;
        let ti = ti_log_ratio(&paths, Reference::analytic(LOG_HALF))?;
        let jz = jarzynski_log_ratio(&paths, Reference::analytic(LOG_HALF), mix_seed(&[SEED, 1, 1]))?;
        Ok((ti, jz))
    })?;
    let secs = start.elapsed().as_secs_f64();
    let pass = ti.within(3.0) == Some(true) && jz.within(3.0) == Some(true) && secs < 60.0;
    outcome(
        pass,
        format!(
            "TI {:.5} ± {:.5}, Jarzynski {:.5} ± {:.5} vs {LOG_HALF}; single thread {secs:.1}s",
            ti.estimate, ti.stderr, jz.estimate, jz.stderr
        ),
    )
}

fn c2_bias_shrinkage() -> Result<Outcome> {
    let p = gaussian_d2();
    let ell = 0.01;
    let n = 80_000;
    let mut bias = Vec::new();
    let mut detail = Vec::new();
    for (i, eps) in [0.04, 0.02, 0.01].into_iter().enumerate() {
        let h = ell * eps;
        let cfg = RunConfig::new(eps, h, mix_seed(&[SEED, 2, i as u64]))?;
        let s = s_values(&p, &cfg, n)?;
        let (m, v) = mean_var(&s);
        let b = -m - 0.5f64.ln();
        let exact = -gaussian_s_moments(&p, eps, h).0 - 0.5f64.ln();
        detail.push(format!(
            "eps={eps}: {b:.5} ± {:.5} (exact {exact:.5})",
            (v / n as f64).sqrt()
        ));
        bias.push(b.abs());
    }
    let r1 = bias[0] / bias[1];
    let r2 = bias[1] / bias[2];
    let ok = |r: f64| (1.0..=4.0).contains(&r);
    outcome(
        ok(r1) && ok(r2),
        format!("{}; ratios {r1:.3}, {r2:.3} (need [1, 4])", detail.join(", ")),
    )
}

fn c3_naive_is() -> Result<Outcome> {
    let u0 = |x: f64| x * x / 2.0;
    let u1 = |x: f64| x * x;
    let mut pass = true;
    let mut detail = Vec::new();
    for d in [1usize, 5, 10] {
        let p = ProductPath::new(d, ScalarGaussian::new(1.0, 0.5)?)?;
        let r = naive_is(&p, 1_000_000, None, mix_seed(&[SEED, 3, d as u64]))?;
        let oracle = product_is_relvar(u0, u1, d)?;
        let rel = (r.relative_variance - oracle).abs() / oracle;
        pass &= rel <= 0.2;
        detail.push(format!(
            "d={d}: {:.4} vs {oracle:.4} ({:.1}%)",
            r.relative_variance,
            100.0 * rel
        ));
    }
    outcome(pass, detail.join(", "))
}

fn c4_contraction() -> Result<Outcome> {
    let p = gaussian_d2();
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    let mut factor_ok = true;
    for (i, (eps, h)) in [(1.0, 1e-3), (0.01, 1e-4)].into_iter().enumerate() {
        let cfg = RunConfig::new(eps, h, mix_seed(&[SEED, 4, i as u64]))?.with_skeleton();
        let pair = simulate_coupled(&p, &cfg, &[1.0, -2.0], &[-0.5, 0.3], 0)?;
        let r = gaussian_step_factor_check(&pair, &p, eps)?;
        factor_ok &= r.satisfied && r.checked > 0;
        worst = worst.max(r.observed);
        checked += r.checked;
    }

    let model = synthetic_logistic_data(5, 40, 1.0, mix_seed(&[SEED, 4]))?;
    let lp = LogisticPath::new(model);
    let c = lp.assumption_constants()?;
    let (eps, h) = (0.1, 1e-4);
    let cfg = RunConfig::new(eps, h, mix_seed(&[SEED, 4, 2]))?;
    let xs = normal_points(5, 50, 1.0, mix_seed(&[SEED, 4, 3]));
    let ys = normal_points(5, 50, 3.0, mix_seed(&[SEED, 4, 4]));
    let mut violations = 0;
    for (r, (x, y)) in xs.iter().zip(&ys).enumerate() {
        let pair = simulate_coupled(&lp, &cfg, x, y, r as u64)?;
        violations += contraction_check(&pair, c.strong_convexity, c.lipschitz, eps)?.violations;
    }
    outcome(
        factor_ok && violations == 0,
        format!(
            "Gaussian step factor max rel dev {worst:.2e} over {checked} steps (tol 1e-12); \
             logistic d=5 K={:.3} L={:.3}: {violations} violations over 50 pairs",
            c.strong_convexity, c.lipschitz
        ),
    )
}

fn c5_drift() -> Result<Outcome> {
    let paths: Vec<Box<dyn AnnealingPotential>> = vec![
        Box::new(gaussian_d2()),
        Box::new(ProductPath::new(7, ScalarGaussian::new(0.5, 3.0)?)?),
    ];
    let (eps, h) = (0.05, 1e-3);
    let mut valid_violations = 0;
    let mut corrupt_violations = 0;
    let mut checked = 0;
    for (i, p) in paths.iter().enumerate() {
        let c = p.assumption_constants()?;
        let consts = discrete_drift_constants(eps, h, c.strong_convexity, c.lipschitz, p.dim(), 0.0, None)?;
        let points = normal_points(p.dim(), 1000, 2.0, mix_seed(&[SEED, 5, i as u64]));
        let r = drift_check(p.as_ref(), &consts, &points)?;
        valid_violations += r.violations;
        checked += r.checked;
        let mut bad = consts;
        bad.lambda_disc = Some(0.0);
        corrupt_violations += drift_check(p.as_ref(), &bad, &points)?.violations;
    }
    outcome(
        valid_violations == 0 && corrupt_violations > 0,
        format!("{valid_violations} violations over {checked} comparisons; lambda=0 control: {corrupt_violations} violations"),
    )
}

fn c6_thermo_identity() -> Result<Outcome> {
    let grid: Vec<f64> = (0..101).map(|i| i as f64 / 100.0).collect();
    let g = thermo_identity_check(&gaussian_d2(), &grid)?;
    let prod = ProductPath::new(7, ScalarGaussian::new(1.0, 0.5)?)?.quadrature_only();
    let q = thermo_identity_check(&prod, &grid)?;
    outcome(
        g.satisfied && q.satisfied && g.observed < 1e-8 && q.observed < 1e-8,
        format!(
            "max residual Gaussian {:.2e}, d=7 product (quadrature) {:.2e}",
            g.observed, q.observed
        ),
    )
}

fn c7_variance_bound() -> Result<Outcome> {
    let p = gaussian_d2();
    let (eps, h) = (0.01, 1e-4);
    let cfg = RunConfig::new(eps, h, mix_seed(&[SEED, 7]))?;
    let s = s_values(&p, &cfg, 500)?;
    let r = variance_bound_check(&p, eps, h, &s)?;
    outcome(
        r.satisfied,
        format!("var[S] = {:.3e} <= bound {:.3e}", r.observed, r.bound),
    )
}

fn c8_clt() -> Result<Outcome> {
    const N: usize = 500;
    const KS_MAX: f64 = 0.08;
    let p = GaussianPath::new(4, 1.0, 0.5)?;
    let eps: f64 = 0.005;
    let h = eps.powi(3);
    let cfg = RunConfig::new(eps, h, mix_seed(&[SEED, 8]))?;
    let s = s_values(&p, &cfg, N)?;
    let (mean, var) = gaussian_s_moments(&p, eps, h);
    let z: Vec<f64> = s.iter().map(|v| (v - mean) / var.sqrt()).collect();
    let (ks, _) = clt_check(&z, Some(KS_MAX))?;

    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(&[SEED, 8, 1]));
    let mut normals = vec![0.0; N];
    fill_standard_normal(&mut rng, &mut normals);
    let (ks_n, rn) = clt_check(&normals, Some(KS_MAX))?;
    let expo: Vec<f64> = (0..N)
        .map(|_| Distribution::<f64>::sample(&Exp1, &mut rng) - 1.0)
        .collect();
    let (ks_e, re) = clt_check(&expo, Some(KS_MAX))?;
    outcome(
        ks < KS_MAX && rn.satisfied && !re.satisfied,
        format!("KS {ks:.4} (< {KS_MAX}); normal control {ks_n:.4}, exponential control {ks_e:.4}"),
    )
}

fn c9_ou_variance() -> Result<Outcome> {
    let ou = GaussianPath::new(1, 1.0, 1.0)?;
    let f = |_: f64, x: &[f64]| x[0];
    let cfg = AsymptoticVarianceConfig::new(0.01, 50_000_000, mix_seed(&[SEED, 9]));
    let mut pass = true;
    let mut prev: Option<(f64, f64)> = None;
    let mut detail = Vec::new();
    for ell in [0.0, 0.5, 1.0, 2.0] {
        let r = asymptotic_variance(&ou, &f, ell, &cfg, &[0.5])?;
        let phi = spectral_phi(1.0, ell)?;
        let rel = (r.sigma2 - phi).abs() / phi;
        pass &= rel <= 0.05;
        if let Some((v, se)) = prev {
            pass &= r.sigma2 >= v - 3.0 * (se * se + r.stderr * r.stderr).sqrt();
        }
        prev = Some((r.sigma2, r.stderr));
        detail.push(format!("ell={ell}: {:.4} ± {:.4} vs {phi:.4}", r.sigma2, r.stderr));
    }
    outcome(pass, detail.join(", "))
}

fn c10_logistic(dir: &Path) -> Result<Outcome> {
    let config = Config::from_toml_str(&format!(
        r#"
[family]
kind = "logistic"
prior_var = 1.0
synthetic = {{ d = 2, m = 40, seed = {SEED} }}

[run]
epsilon = 0.005
h = 5e-6
replicates = 200
seed = {SEED}

[diagnostics]
coupled_pairs = 10

[output]
path = "{}"
"#,
        dir.join("logistic.csv").display()
    ))?;
    let model = config.family.logistic_model(None)?;
    let r = run_logistic_pipeline(model, &config)?;
    let quad = r.ti.reference_source == ReferenceSource::Quadrature;
    let ti_ok = quad && r.ti.within(3.0) == Some(true);

    let unit = LogisticModel::new(2, vec![vec![1.0, 0.0]], vec![1.0], 1.0)?;
    let c = compute_constants(&LogisticPath::new(unit))?;
    let exact = |a: f64, b: f64| (a - b).abs() <= 1e-12;
    let consts_ok = exact(c.strong_convexity, 1.0)
        && exact(c.lipschitz, 2.0)
        && exact(c.time_continuity, 2.0)
        && c.xi.is_some_and(|v| exact(v, 2.0))
        && c.lambda_max.is_some_and(|v| exact(v, 1.0));
    outcome(
        ti_ok && consts_ok,
        format!(
            "TI log Z1 {:.4} ± {:.4} vs quadrature {:.4}; unit constants K={} L={} M={} xi={:?} lambda_max={:?}",
            r.ti.estimate,
            r.ti.stderr,
            r.ti.reference.unwrap_or(f64::NAN),
            c.strong_convexity,
            c.lipschitz,
            c.time_continuity,
            c.xi,
            c.lambda_max
        ),
    )
}

fn c11_determinism(dir: &Path) -> Result<Outcome> {
    let estimate = |name: &str, seed: u64, workers: usize| -> Result<Vec<u8>> {
        let path = dir.join(name);
        let config = Config::from_toml_str(&format!(
            r#"
[family]
kind = "gaussian"
d = 3
var0 = 1.0
var1 = 0.5

[run]
epsilon = 0.05
h = 1e-3
replicates = 40
seed = {seed}
workers = {workers}

[estimators]
naive_is = true
naive_is_samples = 5000

[output]
path = "{}"
"#,
            path.display()
        ))?;
        run_estimate(&config)?;
        Ok(std::fs::read(&path)?)
    };
    let a = estimate("a.csv", 11, 1)?;
    let b = estimate("b.csv", 11, 3)?;
    let other = estimate("c.csv", 12, 1)?;
    let estimate_ok = a == b && a != other;

    let sweep = |name: &str, max_cells: Option<usize>| -> Result<Vec<u8>> {
        let path = dir.join(name);
        let mut config = Config::from_toml_str(&format!(
            r#"
[family]
kind = "product_gaussian"
d = 1
var0 = 1.0
var1 = 0.5

[run]
epsilon = 0.05
replicates = 30
seed = 5

[sweep]
d_grid = [1, 2, 4, 8]
scaling = "ell"
ell = 0.02

[output]
path = "{}"
"#,
            path.display()
        ))?;
        config.sweep.as_mut().unwrap().max_cells = max_cells;
        run_sweep(&SweepSpec::from_config(&config)?)?;
        Ok(std::fs::read(&path)?)
    };
    let full = sweep("full.csv", None)?;
    let first = sweep("resumed.csv", Some(1))?;
    let second = sweep("resumed.csv", Some(2))?;
    let resumed = sweep("resumed.csv", None)?;
    let again = sweep("resumed.csv", None)?;
    let sweep_ok = first.len() < second.len() && second.len() < full.len() && resumed == full && again == full;
    outcome(
        estimate_ok && sweep_ok,
        format!(
            "estimate byte-identical across worker counts: {}, seed-sensitive: {}; \
             interrupted sweep resumes to identical file: {} ({} bytes)",
            a == b,
            a != other,
            resumed == full && again == full,
            full.len()
        ),
    )
}

fn main() {
    let selected: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let dir = tempfile::tempdir().expect("temp dir");
    let criteria: Vec<(usize, &str, Criterion)> = vec![
        (1, "Gaussian TI and Jarzynski accuracy", Box::new(c1_gaussian_ti)),
        (2, "bias shrinks linearly in epsilon", Box::new(c2_bias_shrinkage)),
        (3, "naive importance sampling blow-up", Box::new(c3_naive_is)),
        (4, "synchronous contraction", Box::new(c4_contraction)),
        (5, "discrete drift condition", Box::new(c5_drift)),
        (6, "thermodynamic identity", Box::new(c6_thermo_identity)),
        (7, "variance bound", Box::new(c7_variance_bound)),
        (8, "central limit theorem", Box::new(c8_clt)),
        (9, "asymptotic variance oracle", Box::new(c9_ou_variance)),
        (
            10,
            "logistic regression end to end",
            Box::new(|| c10_logistic(dir.path())),
        ),
        (
            11,
            "determinism and resumability",
            Box::new(|| c11_determinism(dir.path())),
        ),
    ];
    let mut failed = 0;
    for (id, name, run) in &criteria {
        if !selected.is_empty() && !selected.contains(id) {
            continue;
        }
        let start = Instant::now();
        let (pass, detail) = match run() {
            Ok(o) => (o.pass, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        failed += usize::from(!pass);
        println!(
            "criterion {id:>2} {} {name}: {detail} [{:.1}s]",
            if pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
