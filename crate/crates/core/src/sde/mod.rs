//! Euler–Maruyama simulation of `dX = −ε⁻¹∇U_t(X)dt + √(2ε⁻¹)dB`.
//!
//! The drift is frozen on each interval `[kh, (k+1)h)`, so one step maps
//! `x ↦ x − (h/ε)∇U_{kh}(x) + √(2h/ε)·ξ` with `ξ` standard normal. A run
//! covers the grid `{0, h, …, (n−1)h}` with `n = ⌊1/h⌋`; the endpoint is the
//! state after the last step. No partial step closes the interval.

mod dump;

pub use dump::{read_trajectory, write_trajectory, Trajectory};

use rayon::prelude::*;

use crate::error::{ensure_finite, Error, Result};
use crate::potential::{check_dim, AnnealingPotential};
use crate::rng::{NoiseKey, NormalStream};

/// What a simulation keeps besides the accumulated `Σ ∂_tU`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Storage {
    #[default]
    EndpointOnly,
    Skeleton,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunConfig {
    pub epsilon: f64,
    pub h: f64,
    pub seed: u64,
    pub storage: Storage,
}

impl RunConfig {
    pub fn new(epsilon: f64, h: f64, seed: u64) -> Result<Self> {
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(Error::invalid(
                "epsilon",
                format!("must be finite and positive, got {epsilon}"),
            ));
        }
        if !(h.is_finite() && h > 0.0 && h <= 1.0) {
            return Err(Error::invalid("h", format!("must lie in (0, 1], got {h}")));
        }
        Ok(Self {
            epsilon,
            h,
            seed,
            storage: Storage::EndpointOnly,
        })
    }

    pub fn with_skeleton(mut self) -> Self {
        self.storage = Storage::Skeleton;
        self
    }

    /// `n = ⌊1/h⌋`.
    pub fn steps(&self) -> usize {
        grid_len(self.h)
    }

    pub fn key(&self, replicate: u64) -> NoiseKey {
        NoiseKey::new(self.seed, replicate)
    }
}

/// `⌊1/h⌋`, tolerant of `1/h` landing a few ulps below an integer
/// (`1/0.1 = 9.999…` must give 10).
pub fn grid_len(h: f64) -> usize {
    ((1.0 / h) * (1.0 + 1e-12)).floor() as usize
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkeletonPath {
    pub h: f64,
    pub d: usize,
    /// Number of grid points `n`.
    pub n: usize,
    /// `n × d` row-major; empty when only the endpoint was kept.
    pub states: Vec<f64>,
    /// `h·Σ_{k<n} ∂_tU_{kh}(X_{kh})`.
    pub sum_dt_u: f64,
    /// State at time `nh`.
    pub endpoint: Vec<f64>,
}

impl SkeletonPath {
    pub fn times(&self) -> Vec<f64> {
        (0..self.n).map(|k| k as f64 * self.h).collect()
    }

    pub fn state(&self, k: usize) -> Option<&[f64]> {
        self.states.get(k * self.d..(k + 1) * self.d)
    }

    pub fn has_states(&self) -> bool {
        !self.states.is_empty()
    }
}

/// Two legs driven by the same Brownian increments.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledPair {
    pub path_x: SkeletonPath,
    pub path_y: SkeletonPath,
    pub initial_separation: f64,
    /// `‖X_{kh} − Y_{kh}‖` for `k = 0..=n` (the last entry is the endpoint).
    pub separations: Vec<f64>,
}

/// One Euler–Maruyama step.
pub fn euler_step<P: AnnealingPotential + ?Sized>(
    p: &P,
    t: f64,
    x: &[f64],
    eps: f64,
    h: f64,
    noise: &[f64],
) -> Result<Vec<f64>> {
    check_dim(p, x)?;
    check_dim(p, noise)?;
    ensure_finite(x, "euler_step")?;
    ensure_finite(noise, "euler_step")?;
    let mut out = x.to_vec();
    let mut grad = vec![0.0; x.len()];
    let a = h / eps;
    let sd = (2.0 * a).sqrt();
    p.grad_u(t, x, &mut grad);
    for ((o, g), z) in out.iter_mut().zip(&grad).zip(noise) {
        *o += -a * g + sd * z;
    }
    if !out.iter().all(|v| v.is_finite()) {
        return Err(Error::Divergence { step: 0, time: t });
    }
    Ok(out)
}

/// Scratch buffers for in-place stepping.
struct Stepper {
    a: f64,
    sd: f64,
    grad: Vec<f64>,
    z: Vec<f64>,
}

impl Stepper {
    fn new(d: usize, eps: f64, h: f64) -> Self {
        let a = h / eps;
        Self {
            a,
            sd: (2.0 * a).sqrt(),
            grad: vec![0.0; d],
            z: vec![0.0; d],
        }
    }

    #[inline]
    fn step<P: AnnealingPotential + ?Sized>(&mut self, p: &P, t: f64, x: &mut [f64]) {
        p.grad_u(t, x, &mut self.grad);
        for ((xi, g), z) in x.iter_mut().zip(&self.grad).zip(&self.z) {
            *xi += -self.a * g + self.sd * z;
        }
    }
}

/// Advance `x` over the annealing grid, calling `visit(k, X_{kh})` before
/// each step. Returns `h·Σ ∂_tU_{kh}(X_{kh})`; `x` ends at time `nh`.
pub fn run_annealing<P, V>(
    p: &P,
    eps: f64,
    h: f64,
    x: &mut [f64],
    noise: &mut NormalStream,
    mut visit: V,
) -> Result<f64>
where
    P: AnnealingPotential + ?Sized,
    V: FnMut(usize, &[f64]),
{
    let n = grid_len(h);
    let mut st = Stepper::new(x.len(), eps, h);
    let mut acc = 0.0;
    for k in 0..n {
        let t = k as f64 * h;
        visit(k, x);
        acc += p.dt_u(t, x);
        noise.fill(&mut st.z);
        st.step(p, t, x);
        if !(x.iter().all(|v| v.is_finite()) && acc.is_finite()) {
            return Err(Error::Divergence { step: k, time: t });
        }
    }
    Ok(h * acc)
}

/// Time-homogeneous chain with drift frozen at `s`: `steps` steps from `y`,
/// calling `visit(j, Y_j)` for `j = 0..=steps`.
#[allow(clippy::too_many_arguments)]
pub fn run_frozen<P, V>(
    p: &P,
    s: f64,
    eps: f64,
    h: f64,
    y: &mut [f64],
    steps: usize,
    noise: &mut NormalStream,
    mut visit: V,
) -> Result<()>
where
    P: AnnealingPotential + ?Sized,
    V: FnMut(usize, &[f64]),
{
    let mut st = Stepper::new(y.len(), eps, h);
    for j in 0..steps {
        visit(j, y);
        noise.fill(&mut st.z);
        st.step(p, s, y);
        if !y.iter().all(|v| v.is_finite()) {
            return Err(Error::Divergence { step: j, time: s });
        }
    }
    visit(steps, y);
    Ok(())
}

fn initial_state<P: AnnealingPotential + ?Sized>(p: &P, x0: Option<&[f64]>, key: &NoiseKey) -> Result<Vec<f64>> {
    match x0 {
        Some(x) => {
            check_dim(p, x)?;
            ensure_finite(x, "initial state")?;
            Ok(x.to_vec())
        }
        None => p.sample_pi0(&mut key.initial_rng()),
    }
}

/// Simulate replicate `replicate` of the annealing skeleton. Without `x0`
/// the start is an exact draw from `π_0`.
pub fn simulate_skeleton<P: AnnealingPotential + ?Sized>(
    p: &P,
    cfg: &RunConfig,
    x0: Option<&[f64]>,
    replicate: u64,
) -> Result<SkeletonPath> {
    let key = cfg.key(replicate);
    let mut x = initial_state(p, x0, &key)?;
    let d = x.len();
    let n = cfg.steps();
    let keep = cfg.storage == Storage::Skeleton;
    let mut states = Vec::with_capacity(if keep { n * d } else { 0 });
    let sum_dt_u = run_annealing(p, cfg.epsilon, cfg.h, &mut x, &mut key.increments(), |_, xk| {
        if keep {
            states.extend_from_slice(xk);
        }
    })?;
    Ok(SkeletonPath {
        h: cfg.h,
        d,
        n,
        states,
        sum_dt_u,
        endpoint: x,
    })
}

/// Replicates `0..count` in parallel on the current rayon pool. Results are
/// in replicate order; the first failing replicate (by index) is reported.
pub fn simulate_replicates<P: AnnealingPotential + ?Sized>(
    p: &P,
    cfg: &RunConfig,
    count: usize,
    x0: Option<&[f64]>,
) -> Result<Vec<SkeletonPath>> {
    if count == 0 {
        return Err(Error::EmptyInput("simulate_replicates"));
    }
    let runs: Vec<Result<SkeletonPath>> = (0..count as u64)
        .into_par_iter()
        .map(|r| simulate_skeleton(p, cfg, x0, r))
        .collect();
    runs.into_iter().collect()
}

/// Synchronous coupling: both legs see the same increment at every step.
pub fn simulate_coupled<P: AnnealingPotential + ?Sized>(
    p: &P,
    cfg: &RunConfig,
    x0: &[f64],
    y0: &[f64],
    replicate: u64,
) -> Result<CoupledPair> {
    check_dim(p, x0)?;
    check_dim(p, y0)?;
    ensure_finite(x0, "coupled start")?;
    ensure_finite(y0, "coupled start")?;
    let d = x0.len();
    let n = cfg.steps();
    let keep = cfg.storage == Storage::Skeleton;
    let mut noise = cfg.key(replicate).increments();
    let mut st = Stepper::new(d, cfg.epsilon, cfg.h);
    let mut gy = vec![0.0; d];
    let (mut x, mut y) = (x0.to_vec(), y0.to_vec());
    let (mut sx, mut sy) = (Vec::new(), Vec::new());
    let (mut ax, mut ay) = (0.0, 0.0);
    let mut separations = Vec::with_capacity(n + 1);
    for k in 0..n {
        let t = k as f64 * cfg.h;
        separations.push(distance(&x, &y));
        if keep {
            sx.extend_from_slice(&x);
            sy.extend_from_slice(&y);
        }
        ax += p.dt_u(t, &x);
        ay += p.dt_u(t, &y);
        noise.fill(&mut st.z);
        st.step(p, t, &mut x);
        p.grad_u(t, &y, &mut gy);
        for ((yi, g), z) in y.iter_mut().zip(&gy).zip(&st.z) {
            *yi += -st.a * g + st.sd * z;
        }
        if !(x.iter().chain(&y).all(|v| v.is_finite())) {
            return Err(Error::Divergence { step: k, time: t });
        }
    }
    separations.push(distance(&x, &y));
    let leg = |states, acc: f64, end| SkeletonPath {
        h: cfg.h,
        d,
        n,
        states,
        sum_dt_u: cfg.h * acc,
        endpoint: end,
    };
    Ok(CoupledPair {
        initial_separation: distance(x0, y0),
        path_x: leg(sx, ax, x),
        path_y: leg(sy, ay, y),
        separations,
    })
}

/// Frozen-drift chain at time `s`: returns `(steps + 1) × d` states,
/// row-major, starting with `y0`.
pub fn simulate_frozen<P: AnnealingPotential + ?Sized>(
    p: &P,
    s: f64,
    cfg: &RunConfig,
    y0: &[f64],
    steps: usize,
    replicate: u64,
) -> Result<Vec<f64>> {
    check_dim(p, y0)?;
    ensure_finite(y0, "frozen start")?;
    let mut y = y0.to_vec();
    let mut out = Vec::with_capacity((steps + 1) * y.len());
    run_frozen(
        p,
        s,
        cfg.epsilon,
        cfg.h,
        &mut y,
        steps,
        &mut cfg.key(replicate).increments(),
        |_, yj| out.extend_from_slice(yj),
    )?;
    Ok(out)
}

pub(crate) fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::{GaussianPath, LogisticPath};

    fn gauss(d: usize, v0: f64, v1: f64) -> GaussianPath {
        GaussianPath::new(d, v0, v1).unwrap()
    }

    #[test]
    fn deterministic_step() {
        let p = gauss(2, 1.0, 1.0);
        let y = euler_step(&p, 0.3, &[1.0, 0.0], 1.0, 0.1, &[0.0, 0.0]).unwrap();
        assert!((y[0] - 0.9).abs() < 1e-15 && y[1] == 0.0);
    }

    #[test]
    fn minimizer_is_fixed_point_without_noise() {
        let p = gauss(3, 2.0, 0.5);
        let y = euler_step(&p, 0.7, &[0.0; 3], 0.1, 0.01, &[0.0; 3]).unwrap();
        assert_eq!(y, vec![0.0; 3]);
        let y = euler_step(&p, 0.7, &[1.0, -2.0, 3.0], 0.1, 0.0, &[0.5, 0.5, 0.5]).unwrap();
        assert_eq!(y, vec![1.0, -2.0, 3.0]);
    }

    #[test]
    fn step_matches_affine_map() {
        let p = gauss(2, 1.0, 0.5);
        let (t, eps, h) = (0.4, 0.05, 1e-3);
        let x = [0.7, -1.3];
        let z = [0.25, -1.5];
        let y = euler_step(&p, t, &x, eps, h, &z).unwrap();
        let a = 1.0 - h / (eps * p.variance(t));
        let sd = (2.0 * h / eps).sqrt();
        for j in 0..2 {
            assert!((y[j] - (a * x[j] + sd * z[j])).abs() < 1e-12);
        }
    }

    #[test]
    fn divergence_is_reported() {
        let p = gauss(1, 1.0, 1.0);
        let cfg = RunConfig::new(1e-3, 0.5, 0).unwrap();
        // Factor 1 − 500 per step overflows quickly only with many steps;
        // use a huge start instead.
        let err = simulate_skeleton(&p, &cfg, Some(&[1e306]), 0).unwrap_err();
        assert!(matches!(err, Error::Divergence { step: 0, .. }));
        let err = euler_step(&p, 0.0, &[1e306], 1e-3, 0.5, &[0.0]).unwrap_err();
        assert!(matches!(err, Error::Divergence { .. }));
    }

    #[test]
    fn grid_arithmetic() {
        assert_eq!(grid_len(0.5), 2);
        assert_eq!(grid_len(0.1), 10);
        assert_eq!(grid_len(1e-4), 10_000);
        assert_eq!(grid_len(0.3), 3);
        let p = gauss(1, 1.0, 0.5);
        let cfg = RunConfig::new(0.1, 0.5, 1).unwrap().with_skeleton();
        let path = simulate_skeleton(&p, &cfg, None, 0).unwrap();
        assert_eq!(path.times(), vec![0.0, 0.5]);
        assert_eq!(path.states.len(), 2);
    }

    #[test]
    fn identity_path_accumulates_nothing() {
        let p = gauss(3, 1.0, 1.0);
        let cfg = RunConfig::new(0.1, 0.01, 9).unwrap();
        for r in 0..5 {
            assert_eq!(simulate_skeleton(&p, &cfg, None, r).unwrap().sum_dt_u, 0.0);
        }
    }

    #[test]
    fn bit_identical_reruns() {
        let p = gauss(2, 1.0, 0.5);
        let cfg = RunConfig::new(0.1, 0.01, 42).unwrap().with_skeleton();
        let a = simulate_skeleton(&p, &cfg, None, 3).unwrap();
        let b = simulate_skeleton(&p, &cfg, None, 3).unwrap();
        assert_eq!(a, b);
        let c = simulate_skeleton(&p, &cfg, None, 4).unwrap();
        assert_ne!(a.states, c.states);
        let all = simulate_replicates(&p, &cfg, 6, None).unwrap();
        assert_eq!(all[3], a);
    }

    #[test]
    fn coupled_legs_share_noise() {
        let p = gauss(2, 1.0, 0.5);
        let cfg = RunConfig::new(0.5, 0.01, 5).unwrap();
        let pair = simulate_coupled(&p, &cfg, &[1.0, 1.0], &[1.0, 1.0], 0).unwrap();
        assert!(pair.separations.iter().all(|&s| s == 0.0));
        assert_eq!(pair.path_x.endpoint, pair.path_y.endpoint);
        // Each leg alone equals the uncoupled simulation.
        let pair = simulate_coupled(&p, &cfg, &[1.0, 1.0], &[-2.0, 0.5], 0).unwrap();
        let solo = simulate_skeleton(&p, &cfg, Some(&[-2.0, 0.5]), 0).unwrap();
        assert_eq!(pair.path_y.endpoint, solo.endpoint);
        assert_eq!(pair.path_y.sum_dt_u, solo.sum_dt_u);
    }

    #[test]
    fn coupled_gaussian_exact_factor() {
        let p = gauss(3, 1.0, 1.0);
        let cfg = RunConfig::new(1.0, 0.01, 5).unwrap();
        let pair = simulate_coupled(&p, &cfg, &[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], 0).unwrap();
        let s = &pair.separations;
        assert_eq!(s.len(), 101);
        for k in 0..100 {
            assert!((s[k + 1] / s[k] - 0.99).abs() < 1e-12);
        }
        let ratio = s[100] / s[0];
        assert!((ratio - 0.99f64.powi(100)).abs() < 1e-12);
        assert!(ratio <= (-1.0f64).exp());
    }

    #[test]
    fn frozen_chain_layout() {
        let p = gauss(2, 1.0, 0.5);
        let cfg = RunConfig::new(1.0, 0.01, 1).unwrap();
        assert_eq!(
            simulate_frozen(&p, 0.5, &cfg, &[0.3, 0.4], 0, 0).unwrap(),
            vec![0.3, 0.4]
        );
        let ys = simulate_frozen(&p, 0.5, &cfg, &[0.3, 0.4], 10, 0).unwrap();
        assert_eq!(ys.len(), 22);
        assert_eq!(&ys[..2], &[0.3, 0.4]);
    }

    #[test]
    fn logistic_runs_from_prior() {
        let model = crate::potential::LogisticModel::new(2, vec![vec![1.0, 0.5], vec![-0.3, 1.0]], vec![1.0, 0.0], 1.0)
            .unwrap();
        let p = LogisticPath::new(model);
        let cfg = RunConfig::new(0.1, 0.01, 3).unwrap();
        let path = simulate_skeleton(&p, &cfg, None, 0).unwrap();
        assert!(path.sum_dt_u.is_finite());
        assert_eq!(path.endpoint.len(), 2);
    }

    #[test]
    fn rejects_bad_config() {
        assert!(RunConfig::new(0.0, 0.1, 0).is_err());
        assert!(RunConfig::new(1.0, 0.0, 0).is_err());
        assert!(RunConfig::new(1.0, 1.5, 0).is_err());
        assert!(RunConfig::new(f64::NAN, 0.1, 0).is_err());
    }
}
