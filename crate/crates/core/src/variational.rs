//! Self-consistent Gaussian dynamics of the driven chain.
//!
//! Each momentum mode carries a Gaussian width `G_k` and chirp `Σ_k`; all modes
//! couple through the Debye-Waller type factor `Z = exp(-(1/2)∫dk/2π G_k)`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ode::{DormandPrince, Tolerances};
use crate::chain::ChainSolver;
use crate::diagram::{CellRecord, Method};
use crate::params::{ModelParams, Reduced};

pub const DEFAULT_K_POINTS: usize = 256;
/// Above this Luttinger parameter the cosine is irrelevant and no gap opens.
pub const K_CRITICAL: f64 = 8.0 * PI;
pub const STABILITY_THRESHOLD: f64 = 0.95;
pub const DECAY_THRESHOLD: f64 = 1e-3;
pub const DEFAULT_CLASSIFY_PERIODS: f64 = 100.0;
pub const DEFAULT_DECAY_PERIODS: f64 = 1e4;
pub const G_MIN: f64 = 1e-12;
pub const G_MAX: f64 = 1e12;
pub const GAP_RESIDUAL_TOL: f64 = 1e-10;
pub const GAP_MAX_ITERATIONS: usize = 200;

/// Uniform momentum grid on (0, Λ]; the weights already include the factor
/// two from folding the even integrand over [-Λ, Λ].
#[derive(Debug, Clone, PartialEq)]
pub struct KGrid {
    pub k: Vec<f64>,
    pub weights: Vec<f64>,
}

impl KGrid {
    pub fn uniform(lambda: f64, n: usize) -> Result<Self> {
        if n == 0 || !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidParams(format!("k grid needs n > 0 and Lambda > 0, got n={n}, Lambda={lambda}")));
        }
        let h = lambda / n as f64;
        Ok(Self { k: (1..=n).map(|j| j as f64 * h).collect(), weights: vec![2.0 * h; n] })
    }

    pub fn len(&self) -> usize {
        self.k.len()
    }

    pub fn is_empty(&self) -> bool {
        self.k.is_empty()
    }

    /// `(1/2)∫dk/2π f(k)` over [-Λ, Λ].
    pub fn half_measure(&self, f: impl Fn(usize) -> f64) -> f64 {
        self.weights.iter().enumerate().map(|(j, w)| w * f(j)).sum::<f64>() / (4.0 * PI)
    }

    pub fn z(&self, g: &[f64]) -> f64 {
        (-self.half_measure(|j| g[j])).exp()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianState {
    pub grid: KGrid,
    pub g: Vec<f64>,
    pub sigma: Vec<f64>,
    pub t: f64,
}

impl GaussianState {
    /// Stationary state with gap `delta`: `G_k = (K/2)/√(k²+Δ²)`, `Σ_k = 0`.
    pub fn stationary(params: &ModelParams, grid: KGrid, delta: f64) -> Self {
        let g = grid.k.iter().map(|k| 0.5 * params.k / (k * k + delta * delta).sqrt()).collect();
        let n = grid.len();
        Self { grid, g, sigma: vec![0.0; n], t: 0.0 }
    }

    pub fn z(&self) -> f64 {
        self.grid.z(&self.g)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GapAdvisory {
    /// `K ≥ 8π`: the cosine is irrelevant and the gap closes.
    CosineIrrelevant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapSolution {
    pub delta0: f64,
    pub z0: f64,
    pub converged: bool,
    pub iterations: usize,
    /// `ln(Δ0² / (g0 K Z0))` at the returned gap.
    pub residual: f64,
    pub advisory: Option<GapAdvisory>,
}

/// Gap equation residual `ln Δ² − ln(g0 K) + (1/2)∫dk/2π (K/2)/√(k²+Δ²)`,
/// increasing in Δ for K < 8π.
fn gap_residual(params: &ModelParams, grid: &KGrid, delta: f64) -> f64 {
    let s = grid.half_measure(|j| 0.5 * params.k / (grid.k[j] * grid.k[j] + delta * delta).sqrt());
    2.0 * delta.ln() - (params.g0 * params.k).ln() + s
}

/// Solve `Δ² = g0 K Z(Δ)` by bisection on `ln Δ`, using the same quadrature
/// as the dynamics so the initial state is stationary to rounding.
pub fn solve_gap(params: &ModelParams, grid: &KGrid) -> GapSolution {
    let zero_gap = |advisory| {
        let z0 = GaussianState::stationary(params, grid.clone(), 0.0).z();
        GapSolution { delta0: 0.0, z0, converged: true, iterations: 0, residual: 0.0, advisory }
    };
    if params.g0 == 0.0 {
        return zero_gap(None);
    }
    if params.k >= K_CRITICAL {
        return zero_gap(Some(GapAdvisory::CosineIrrelevant));
    }
    // Z <= 1 bounds the gap from above.
    let mut hi = (params.g0 * params.k).sqrt().ln();
    let mut lo = hi - 1.0;
    while gap_residual(params, grid, lo.exp()) > 0.0 {
        lo -= 2.0 * (hi - lo);
        if lo < -700.0 {
            break;
        }
    }
    let mut mid = hi;
    let mut res = gap_residual(params, grid, mid.exp());
    let mut iterations = 0;
    while iterations < GAP_MAX_ITERATIONS && res.abs() > 1e-14 {
        iterations += 1;
        mid = 0.5 * (lo + hi);
        res = gap_residual(params, grid, mid.exp());
        if res > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= f64::EPSILON * mid.abs().max(1.0) {
            break;
        }
    }
    let delta0 = mid.exp();
    let z0 = GaussianState::stationary(params, grid.clone(), delta0).z();
    GapSolution { delta0, z0, converged: res.abs() <= GAP_RESIDUAL_TOL, iterations, residual: res, advisory: None }
}

/// Gap-initialised state on the default grid.
pub fn initial_state(params: &ModelParams, n_k: usize) -> Result<(GaussianState, GapSolution)> {
    params.validate()?;
    let grid = KGrid::uniform(params.lambda, n_k)?;
    let gap = solve_gap(params, &grid);
    Ok((GaussianState::stationary(params, grid, gap.delta0), gap))
}

/// Time derivatives of `(G, Σ)` packed as one vector.
pub fn rhs(params: &ModelParams, grid: &KGrid, t: f64, y: &[f64], dy: &mut [f64]) {
    let n = grid.len();
    let (g, sigma) = y.split_at(n);
    let z = grid.z(g);
    let drive = 0.5 * z * params.drive(t);
    let kk = params.k;
    for j in 0..n {
        let k = grid.k[j];
        dy[j] = 4.0 * kk * g[j] * sigma[j];
        dy[n + j] = kk / (8.0 * g[j] * g[j]) - 2.0 * kk * sigma[j] * sigma[j] - k * k / (2.0 * kk) - drive;
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvolveOptions {
    pub tolerances: Tolerances,
    /// Recorded samples per drive period (at least one).
    pub samples_per_period: usize,
    /// Stop once `Z/Z(0)` drops below this value.
    pub stop_below: Option<f64>,
    pub keep_snapshots: bool,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self {
            tolerances: Tolerances { rtol: 1e-8, atol: 1e-12, h_max: f64::INFINITY },
            samples_per_period: 1,
            stop_below: None,
            keep_snapshots: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub z: f64,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub z0: f64,
    /// Samples on the fixed output grid, starting with `t = 0`.
    pub samples: Vec<Sample>,
    /// First time `Z/Z(0)` fell below `stop_below`, interpolated between steps.
    pub crossing: Option<f64>,
    /// Time at which a width left `[G_MIN, G_MAX]` or the integrator failed.
    pub diverged_at: Option<f64>,
    pub snapshots: Vec<(f64, Vec<f64>)>,
    pub final_state: GaussianState,
    pub steps: usize,
}

impl Trajectory {
    pub fn final_ratio(&self) -> f64 {
        self.final_state.z() / self.z0
    }
}

/// Integrate from `state` to `t_final`.
pub fn evolve(state: GaussianState, params: &ModelParams, t_final: f64, opts: &EvolveOptions) -> Result<Trajectory> {
    if state.g.iter().any(|&g| !(g > 0.0)) {
        return Err(Error::InvalidParams("initial widths must be positive".into()));
    }
    let grid = state.grid.clone();
    let n = grid.len();
    let z0 = state.z();
    let mut y: Vec<f64> = state.g.iter().chain(&state.sigma).copied().collect();
    let mut t = state.t;
    let dt_sample = params.period() / opts.samples_per_period.max(1) as f64;
    let mut tol = opts.tolerances;
    tol.h_max = tol.h_max.min(dt_sample);
    let mut dp = DormandPrince::new(2 * n, tol);
    let mut f = |t: f64, y: &[f64], dy: &mut [f64]| rhs(params, &grid, t, y, dy);

    let mut samples = vec![Sample { t, z: z0 }];
    let mut snapshots = Vec::new();
    if opts.keep_snapshots {
        snapshots.push((t, state.g.clone()));
    }
    let mut crossing = None;
    let mut diverged_at = None;
    let mut prev = (t, 1.0);
    let t_start = t;
    let mut segment = 0usize;
    while t < t_final && crossing.is_none() && diverged_at.is_none() {
        segment += 1;
        let target = (t_start + segment as f64 * dt_sample).min(t_final);
        let mut observer = |ts: f64, ys: &[f64]| {
            let g = &ys[..n];
            if g.iter().any(|&v| !(v.is_finite() && (G_MIN..=G_MAX).contains(&v))) {
                diverged_at = Some(ts);
                return false;
            }
            let ratio = grid.z(g) / z0;
            if let Some(level) = opts.stop_below {
                if ratio < level {
                    let (tp, rp) = prev;
                    crossing = Some(tp + (level - rp) * (ts - tp) / (ratio - rp));
                    return false;
                }
            }
            prev = (ts, ratio);
            true
        };
        match dp.integrate(&mut f, &mut t, &mut y, target, &mut observer) {
            Ok(true) => {
                samples.push(Sample { t, z: grid.z(&y[..n]) });
                if opts.keep_snapshots {
                    snapshots.push((t, y[..n].to_vec()));
                }
            }
            Ok(false) => {}
            Err(_) => diverged_at = Some(t),
        }
    }
    let (g, sigma) = y.split_at(n);
    let final_state = GaussianState { grid: state.grid, g: g.to_vec(), sigma: sigma.to_vec(), t };
    Ok(Trajectory { z0, samples, crossing, diverged_at, snapshots, final_state, steps: dp.accepted })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub stable: bool,
    pub z_ratio: f64,
    pub diverged: bool,
}

/// Stable iff `Z(T_f)/Z(0) > 0.95` with no divergence, `T_f = periods · 2π/γ`.
/// The run stops as unstable once `Z/Z(0)` falls below [`DECAY_THRESHOLD`];
/// `z_ratio` is then the value at that time.
pub fn classify(params: &ModelParams, periods: f64) -> Result<Classification> {
    classify_with(params, periods, DEFAULT_K_POINTS, &EvolveOptions::default())
}

pub fn classify_with(params: &ModelParams, periods: f64, n_k: usize, opts: &EvolveOptions) -> Result<Classification> {
    let (state, _) = initial_state(params, n_k)?;
    let opts = EvolveOptions { stop_below: Some(opts.stop_below.unwrap_or(DECAY_THRESHOLD)), ..*opts };
    let traj = evolve(state, params, periods * params.period(), &opts)?;
    let z_ratio = traj.final_ratio();
    let diverged = traj.diverged_at.is_some();
    let stable = !diverged && traj.crossing.is_none() && z_ratio > STABILITY_THRESHOLD;
    Ok(Classification { stable, z_ratio, diverged })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum DecayTime {
    /// `Z/Z(0)` reached `10⁻³` after this many drive periods.
    Decayed(f64),
    /// Integration aborted before the threshold was reached.
    Diverged(f64),
    ExceedsMax,
}

impl DecayTime {
    pub fn periods(&self) -> Option<f64> {
        match *self {
            DecayTime::Decayed(p) | DecayTime::Diverged(p) => Some(p),
            DecayTime::ExceedsMax => None,
        }
    }
}

pub fn decay_time(params: &ModelParams, max_periods: f64) -> Result<DecayTime> {
    decay_time_with(params, max_periods, DEFAULT_K_POINTS, Tolerances::default())
}

pub fn decay_time_with(params: &ModelParams, max_periods: f64, n_k: usize, tolerances: Tolerances) -> Result<DecayTime> {
    let (state, _) = initial_state(params, n_k)?;
    let opts = EvolveOptions { tolerances, stop_below: Some(DECAY_THRESHOLD), ..Default::default() };
    let period = params.period();
    let traj = evolve(state, params, max_periods * period, &opts)?;
    Ok(match (traj.crossing, traj.diverged_at) {
        (Some(t), _) => DecayTime::Decayed(t / period),
        (None, Some(t)) => DecayTime::Diverged(t / period),
        (None, None) => DecayTime::ExceedsMax,
    })
}

/// Settings shared by every cell of a variational diagram.
#[derive(Debug, Clone)]
pub struct CellOptions {
    pub periods: f64,
    pub n_k: usize,
    pub evolve: EvolveOptions,
    /// Also measure the decay time, up to this many periods.
    pub decay_periods: Option<f64>,
}

impl Default for CellOptions {
    fn default() -> Self {
        Self { periods: DEFAULT_CLASSIFY_PERIODS, n_k: DEFAULT_K_POINTS, evolve: EvolveOptions::default(), decay_periods: None }
    }
}

/// Variational verdict next to the quadratic one at a reduced point.
pub fn variational_cell(k: f64, r: Reduced, opts: &CellOptions, solver: &ChainSolver) -> CellRecord {
    let run = || -> Result<CellRecord> {
        let params = ModelParams::from_reduced(k, r)?;
        let quadratic = solver.cell(r)?;
        let c = classify_with(&params, opts.periods, opts.n_k, &opts.evolve)?;
        let tau_d_over_t = match opts.decay_periods {
            Some(max) => decay_time_with(&params, max, opts.n_k, opts.evolve.tolerances)?.periods(),
            None => None,
        };
        Ok(CellRecord::Variational { stable: c.stable, z_ratio: c.z_ratio, diverged: c.diverged, tau_d_over_t, quadratic })
    };
    run().unwrap_or_else(|e| CellRecord::Failed { failed_method: Method::Variational, message: e.to_string() })
}
