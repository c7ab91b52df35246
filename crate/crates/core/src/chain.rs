//! Quadratic expansion of the driven chain about `phi = 0`.
//!
//! Expanding `cos(phi)` to second order decouples the momentum modes into
//! driven oscillators `phi_q'' + (q^2 + K g0 + K g1 cos(gamma t)) phi_q = 0`.
//! The chain is stable iff every mode's monodromy is.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diagram::{grid_points, Axis, CellRecord, Method, PhaseDiagram, QuadraticCell};
use crate::error::{Error, Result};
use crate::floquet::{monodromy_with_table, or_unstable, DriveTable, HillParams, MonodromyResult, DEFAULT_STEPS_PER_PERIOD};
use crate::params::{ModelParams, Reduced};

pub const DEFAULT_MODES: usize = 128;
pub const MIN_MODES: usize = 32;

/// Momenta sampled for the per-mode analysis, strictly increasing and ending
/// exactly at the cutoff.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeGrid {
    pub q_values: Vec<f64>,
}

impl ModeGrid {
    /// `n_modes` uniform momenta in `(0, Lambda]`. The gapped `q = 0` mode is
    /// prepended when `g0 > 0`; at `g0 = 0` it is a free, marginal mode and
    /// is left out.
    pub fn uniform(params: &ModelParams, n_modes: usize) -> Self {
        let lambda = params.lambda;
        let mut q_values = Vec::with_capacity(n_modes + 1);
        if params.g0 > 0.0 {
            q_values.push(0.0);
        }
        q_values.extend((1..=n_modes).map(|j| {
            if j == n_modes {
                lambda
            } else {
                lambda * j as f64 / n_modes as f64
            }
        }));
        Self { q_values }
    }

    pub fn n_modes(&self) -> usize {
        self.q_values.len()
    }
}

/// Monodromy of a single mode.
pub fn mode_stability(params: &ModelParams, q: f64) -> Result<MonodromyResult> {
    let table = DriveTable::new(DEFAULT_STEPS_PER_PERIOD)?;
    mode_with_table(params, q, &table)
}

fn mode_with_table(params: &ModelParams, q: f64, table: &DriveTable) -> Result<MonodromyResult> {
    if !(0.0..=params.lambda).contains(&q) {
        return Err(Error::InvalidParams(format!("mode q = {q} outside [0, {}]", params.lambda)));
    }
    let h = HillParams::new(q * q + params.k * params.g0, params.k * params.g1, params.gamma)?;
    or_unstable(monodromy_with_table(&h, table))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainVerdict {
    pub stable: bool,
    /// Largest per-period growth exponent over the modes.
    pub growth_exponent: f64,
    /// Momentum of the most unstable mode, if any.
    pub worst_q: Option<f64>,
}

/// Per-mode Floquet verdict over a mode grid.
pub fn chain_stability_exact(params: &ModelParams, grid: &ModeGrid) -> Result<ChainVerdict> {
    let table = DriveTable::new(DEFAULT_STEPS_PER_PERIOD)?;
    chain_with_table(params, grid, &table)
}

pub fn chain_with_table(params: &ModelParams, grid: &ModeGrid, table: &DriveTable) -> Result<ChainVerdict> {
    let n_positive = grid.q_values.iter().filter(|&&q| q > 0.0).count();
    if n_positive < MIN_MODES {
        return Err(Error::Config(format!(
            "mode grid too coarse: {n_positive} modes, need at least {MIN_MODES}"
        )));
    }
    let p = params.in_drive_units();
    let scale = params.gamma;
    let mut stable = true;
    let mut worst: Option<(f64, f64)> = None;
    for &q in &grid.q_values {
        let r = mode_with_table(&p, q / scale, table)?;
        if !r.stable {
            stable = false;
            if worst.is_none_or(|(g, _)| r.growth_exponent > g) {
                worst = Some((r.growth_exponent, q));
            }
        }
    }
    Ok(ChainVerdict {
        stable,
        growth_exponent: worst.map_or(0.0, |(g, _)| g),
        worst_q: worst.map(|(_, q)| q),
    })
}

/// Closed-form first-resonance criterion
/// `2 K g1 < max[gamma^2 - 4 (K g0 + Lambda^2), 4 K g0 - gamma^2]`.
pub fn chain_stability_analytic(params: &ModelParams) -> bool {
    let r = params.reduced();
    analytic_reduced(r)
}

fn analytic_reduced(r: Reduced) -> bool {
    let high_frequency = 1.0 - 4.0 * (r.kg0 + r.lambda * r.lambda);
    let large_gap = 4.0 * r.kg0 - 1.0;
    2.0 * r.kg1 < high_frequency.max(large_gap)
}

/// Which plane of the reduced parameter space a diagram covers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "slice", rename_all = "snake_case")]
pub enum ChainSlice {
    /// x = `K g0 / gamma^2`, y = `K g1 / gamma^2`.
    FixedLambda { lambda_over_gamma: f64 },
    /// x = `Lambda / gamma`, y = `K g1 / gamma^2`.
    FixedKg0 { kg0_over_gamma2: f64 },
}

impl ChainSlice {
    pub fn reduced_at(&self, x: f64, y: f64) -> Reduced {
        match *self {
            ChainSlice::FixedLambda { lambda_over_gamma } => Reduced { kg0: x, kg1: y, lambda: lambda_over_gamma },
            ChainSlice::FixedKg0 { kg0_over_gamma2 } => Reduced { kg0: kg0_over_gamma2, kg1: y, lambda: x },
        }
    }
}

/// Configuration of a quadratic-chain cell evaluation.
#[derive(Debug, Clone)]
pub struct ChainSolver {
    pub n_modes: usize,
    table: DriveTable,
}

impl ChainSolver {
    pub fn new(n_modes: usize, steps_per_period: usize) -> Result<Self> {
        if n_modes < MIN_MODES {
            return Err(Error::Config(format!("n_modes must be at least {MIN_MODES}, got {n_modes}")));
        }
        Ok(Self { n_modes, table: DriveTable::new(steps_per_period)? })
    }

    pub fn steps_per_period(&self) -> usize {
        self.table.steps()
    }

    /// Both classifiers at one reduced point. `K` does not enter the
    /// quadratic problem; the representative uses `K = 1`, `gamma = 1`.
    pub fn cell(&self, r: Reduced) -> Result<QuadraticCell> {
        let params = ModelParams::from_reduced(1.0, r)?;
        let grid = ModeGrid::uniform(&params, self.n_modes);
        let v = chain_with_table(&params, &grid, &self.table)?;
        Ok(QuadraticCell {
            stable_exact: v.stable,
            stable_analytic: analytic_reduced(r),
            growth_exponent: v.growth_exponent,
            worst_q: v.worst_q.unwrap_or(f64::NAN),
        })
    }

    pub fn record(&self, r: Reduced) -> CellRecord {
        match self.cell(r) {
            Ok(c) => CellRecord::Quadratic(c),
            Err(e) => CellRecord::Failed { failed_method: Method::Quadratic, message: e.to_string() },
        }
    }
}

impl Default for ChainSolver {
    fn default() -> Self {
        Self::new(DEFAULT_MODES, DEFAULT_STEPS_PER_PERIOD).expect("default chain solver")
    }
}

/// Exact and analytic verdicts over a plane of reduced parameters.
pub fn chain_diagram(slice: ChainSlice, x: Axis, y: Axis, solver: &ChainSolver) -> Result<PhaseDiagram> {
    let cells = grid_points(&x, &y)
        .par_iter()
        .map(|&(xv, yv)| solver.record(slice.reduced_at(xv, yv)))
        .collect();
    PhaseDiagram::new(x, y, cells)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::floquet::bisect_verdict;

    fn reduced(kg0: f64, kg1: f64, lambda: f64) -> ModelParams {
        ModelParams::from_reduced(1.0, Reduced { kg0, kg1, lambda }).unwrap()
    }

    #[test]
    fn grid_layout() {
        let g = ModeGrid::uniform(&reduced(0.0, 0.1, 0.3), 128);
        assert_eq!(g.n_modes(), 128);
        assert_eq!(*g.q_values.last().unwrap(), 0.3);
        assert!(g.q_values[0] > 0.0);
        assert!(g.q_values.windows(2).all(|w| w[1] > w[0]));
        let g = ModeGrid::uniform(&reduced(0.1, 0.1, 0.3), 128);
        assert_eq!(g.n_modes(), 129);
        assert_eq!(g.q_values[0], 0.0);
    }

    #[test]
    fn undriven_mode_has_closed_form_trace() {
        let p = ModelParams::new(0.8, 0.3, 0.0, 1.5, 0.9).unwrap();
        for &q in &[0.0, 0.4, 0.9] {
            let r = mode_stability(&p, q).unwrap();
            let w = (q * q + p.k * p.g0).sqrt();
            assert!((r.trace - 2.0 * (w * p.period()).cos()).abs() < 1e-11);
            assert!(r.stable);
        }
    }

    #[test]
    fn mode_reference_points() {
        // Deep in the large-frequency lobe: 2 * 0.3 < 1 - 4 * 0.04^2.
        let p = reduced(0.0, 0.3, 0.04);
        assert!(mode_stability(&p, 0.04).unwrap().stable);
        // Resonance centre of the q = 0 mode.
        let p = reduced(0.25, 0.01, 0.1);
        assert!(!mode_stability(&p, 0.0).unwrap().stable);
        assert!(mode_stability(&p, 0.2).is_err());
    }

    #[test]
    fn exact_reference_points() {
        let grid = |p: &ModelParams| ModeGrid::uniform(p, DEFAULT_MODES);
        let p = reduced(0.1, 0.0, 0.2);
        assert!(chain_stability_exact(&p, &grid(&p)).unwrap().stable);
        let p = reduced(0.3, 0.08, 0.2);
        assert!(chain_stability_exact(&p, &grid(&p)).unwrap().stable);
        for &kg1 in &[0.01, 0.2, 0.6] {
            let p = reduced(0.0, kg1, 0.5);
            let v = chain_stability_exact(&p, &grid(&p)).unwrap();
            assert!(!v.stable);
            let q = v.worst_q.unwrap();
            let m = mode_stability(&p, q).unwrap();
            assert!(!m.stable && m.growth_exponent > 0.0);
            assert_eq!(m.growth_exponent, v.growth_exponent);
        }
    }

    #[test]
    fn coarse_grid_is_rejected() {
        let p = reduced(0.1, 0.1, 0.2);
        let g = ModeGrid::uniform(&p, 16);
        assert!(matches!(chain_stability_exact(&p, &g), Err(Error::Config(_))));
    }

    #[test]
    fn analytic_reference_points() {
        assert!(chain_stability_analytic(&reduced(0.1, 0.2, 0.1)));
        assert!(!chain_stability_analytic(&reduced(0.25, 1e-6, 0.1)));
        // g1 = 0: stable iff gamma > 2 sqrt(Lambda^2 + K g0) or gamma < 2 sqrt(K g0).
        for &(kg0, lambda) in &[(0.1, 0.2), (0.2, 0.3), (0.3, 0.1), (0.0, 0.6), (0.24, 0.0001)] {
            let expect = 1.0 > 2.0 * (lambda * lambda + kg0 as f64).sqrt() || 1.0 < 2.0 * (kg0 as f64).sqrt();
            assert_eq!(chain_stability_analytic(&reduced(kg0, 0.0, lambda)), expect, "{kg0} {lambda}");
        }
    }

    #[test]
    fn verdict_depends_only_on_reduced_triple() {
        let base = ModelParams::new(0.7, 0.05, 0.4, 1.3, 0.35).unwrap();
        for &s in &[0.37, 2.9] {
            let other = ModelParams { k: 1.9, ..base.rescaled(s) };
            // Keep K g0 and K g1 fixed while K changes.
            let other = ModelParams { g0: base.k * base.g0 * s * s / other.k, g1: base.k * base.g1 * s * s / other.k, ..other };
            let a = chain_stability_exact(&base, &ModeGrid::uniform(&base, 64)).unwrap();
            let b = chain_stability_exact(&other, &ModeGrid::uniform(&other, 64)).unwrap();
            assert_eq!(a.stable, b.stable);
            assert!((a.growth_exponent - b.growth_exponent).abs() < 1e-9);
        }
    }

    #[test]
    fn first_lobe_is_simply_connected_along_rays() {
        let solver = ChainSolver::new(64, 1024).unwrap();
        for &lambda in &[0.05, 0.2, 0.4] {
            let verdicts: Vec<bool> = (1..=40)
                .map(|i| solver.cell(Reduced { kg0: 0.0, kg1: 0.025 * i as f64, lambda }).unwrap().stable_exact)
                .collect();
            let first_unstable = verdicts.iter().position(|s| !s).unwrap_or(verdicts.len());
            assert!(verdicts[first_unstable..].iter().all(|s| !s), "lambda {lambda}: {verdicts:?}");
        }
    }

    #[test]
    fn vanishing_cutoff_recovers_the_pendulum() {
        let solver = ChainSolver::default();
        let edge = bisect_verdict(
            |kg1| Ok(solver.cell(Reduced { kg0: 0.0, kg1, lambda: 0.005 })?.stable_exact),
            0.3,
            0.6,
            1e-4,
        )
        .unwrap();
        assert!((edge - 0.454).abs() < 0.005, "{edge}");
    }

    #[test]
    fn diagram_carries_both_layers() {
        let solver = ChainSolver::new(32, 256).unwrap();
        let x = Axis::linspace("Kg0_over_gamma2", 0.0, 0.5, 3).unwrap();
        let y = Axis::linspace("Kg1_over_gamma2", 0.0, 0.5, 3).unwrap();
        let d = chain_diagram(ChainSlice::FixedLambda { lambda_over_gamma: 0.1 }, x, y, &solver).unwrap();
        assert_eq!(d.cells.len(), 9);
        match d.cell(0, 0) {
            CellRecord::Quadratic(c) => {
                assert!(c.stable_exact && c.stable_analytic);
                assert!(c.worst_q.is_nan());
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
