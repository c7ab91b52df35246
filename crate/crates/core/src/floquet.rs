//! Floquet analysis of Hill's equation `u'' + (a + b cos(gamma t)) u = 0`.
//!
//! The one-period flow of `(u, u')` is the monodromy matrix `M`; solutions are
//! bounded iff `|tr M| <= 2`. Linearising the driven pendulum about `phi = 0`
//! gives `(a, b) = (g0, g1)`, about `phi = pi` gives `(-g0, -g1)`.
//!
//! The default propagator is the fourth-order Magnus integrator with
//! two-point Gauss sampling. Each step is the exponential of a traceless
//! 2x2 matrix, so every step lies in SL(2) and constant-coefficient segments
//! are integrated exactly. Classical RK4 is kept as an independent route.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diagram::{grid_points, Axis, CellRecord, PhaseDiagram};
use crate::error::{Error, Result};
use crate::params::ModelParams;

/// `|tr M| <= 2 + STABILITY_TOLERANCE` counts as stable, so marginal
/// (undriven, band-edge) cases classify stable.
pub const STABILITY_TOLERANCE: f64 = 1e-9;
pub const DEFAULT_STEPS_PER_PERIOD: usize = 4096;
pub const MIN_STEPS_PER_PERIOD: usize = 256;
/// Relative accuracy of verdict bisection.
pub const BISECTION_REL_TOL: f64 = 1e-4;

/// Coefficients of one Hill equation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HillParams {
    pub a: f64,
    pub b: f64,
    pub gamma: f64,
}

impl HillParams {
    pub fn new(a: f64, b: f64, gamma: f64) -> Result<Self> {
        if !(gamma > 0.0) || !gamma.is_finite() {
            return Err(Error::InvalidParams(format!("gamma must be positive, got {gamma}")));
        }
        if !a.is_finite() || !b.is_finite() {
            return Err(Error::InvalidParams(format!("non-finite Hill coefficients a = {a}, b = {b}")));
        }
        Ok(Self { a, b, gamma })
    }

    pub fn period(&self) -> f64 {
        2.0 * PI / self.gamma
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scheme {
    /// Fourth-order Magnus (exponential) integrator.
    Magnus4,
    /// Classical fourth-order Runge-Kutta.
    Rk4,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonodromyResult {
    /// Row-major one-period flow of `(u, u')`.
    pub m: [[f64; 2]; 2],
    pub trace: f64,
    /// Product of the per-step determinants.
    pub det: f64,
    pub stable: bool,
    /// Per-period log of the spectral radius; zero when stable.
    pub growth_exponent: f64,
}

impl MonodromyResult {
    fn from_matrix(m: [[f64; 2]; 2], det: f64) -> Self {
        let trace = m[0][0] + m[1][1];
        let stable = trace.abs() <= 2.0 + STABILITY_TOLERANCE;
        Self {
            m,
            trace,
            det,
            stable,
            growth_exponent: growth_exponent(trace),
        }
    }

    /// Determinant evaluated from the stored entries. Loses accuracy as
    /// `|M|^2 * eps` once the flow is strongly hyperbolic.
    pub fn direct_det(&self) -> f64 {
        let [[a, b], [c, d]] = self.m;
        // Kahan's 2x2 determinant.
        let w = b * c;
        let e = (-b).mul_add(c, w);
        let f = a.mul_add(d, -w);
        f + e
    }
}

/// `ln` of the larger Floquet multiplier for an SL(2) matrix of this trace.
pub fn growth_exponent(trace: f64) -> f64 {
    let t = trace.abs();
    if !t.is_finite() {
        return f64::INFINITY;
    }
    if t <= 2.0 + STABILITY_TOLERANCE {
        return 0.0;
    }
    ((t + (t * t - 4.0).sqrt()) / 2.0).ln()
}

/// Drive phase samples `cos(gamma t)` at the two Gauss points of every step.
/// Independent of `gamma`, so one table serves every mode and cell that
/// share a step count.
#[derive(Debug, Clone)]
pub struct DriveTable {
    steps: usize,
    gauss: Vec<(f64, f64)>,
}

impl DriveTable {
    pub fn new(steps: usize) -> Result<Self> {
        if steps < MIN_STEPS_PER_PERIOD {
            return Err(Error::Config(format!(
                "steps_per_period must be at least {MIN_STEPS_PER_PERIOD}, got {steps}"
            )));
        }
        let off = 3f64.sqrt() / 6.0;
        let dphi = 2.0 * PI / steps as f64;
        let gauss = (0..steps)
            .map(|n| {
                let base = n as f64;
                (
                    ((base + 0.5 - off) * dphi).cos(),
                    ((base + 0.5 + off) * dphi).cos(),
                )
            })
            .collect();
        Ok(Self { steps, gauss })
    }

    pub fn steps(&self) -> usize {
        self.steps
    }
}

/// Monodromy with the default Magnus scheme.
pub fn monodromy(h: &HillParams, steps_per_period: usize) -> Result<MonodromyResult> {
    let table = DriveTable::new(steps_per_period)?;
    monodromy_with_table(h, &table)
}

pub fn monodromy_with(h: &HillParams, steps_per_period: usize, scheme: Scheme) -> Result<MonodromyResult> {
    match scheme {
        Scheme::Magnus4 => monodromy(h, steps_per_period),
        Scheme::Rk4 => monodromy_rk4(h, steps_per_period),
    }
}

/// Magnus propagation reusing a precomputed drive table.
pub fn monodromy_with_table(h: &HillParams, table: &DriveTable) -> Result<MonodromyResult> {
    let dt = h.period() / table.steps as f64;
    let commutator = 3f64.sqrt() * dt * dt / 12.0;
    let mut y = [[1.0, 0.0], [0.0, 1.0]];
    let mut det = 1.0;
    for (n, &(c1, c2)) in table.gauss.iter().enumerate() {
        let w1 = h.b.mul_add(c1, h.a);
        let w2 = h.b.mul_add(c2, h.a);
        let wbar = 0.5 * (w1 + w2);
        // Omega = [[p, dt], [-dt wbar, -p]], traceless.
        let p = commutator * (w2 - w1);
        let s2 = p * p - dt * dt * wbar;
        let (c, s) = cosh_sinhc(s2);
        let e = [[c + s * p, s * dt], [-s * dt * wbar, c - s * p]];
        det *= e[0][0] * e[1][1] - e[0][1] * e[1][0];
        y = mat_mul(&e, &y);
        if n % 256 == 255 && !all_finite(&y) {
            return Err(Error::NumericOverflow { t: (n + 1) as f64 * dt });
        }
    }
    if !all_finite(&y) {
        return Err(Error::NumericOverflow { t: h.period() });
    }
    Ok(MonodromyResult::from_matrix(y, det))
}

fn monodromy_rk4(h: &HillParams, steps: usize) -> Result<MonodromyResult> {
    if steps < MIN_STEPS_PER_PERIOD {
        return Err(Error::Config(format!(
            "steps_per_period must be at least {MIN_STEPS_PER_PERIOD}, got {steps}"
        )));
    }
    let dt = h.period() / steps as f64;
    let coef = |t: f64| h.a + h.b * (h.gamma * t).cos();
    // Flow of (u, u') with generator [[0, 1], [-w, 0]].
    let rhs = |w: f64, y: &[[f64; 2]; 2]| -> [[f64; 2]; 2] {
        [[y[1][0], y[1][1]], [-w * y[0][0], -w * y[0][1]]]
    };
    let axpy = |y: &[[f64; 2]; 2], k: &[[f64; 2]; 2], s: f64| -> [[f64; 2]; 2] {
        [
            [y[0][0] + s * k[0][0], y[0][1] + s * k[0][1]],
            [y[1][0] + s * k[1][0], y[1][1] + s * k[1][1]],
        ]
    };
    let mut y = [[1.0, 0.0], [0.0, 1.0]];
    let mut det = 1.0;
    for n in 0..steps {
        let t = n as f64 * dt;
        let (w0, wm, w1) = (coef(t), coef(t + 0.5 * dt), coef(t + dt));
        let k1 = rhs(w0, &y);
        let k2 = rhs(wm, &axpy(&y, &k1, 0.5 * dt));
        let k3 = rhs(wm, &axpy(&y, &k2, 0.5 * dt));
        let k4 = rhs(w1, &axpy(&y, &k3, dt));
        let mut next = y;
        for i in 0..2 {
            for j in 0..2 {
                next[i][j] += dt / 6.0 * (k1[i][j] + 2.0 * k2[i][j] + 2.0 * k3[i][j] + k4[i][j]);
            }
        }
        // The step is linear in y; its determinant is det(next) / det(y)
        // but computing it from the step matrix avoids cancellation.
        let step = rk4_step_matrix(w0, wm, w1, dt);
        det *= step[0][0] * step[1][1] - step[0][1] * step[1][0];
        y = next;
        if n % 256 == 255 && !all_finite(&y) {
            return Err(Error::NumericOverflow { t: (n + 1) as f64 * dt });
        }
    }
    if !all_finite(&y) {
        return Err(Error::NumericOverflow { t: h.period() });
    }
    Ok(MonodromyResult::from_matrix(y, det))
}

fn rk4_step_matrix(w0: f64, wm: f64, w1: f64, dt: f64) -> [[f64; 2]; 2] {
    let gen = |w: f64| [[0.0, 1.0], [-w, 0.0]];
    let id = [[1.0, 0.0], [0.0, 1.0]];
    let a0 = gen(w0);
    let am = gen(wm);
    let a1 = gen(w1);
    let k1 = a0;
    let k2 = mat_mul(&am, &mat_add(&id, &mat_scale(&k1, 0.5 * dt)));
    let k3 = mat_mul(&am, &mat_add(&id, &mat_scale(&k2, 0.5 * dt)));
    let k4 = mat_mul(&a1, &mat_add(&id, &mat_scale(&k3, dt)));
    let sum = mat_add(&mat_add(&k1, &mat_scale(&k2, 2.0)), &mat_add(&mat_scale(&k3, 2.0), &k4));
    mat_add(&id, &mat_scale(&sum, dt / 6.0))
}

/// `(cosh s, sinh s / s)` as functions of `s^2`, valid for either sign.
#[inline]
fn cosh_sinhc(s2: f64) -> (f64, f64) {
    if s2.abs() < 0.1 {
        // Truncation error below 1e-18 for |s^2| < 0.1.
        let mut c = 1.0;
        let mut s = 1.0;
        let mut tc = 1.0;
        let mut ts = 1.0;
        for n in 1..=7 {
            let n = n as f64;
            tc *= s2 / ((2.0 * n - 1.0) * (2.0 * n));
            ts *= s2 / ((2.0 * n) * (2.0 * n + 1.0));
            c += tc;
            s += ts;
        }
        (c, s)
    } else if s2 > 0.0 {
        let s = s2.sqrt();
        (s.cosh(), s.sinh() / s)
    } else {
        let s = (-s2).sqrt();
        (s.cos(), s.sin() / s)
    }
}

#[inline]
fn mat_mul(a: &[[f64; 2]; 2], b: &[[f64; 2]; 2]) -> [[f64; 2]; 2] {
    [
        [a[0][0] * b[0][0] + a[0][1] * b[1][0], a[0][0] * b[0][1] + a[0][1] * b[1][1]],
        [a[1][0] * b[0][0] + a[1][1] * b[1][0], a[1][0] * b[0][1] + a[1][1] * b[1][1]],
    ]
}

fn mat_add(a: &[[f64; 2]; 2], b: &[[f64; 2]; 2]) -> [[f64; 2]; 2] {
    [[a[0][0] + b[0][0], a[0][1] + b[0][1]], [a[1][0] + b[1][0], a[1][1] + b[1][1]]]
}

fn mat_scale(a: &[[f64; 2]; 2], s: f64) -> [[f64; 2]; 2] {
    [[a[0][0] * s, a[0][1] * s], [a[1][0] * s, a[1][1] * s]]
}

fn all_finite(y: &[[f64; 2]; 2]) -> bool {
    y.iter().flatten().all(|v| v.is_finite())
}

/// Map an overflowing integration to an unstable verdict with infinite growth.
pub fn or_unstable(r: Result<MonodromyResult>) -> Result<MonodromyResult> {
    match r {
        Err(Error::NumericOverflow { .. }) => Ok(MonodromyResult {
            m: [[f64::INFINITY, f64::INFINITY], [f64::INFINITY, f64::INFINITY]],
            trace: f64::INFINITY,
            det: f64::NAN,
            stable: false,
            growth_exponent: f64::INFINITY,
        }),
        other => other,
    }
}

/// Floquet verdicts of the two fixed points of the driven pendulum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedPointStability {
    /// `phi = 0`.
    pub lower: MonodromyResult,
    /// `phi = pi`.
    pub upper: MonodromyResult,
}

impl FixedPointStability {
    pub fn verdicts(&self) -> (bool, bool) {
        (self.lower.stable, self.upper.stable)
    }
}

/// Linear stability of `phi = 0` and `phi = pi` for `H = p^2/2 - g(t) cos(phi)`.
/// Only `g0`, `g1` and `gamma` enter.
pub fn pendulum_fixed_point_stability(params: &ModelParams) -> Result<FixedPointStability> {
    let table = DriveTable::new(DEFAULT_STEPS_PER_PERIOD)?;
    pendulum_with_table(params.g0, params.g1, params.gamma, &table)
}

fn pendulum_with_table(g0: f64, g1: f64, gamma: f64, table: &DriveTable) -> Result<FixedPointStability> {
    let lower = HillParams::new(g0, g1, gamma)?;
    let upper = HillParams::new(-g0, -g1, gamma)?;
    Ok(FixedPointStability {
        lower: or_unstable(monodromy_with_table(&lower, table))?,
        upper: or_unstable(monodromy_with_table(&upper, table))?,
    })
}

/// Fixed-point stability over `g0 / gamma^2` (x) and `g1 / gamma^2` (y).
pub fn pendulum_diagram(g0_axis: Axis, g1_axis: Axis) -> Result<PhaseDiagram> {
    let table = DriveTable::new(DEFAULT_STEPS_PER_PERIOD)?;
    let cells = grid_points(&g0_axis, &g1_axis)
        .par_iter()
        .map(|&(g0, g1)| pendulum_cell(g0, g1, &table))
        .collect();
    PhaseDiagram::new(g0_axis, g1_axis, cells)
}

/// One pendulum diagram cell at `g0 / gamma^2`, `g1 / gamma^2`.
pub fn pendulum_cell(g0: f64, g1: f64, table: &DriveTable) -> CellRecord {
    match pendulum_with_table(g0, g1, 1.0, table) {
        Ok(fp) => CellRecord::Pendulum {
            lower_stable: fp.lower.stable,
            upper_stable: fp.upper.stable,
            lower_growth: fp.lower.growth_exponent,
            upper_growth: fp.upper.growth_exponent,
        },
        Err(e) => CellRecord::Failed {
            failed_method: crate::diagram::Method::Pendulum,
            message: e.to_string(),
        },
    }
}

/// Locate the point in `[lo, hi]` where a boolean verdict flips, to relative
/// accuracy `rel_tol` of the bracket magnitude. The verdicts at the two ends
/// must differ.
pub fn bisect_verdict<F>(mut verdict: F, mut lo: f64, mut hi: f64, rel_tol: f64) -> Result<f64>
where
    F: FnMut(f64) -> Result<bool>,
{
    let v_lo = verdict(lo)?;
    let v_hi = verdict(hi)?;
    if v_lo == v_hi {
        return Err(Error::NoTransition);
    }
    let scale = lo.abs().max(hi.abs()).max(f64::MIN_POSITIVE);
    while (hi - lo).abs() > rel_tol * scale {
        let mid = 0.5 * (lo + hi);
        if verdict(mid)? == v_lo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn hill(a: f64, b: f64) -> HillParams {
        HillParams::new(a, b, 1.0).unwrap()
    }

    #[test]
    fn undriven_oscillator_closed_form() {
        for &gamma in &[1.0, 2.5] {
            let w = 0.37 * gamma;
            let h = HillParams::new(w * w, 0.0, gamma).unwrap();
            let r = monodromy(&h, DEFAULT_STEPS_PER_PERIOD).unwrap();
            let t = h.period();
            assert!((r.trace - 2.0 * (w * t).cos()).abs() < 1e-12);
            assert!((r.det - 1.0).abs() < 1e-12);
            assert!((r.m[0][1] - (w * t).sin() / w).abs() < 1e-12);
            assert!(r.stable);
            assert_eq!(r.growth_exponent, 0.0);
        }
    }

    #[test]
    fn free_particle_is_a_shear() {
        let gamma = 3.0;
        let h = HillParams::new(0.0, 0.0, gamma).unwrap();
        let r = monodromy(&h, DEFAULT_STEPS_PER_PERIOD).unwrap();
        let t = h.period();
        assert!((r.m[0][0] - 1.0).abs() < 1e-13);
        assert!((r.m[0][1] - t).abs() < 1e-12);
        assert!(r.m[1][0].abs() < 1e-13);
        assert!((r.trace - 2.0).abs() < 1e-12);
        assert!(r.stable);
    }

    #[test]
    fn inside_first_resonance_is_unstable() {
        // 2b = 0.3 > |1 - 4a| = 0.2
        let r = monodromy(&hill(0.2, 0.15), DEFAULT_STEPS_PER_PERIOD).unwrap();
        assert!(!r.stable);
        assert!(r.growth_exponent > 0.0);
    }

    #[test]
    fn schemes_agree() {
        for &(a, b) in &[(0.2, 0.15), (1.3, -0.7), (-0.4, 2.0), (0.05, 0.45)] {
            let m = monodromy_with(&hill(a, b), 4096, Scheme::Magnus4).unwrap();
            let r = monodromy_with(&hill(a, b), 4096, Scheme::Rk4).unwrap();
            let scale = m.trace.abs().max(1.0);
            assert!((m.trace - r.trace).abs() < 1e-9 * scale, "{a} {b}: {} vs {}", m.trace, r.trace);
        }
    }

    #[test]
    fn rejects_coarse_step_counts() {
        assert!(monodromy(&hill(0.1, 0.1), 128).is_err());
        assert!(monodromy_with(&hill(0.1, 0.1), 100, Scheme::Rk4).is_err());
    }

    #[test]
    fn overflow_maps_to_unstable_sentinel() {
        let r = or_unstable(monodromy(&hill(-1e6, 0.0), 256)).unwrap();
        assert!(!r.stable);
        assert_eq!(r.growth_exponent, f64::INFINITY);
    }

    #[test]
    fn g0_zero_extrema_equivalent_below_threshold() {
        let p = ModelParams::new(1.0, 0.0, 0.3, 1.0, 0.1).unwrap();
        assert_eq!(pendulum_fixed_point_stability(&p).unwrap().verdicts(), (true, true));
        let p = ModelParams::new(1.0, 0.0, 0.6, 1.0, 0.1).unwrap();
        assert_eq!(pendulum_fixed_point_stability(&p).unwrap().verdicts(), (false, false));
    }

    #[test]
    fn inverted_pendulum_follows_averaged_criterion() {
        // Averaging over the fast drive stabilises phi = pi when g1^2 > 2 g0 gamma^2.
        let gamma = 1.0;
        let stable = ModelParams::new(1.0, 0.05, 0.4, gamma, 0.1).unwrap();
        assert!(pendulum_fixed_point_stability(&stable).unwrap().upper.stable);
        let unstable = ModelParams::new(1.0, 0.05, 0.25, gamma, 0.1).unwrap();
        assert!(!pendulum_fixed_point_stability(&unstable).unwrap().upper.stable);
        // Near the averaged threshold at small g0 the Floquet edge sits close by.
        let g0 = 0.01;
        let edge = bisect_verdict(
            |g1| {
                let p = ModelParams::new(1.0, g0, g1, gamma, 0.1)?;
                Ok(pendulum_fixed_point_stability(&p)?.upper.stable)
            },
            0.05,
            0.3,
            1e-4,
        )
        .unwrap();
        let averaged = (2.0 * g0).sqrt();
        assert!((edge - averaged).abs() / averaged < 0.1, "edge {edge} vs {averaged}");
    }

    #[test]
    fn diagram_reference_cells() {
        let table = DriveTable::new(DEFAULT_STEPS_PER_PERIOD).unwrap();
        let lower = |g0, g1| match pendulum_cell(g0, g1, &table) {
            CellRecord::Pendulum { lower_stable, upper_stable, .. } => (lower_stable, upper_stable),
            _ => unreachable!(),
        };
        // Large-g0 island: 2 g1 < 4 g0 - 1.
        assert!(lower(0.3, 0.01).0);
        // Resonance centre.
        assert!(!lower(0.25, 0.2).0);
        assert_eq!(lower(0.0, 0.0), (true, true));
    }

    #[test]
    fn diagram_has_requested_shape() {
        let x = Axis::linspace("g0_over_gamma2", 0.0, 0.6, 5).unwrap();
        let y = Axis::linspace("g1_over_gamma2", 0.0, 1.0, 4).unwrap();
        let d = pendulum_diagram(x, y).unwrap();
        assert_eq!(d.cells.len(), 20);
        assert!(d.cells.iter().all(|c| c.method() == crate::diagram::Method::Pendulum));
    }

    #[test]
    fn bisection_requires_a_sign_change() {
        assert_eq!(bisect_verdict(|_| Ok(true), 0.0, 1.0, 1e-4), Err(Error::NoTransition));
        let x = bisect_verdict(|v| Ok(v < 0.3), 0.0, 1.0, 1e-6).unwrap();
        assert!((x - 0.3).abs() < 1e-6);
    }

    #[test]
    fn convergence_under_step_doubling() {
        for &(a, b) in &[(0.3, 0.2), (2.0, 1.5), (-1.0, 3.0), (4.5, -4.0)] {
            let r1 = monodromy(&hill(a, b), 4096).unwrap();
            let r2 = monodromy(&hill(a, b), 8192).unwrap();
            assert!((r1.trace - r2.trace).abs() < 1e-6, "{a} {b}: {} vs {}", r1.trace, r2.trace);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn determinant_is_one(a in -5.0..5.0f64, b in -5.0..5.0f64) {
            let r = monodromy(&hill(a, b), DEFAULT_STEPS_PER_PERIOD).unwrap();
            prop_assert!((r.det - 1.0).abs() < 1e-8);
        }

        #[test]
        fn drive_sign_is_a_half_period_shift(a in -5.0..5.0f64, b in -5.0..5.0f64) {
            let p = monodromy(&hill(a, b), DEFAULT_STEPS_PER_PERIOD).unwrap();
            let m = monodromy(&hill(a, -b), DEFAULT_STEPS_PER_PERIOD).unwrap();
            prop_assert!((p.trace - m.trace).abs() < 1e-8, "{} vs {}", p.trace, m.trace);
        }

        #[test]
        fn stable_iff_trace_within_two(a in -2.0..2.0f64, b in -2.0..2.0f64) {
            let r = monodromy(&hill(a, b), 1024).unwrap();
            prop_assert_eq!(r.stable, r.trace.abs() <= 2.0 + STABILITY_TOLERANCE);
            prop_assert_eq!(r.stable, r.growth_exponent == 0.0);
        }
    }
}
