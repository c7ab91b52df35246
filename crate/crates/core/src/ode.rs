//! Adaptive Dormand-Prince 5(4) integrator for autonomous-in-form systems
//! `y' = f(t, y)` of moderate size.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
    /// Upper bound on the step size.
    pub h_max: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { rtol: 1e-8, atol: 1e-12, h_max: f64::INFINITY }
    }
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
/// Fifth-order minus embedded fourth-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Stateful stepper; keeps the first-same-as-last stage between steps.
pub struct DormandPrince {
    tol: Tolerances,
    k: [Vec<f64>; 7],
    stage: Vec<f64>,
    y_new: Vec<f64>,
    h: f64,
    fsal_valid: bool,
    pub accepted: usize,
    pub rejected: usize,
}

impl DormandPrince {
    pub fn new(dim: usize, tol: Tolerances) -> Self {
        Self {
            tol,
            k: std::array::from_fn(|_| vec![0.0; dim]),
            stage: vec![0.0; dim],
            y_new: vec![0.0; dim],
            h: 0.0,
            fsal_valid: false,
            accepted: 0,
            rejected: 0,
        }
    }

    /// Advance `y` from `*t` to exactly `t_end`. `on_step(t, y)` runs after
    /// every accepted step; returning `false` stops early.
    pub fn integrate<F, O>(&mut self, f: &mut F, t: &mut f64, y: &mut [f64], t_end: f64, on_step: &mut O) -> Result<bool>
    where
        F: FnMut(f64, &[f64], &mut [f64]),
        O: FnMut(f64, &[f64]) -> bool,
    {
        if !self.fsal_valid {
            f(*t, y, &mut self.k[0]);
            self.fsal_valid = true;
        }
        if self.h == 0.0 {
            self.h = self.initial_step(*t, y, t_end);
        }
        let min_step = 1e-14 * (t_end.abs().max(1.0));
        while *t < t_end {
            let mut h = self.h.min(self.tol.h_max);
            let last = *t + h >= t_end;
            if last {
                h = t_end - *t;
            }
            let err = self.try_step(f, *t, y, h);
            if err.is_finite() && err <= 1.0 {
                *t = if last { t_end } else { *t + h };
                y.copy_from_slice(&self.y_new);
                self.k.swap(0, 6);
                self.accepted += 1;
                let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                // Keep the controller's step when the last step was clipped.
                if !last || h >= self.h {
                    self.h = h * factor;
                }
                if !on_step(*t, y) {
                    return Ok(false);
                }
            } else {
                self.rejected += 1;
                let factor = if err.is_finite() { (0.9 * err.powf(-0.2)).clamp(0.1, 0.5) } else { 0.1 };
                self.h = h * factor;
                if self.h < min_step {
                    return Err(Error::NumericOverflow { t: *t });
                }
            }
        }
        Ok(true)
    }

    fn initial_step(&self, t: f64, y: &[f64], t_end: f64) -> f64 {
        let scale = |v: f64| self.tol.atol + self.tol.rtol * v.abs();
        let d0 = rms(y.iter().map(|&v| v / scale(v)));
        let d1 = rms(y.iter().zip(&self.k[0]).map(|(&v, &dv)| dv / scale(v)));
        let h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        h.min((t_end - t).abs()).min(self.tol.h_max).max(1e-12)
    }

    /// One trial step of size `h`; returns the scaled error norm.
    fn try_step<F>(&mut self, f: &mut F, t: f64, y: &[f64], h: f64) -> f64
    where
        F: FnMut(f64, &[f64], &mut [f64]),
    {
        for s in 1..7 {
            for i in 0..y.len() {
                let mut acc = 0.0;
                for j in 0..s {
                    acc += A[s][j] * self.k[j][i];
                }
                self.stage[i] = y[i] + h * acc;
            }
            let (_, tail) = self.k.split_at_mut(s);
            f(t + C[s] * h, &self.stage, &mut tail[0]);
        }
        // Stage 6 was evaluated at the fifth-order solution.
        self.y_new.copy_from_slice(&self.stage);
        let mut sum = 0.0;
        for i in 0..y.len() {
            let mut e = 0.0;
            for s in 0..7 {
                e += E[s] * self.k[s][i];
            }
            let sc = self.tol.atol + self.tol.rtol * y[i].abs().max(self.y_new[i].abs());
            let r = h * e / sc;
            sum += r * r;
        }
        (sum / y.len() as f64).sqrt()
    }
}

fn rms(it: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = it.fold((0.0, 0usize), |(s, n), v| (s + v * v, n + 1));
    if n == 0 {
        0.0
    } else {
        (s / n as f64).sqrt()
    }
}
