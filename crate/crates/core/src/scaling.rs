//! Finite-time scaling of critical drive amplitudes,
//! `g_c(T) = g_c∞ (1 + A/T)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MIN_FIT_TIMES: usize = 4;
/// Fits whose relative residual exceeds this are flagged unreliable.
pub const RESIDUAL_THRESHOLD: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    #[serde(rename = "T_values")]
    pub t_values: Vec<f64>,
    pub g_c_values: Vec<f64>,
    pub g_c_inf: f64,
    #[serde(rename = "A")]
    pub a: f64,
    /// Coefficient `B` of the additive form `g_c∞ + B/T`; equals `A g_c∞`.
    pub additive_b: f64,
    /// RMS residual divided by the RMS spread of `g_c` about its mean.
    pub residual: f64,
    /// `g_c(T)` never increases with `T` beyond the quoted uncertainties.
    pub monotone: bool,
    pub reliable: bool,
}

impl ScalingFit {
    pub fn predict(&self, t: f64) -> f64 {
        self.g_c_inf * (1.0 + self.a / t)
    }
}

/// Least-squares fit, linear in `1/T`. `uncertainties` widen the monotonicity
/// test only; the fit itself is unweighted.
pub fn finite_time_fit(t_values: &[f64], g_c: &[f64], uncertainties: Option<&[f64]>) -> Result<ScalingFit> {
    if t_values.len() != g_c.len() || uncertainties.is_some_and(|u| u.len() != g_c.len()) {
        return Err(Error::InvalidParams("mismatched fit inputs".into()));
    }
    let mut order: Vec<usize> = (0..t_values.len()).collect();
    order.sort_by(|&i, &j| t_values[i].total_cmp(&t_values[j]));
    let t: Vec<f64> = order.iter().map(|&i| t_values[i]).collect();
    let g: Vec<f64> = order.iter().map(|&i| g_c[i]).collect();
    let u: Vec<f64> = order.iter().map(|&i| uncertainties.map_or(0.0, |u| u[i])).collect();
    let distinct = t.windows(2).filter(|w| w[1] > w[0]).count() + usize::from(!t.is_empty());
    if distinct < MIN_FIT_TIMES {
        return Err(Error::InsufficientData(format!("need {MIN_FIT_TIMES} distinct T_fin values, got {distinct}")));
    }
    if t.iter().chain(&g).any(|v| !v.is_finite()) || t.iter().any(|&v| v <= 0.0) {
        return Err(Error::InvalidParams("fit inputs must be finite with T > 0".into()));
    }
    let n = t.len() as f64;
    let x: Vec<f64> = t.iter().map(|v| 1.0 / v).collect();
    let mx = x.iter().sum::<f64>() / n;
    let my = g.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(&g).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = x.iter().zip(&g).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let tss: f64 = g.iter().map(|b| (b - my).powi(2)).sum();
    let residual = if tss > 0.0 { (rss / tss).sqrt() } else { 0.0 };
    let monotone = (1..g.len()).all(|i| g[i] <= g[i - 1] + u[i].hypot(u[i - 1]));
    let a = if intercept != 0.0 { slope / intercept } else { f64::INFINITY };
    Ok(ScalingFit {
        t_values: t,
        g_c_values: g,
        g_c_inf: intercept,
        a,
        additive_b: slope,
        residual,
        monotone,
        reliable: monotone && residual <= RESIDUAL_THRESHOLD && intercept > 0.0,
    })
}

/// One observable-vs-drive curve measured after `t` periods.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    pub t: f64,
    pub drive: Vec<f64>,
    pub value: Vec<f64>,
}

/// Shift each curve's drive axis by its fitted `g_c(T)`.
pub fn collapse(curves: &[Curve], fit: &ScalingFit) -> Vec<Curve> {
    curves
        .iter()
        .map(|c| {
            let gc = fit.predict(c.t);
            Curve { t: c.t, drive: c.drive.iter().map(|g| g - gc).collect(), value: c.value.clone() }
        })
        .collect()
}
