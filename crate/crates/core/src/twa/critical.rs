use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MIN_SCAN_POINTS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanPoint {
    /// `K g1 / γ²`.
    pub drive: f64,
    pub sigma_final: f64,
    pub delta_cos: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub uncertainty: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalEstimates {
    /// Largest positive curvature of `sigma_final` against the drive.
    pub sigma_kink: Option<Estimate>,
    /// Parabolic vertex around the maximum of `delta_cos`.
    pub cos_peak: Option<Estimate>,
}

impl CriticalEstimates {
    /// Both estimates exist and differ by less than their uncertainties
    /// added in quadrature.
    pub fn agree(&self) -> Option<bool> {
        let (a, b) = (self.sigma_kink?, self.cos_peak?);
        Some((a.value - b.value).abs() <= a.uncertainty.hypot(b.uncertainty))
    }

    /// Mean of the available estimates.
    pub fn combined(&self) -> Option<Estimate> {
        match (self.sigma_kink, self.cos_peak) {
            (Some(a), Some(b)) => Some(Estimate {
                value: 0.5 * (a.value + b.value),
                uncertainty: 0.5 * a.uncertainty.hypot(b.uncertainty).max((a.value - b.value).abs()),
            }),
            (a, b) => a.or(b),
        }
    }
}

fn half_span(x: &[f64], i: usize) -> f64 {
    0.5 * (x[i + 1] - x[i - 1])
}

fn sigma_kink(x: &[f64], s: &[f64]) -> Option<Estimate> {
    let n = x.len();
    let mut best: Option<(usize, f64)> = None;
    for i in 1..n - 1 {
        if !(s[i - 1].is_finite() && s[i].is_finite() && s[i + 1].is_finite()) {
            continue;
        }
        let right = (s[i + 1] - s[i]) / (x[i + 1] - x[i]);
        let left = (s[i] - s[i - 1]) / (x[i] - x[i - 1]);
        let d2 = 2.0 * (right - left) / (x[i + 1] - x[i - 1]);
        if d2 > 0.0 && best.is_none_or(|(_, b)| d2 > b) {
            best = Some((i, d2));
        }
    }
    let (i, _) = best?;
    // A curvature maximum on the last interior point is indistinguishable
    // from growth continuing past the scan.
    let last_finite = (0..n).rev().find(|&j| s[j].is_finite())?;
    if i == 1 || i + 1 >= last_finite {
        return None;
    }
    Some(Estimate { value: x[i], uncertainty: half_span(x, i) })
}

fn cos_peak(x: &[f64], c: &[f64]) -> Option<Estimate> {
    let n = x.len();
    let (i, _) = c
        .iter()
        .enumerate()
        .filter(|(_, v)| v.is_finite())
        .fold(None, |best: Option<(usize, f64)>, (i, &v)| match best {
            Some((_, b)) if b >= v => best,
            _ => Some((i, v)),
        })?;
    if i == 0 || i == n - 1 || !c[i - 1].is_finite() || !c[i + 1].is_finite() {
        return None;
    }
    if c[i] <= c[i - 1].min(c[i + 1]) {
        return None;
    }
    let (x0, x1, x2) = (x[i - 1], x[i], x[i + 1]);
    let (y0, y1, y2) = (c[i - 1], c[i], c[i + 1]);
    let num = (x1 - x0).powi(2) * (y1 - y2) - (x1 - x2).powi(2) * (y1 - y0);
    let den = (x1 - x0) * (y1 - y2) - (x1 - x2) * (y1 - y0);
    let vertex = if den != 0.0 { x1 - 0.5 * num / den } else { x1 };
    Some(Estimate { value: vertex.clamp(x0, x2), uncertainty: half_span(x, i) })
}

/// Locate the transition in a drive scan with two independent estimators.
pub fn detect_critical(points: &[ScanPoint]) -> Result<CriticalEstimates> {
    if points.len() < MIN_SCAN_POINTS {
        return Err(Error::InsufficientData(format!(
            "need at least {MIN_SCAN_POINTS} scan points, got {}",
            points.len()
        )));
    }
    if points.windows(2).any(|w| !(w[1].drive > w[0].drive)) {
        return Err(Error::InsufficientData("scan must be sorted by strictly increasing drive".into()));
    }
    let x: Vec<f64> = points.iter().map(|p| p.drive).collect();
    let s: Vec<f64> = points.iter().map(|p| p.sigma_final).collect();
    let c: Vec<f64> = points.iter().map(|p| p.delta_cos).collect();
    let est = CriticalEstimates { sigma_kink: sigma_kink(&x, &s), cos_peak: cos_peak(&x, &c) };
    if est.sigma_kink.is_none() && est.cos_peak.is_none() {
        return Err(Error::NoTransition);
    }
    Ok(est)
}
