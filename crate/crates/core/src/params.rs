//! Model parameters of the driven sine-Gordon chain and the drive protocol.
//!
//! Units: sound velocity u = 1, so momenta and frequencies share a unit.
//! The drive is `g(t) = g0 + g1 cos(gamma t)`. Every phase diagram is drawn
//! in the reduced coordinates `(K g0 / gamma^2, K g1 / gamma^2, Lambda / gamma)`;
//! [`ModelParams::from_reduced`] builds the representative with `gamma = 1`,
//! in which time is measured in radians of drive phase.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The five physical parameters of the driven model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Luttinger parameter.
    #[serde(rename = "K")]
    pub k: f64,
    /// Mean drive amplitude.
    pub g0: f64,
    /// Modulation amplitude.
    pub g1: f64,
    /// Drive angular frequency.
    pub gamma: f64,
    /// UV cutoff.
    #[serde(rename = "Lambda")]
    pub lambda: f64,
}

/// Reduced coordinates shared by every phase diagram.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Reduced {
    #[serde(rename = "Kg0_over_gamma2")]
    pub kg0: f64,
    #[serde(rename = "Kg1_over_gamma2")]
    pub kg1: f64,
    #[serde(rename = "Lambda_over_gamma")]
    pub lambda: f64,
}

impl ModelParams {
    pub fn new(k: f64, g0: f64, g1: f64, gamma: f64, lambda: f64) -> Result<Self> {
        let p = Self { k, g0, g1, gamma, lambda };
        p.validate()?;
        Ok(p)
    }

    /// Representative with `gamma = 1` for the given reduced triple.
    pub fn from_reduced(k: f64, reduced: Reduced) -> Result<Self> {
        if !(k > 0.0) {
            return Err(Error::InvalidParams(format!("K must be positive, got {k}")));
        }
        Self::new(k, reduced.kg0 / k, reduced.kg1 / k, 1.0, reduced.lambda)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.k, self.g0, self.g1, self.gamma, self.lambda];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParams(format!("non-finite parameter in {self:?}")));
        }
        if self.k <= 0.0 {
            return Err(Error::InvalidParams(format!("K must be positive, got {}", self.k)));
        }
        if self.gamma <= 0.0 {
            return Err(Error::InvalidParams(format!("gamma must be positive, got {}", self.gamma)));
        }
        if self.lambda <= 0.0 {
            return Err(Error::InvalidParams(format!("Lambda must be positive, got {}", self.lambda)));
        }
        if self.g0 < 0.0 || self.g1 < 0.0 {
            return Err(Error::InvalidParams(format!(
                "drive amplitudes must be non-negative, got g0 = {}, g1 = {}",
                self.g0, self.g1
            )));
        }
        Ok(())
    }

    /// Drive period `2 pi / gamma`.
    pub fn period(&self) -> f64 {
        2.0 * PI / self.gamma
    }

    /// Instantaneous drive amplitude `g(t)`.
    #[inline]
    pub fn drive(&self, t: f64) -> f64 {
        self.g0 + self.g1 * (self.gamma * t).cos()
    }

    pub fn reduced(&self) -> Reduced {
        let g2 = self.gamma * self.gamma;
        Reduced {
            kg0: self.k * self.g0 / g2,
            kg1: self.k * self.g1 / g2,
            lambda: self.lambda / self.gamma,
        }
    }

    /// Same physics expressed in drive-phase time (`gamma = 1`).
    pub fn in_drive_units(&self) -> Self {
        let g2 = self.gamma * self.gamma;
        Self {
            k: self.k,
            g0: self.g0 / g2,
            g1: self.g1 / g2,
            gamma: 1.0,
            lambda: self.lambda / self.gamma,
        }
    }

    /// Rescale time by `1/s`: frequencies grow by `s`, amplitudes by `s^2`.
    /// The reduced triple is unchanged.
    pub fn rescaled(&self, s: f64) -> Self {
        Self {
            k: self.k,
            g0: self.g0 * s * s,
            g1: self.g1 * s * s,
            gamma: self.gamma * s,
            lambda: self.lambda * s,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(k: f64, g0: f64, g1: f64, gamma: f64, lambda: f64) -> ModelParams {
        ModelParams::new(k, g0, g1, gamma, lambda).unwrap()
    }

    #[test]
    fn drive_at_start_and_half_period() {
        let gamma = 1.7;
        let g2 = gamma * gamma;
        let m = p(1.0, 0.3 * g2, 0.2 * g2, gamma, 0.1);
        assert!((m.drive(0.0) - 0.5 * g2).abs() < 1e-12);
        assert!((m.drive(m.period() / 2.0) - (m.g0 - m.g1)).abs() < 1e-12);
    }

    #[test]
    fn drive_averages_to_g0() {
        let m = p(1.0, 0.37, 0.81, 2.3, 0.1);
        // Trapezoid on a periodic integrand is spectrally accurate.
        let n = 64;
        let h = m.period() / n as f64;
        let mean: f64 = (0..n).map(|i| m.drive(i as f64 * h)).sum::<f64>() / n as f64;
        assert!((mean - m.g0).abs() < 1e-10);
    }

    #[test]
    fn drive_is_periodic() {
        let m = p(0.5, 0.2, 0.9, 3.1, 1.0);
        for i in 0..50 {
            let t = 0.137 * i as f64;
            assert!((m.drive(t + m.period()) - m.drive(t)).abs() < 1e-12);
        }
    }

    #[test]
    fn reduced_triples() {
        let r = p(1.0, 0.25, 0.0, 1.0, 0.1).reduced();
        assert_eq!((r.kg0, r.kg1, r.lambda), (0.25, 0.0, 0.1));
        let r = p(2.0, 0.5, 1.0, 2.0, 1.0).reduced();
        assert_eq!((r.kg0, r.kg1, r.lambda), (0.25, 0.5, 0.5));
    }

    #[test]
    fn rescaling_preserves_reduced_triple() {
        let m = p(0.7, 0.3, 0.45, 1.3, 0.2);
        let a = m.reduced();
        let b = m.rescaled(3.7).reduced();
        assert!((a.kg0 - b.kg0).abs() < 1e-14);
        assert!((a.kg1 - b.kg1).abs() < 1e-14);
        assert!((a.lambda - b.lambda).abs() < 1e-14);
    }

    #[test]
    fn rejects_invalid() {
        assert!(ModelParams::new(0.0, 0.1, 0.1, 1.0, 1.0).is_err());
        assert!(ModelParams::new(1.0, -0.1, 0.1, 1.0, 1.0).is_err());
        assert!(ModelParams::new(1.0, 0.1, -0.1, 1.0, 1.0).is_err());
        assert!(ModelParams::new(1.0, 0.1, 0.1, 0.0, 1.0).is_err());
        assert!(ModelParams::new(1.0, 0.1, 0.1, 1.0, 0.0).is_err());
        assert!(ModelParams::new(1.0, f64::NAN, 0.1, 1.0, 1.0).is_err());
        // g0 = 0 is allowed for the g0 = 0 scans.
        assert!(ModelParams::new(1.0, 0.0, 0.1, 1.0, 1.0).is_ok());
    }

    #[test]
    fn json_field_names() {
        let m = p(1.0, 0.25, 0.5, 2.0, 0.1);
        let s = serde_json::to_string(&m).unwrap();
        assert_eq!(s, r#"{"K":1.0,"g0":0.25,"g1":0.5,"gamma":2.0,"Lambda":0.1}"#);
        let back: ModelParams = serde_json::from_str(&s).unwrap();
        assert_eq!(back, m);
    }
}
