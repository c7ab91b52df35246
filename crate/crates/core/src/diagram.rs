//! Grid container shared by every phase-diagram producer.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which solver produced a cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Pendulum,
    Quadratic,
    Magnus,
    Variational,
    Twa,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Pendulum => "pendulum",
            Method::Quadratic => "quadratic",
            Method::Magnus => "magnus",
            Method::Variational => "variational",
            Method::Twa => "twa",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pendulum" => Ok(Method::Pendulum),
            "quadratic" => Ok(Method::Quadratic),
            "magnus" => Ok(Method::Magnus),
            "variational" => Ok(Method::Variational),
            "twa" => Ok(Method::Twa),
            other => Err(Error::Config(format!("unknown method {other:?}"))),
        }
    }
}

/// A named, strictly monotone list of axis values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub name: String,
    pub values: Vec<f64>,
}

impl Axis {
    pub fn new(name: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        let name = name.into();
        if values.is_empty() {
            return Err(Error::Config(format!("axis {name} has no values")));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config(format!("axis {name} has non-finite values")));
        }
        let increasing = values.windows(2).all(|w| w[1] > w[0]);
        let decreasing = values.windows(2).all(|w| w[1] < w[0]);
        if !(increasing || decreasing) {
            return Err(Error::Config(format!("axis {name} is not strictly monotone")));
        }
        Ok(Self { name, values })
    }

    /// `n` evenly spaced values from `min` to `max` inclusive.
    pub fn linspace(name: impl Into<String>, min: f64, max: f64, n: usize) -> Result<Self> {
        let values = match n {
            0 => Vec::new(),
            1 => vec![min],
            _ => (0..n)
                .map(|i| min + (max - min) * i as f64 / (n - 1) as f64)
                .collect(),
        };
        Self::new(name, values)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Largest gap between neighbouring values.
    pub fn spacing(&self) -> f64 {
        self.values
            .windows(2)
            .map(|w| (w[1] - w[0]).abs())
            .fold(0.0, f64::max)
    }
}

/// Per-cell record of the quadratic (per-mode Floquet) classifier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadraticCell {
    pub stable_exact: bool,
    pub stable_analytic: bool,
    /// Per-period log of the largest Floquet multiplier; `+inf` on overflow.
    pub growth_exponent: f64,
    /// Momentum of the most unstable mode (NaN when stable).
    pub worst_q: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase")]
pub enum CellRecord {
    Pendulum {
        lower_stable: bool,
        upper_stable: bool,
        lower_growth: f64,
        upper_growth: f64,
    },
    Quadratic(QuadraticCell),
    Variational {
        stable: bool,
        z_ratio: f64,
        diverged: bool,
        tau_d_over_t: Option<f64>,
        quadratic: QuadraticCell,
    },
    Failed {
        failed_method: Method,
        message: String,
    },
}

impl CellRecord {
    pub fn method(&self) -> Method {
        match self {
            CellRecord::Pendulum { .. } => Method::Pendulum,
            CellRecord::Quadratic(_) => Method::Quadratic,
            CellRecord::Variational { .. } => Method::Variational,
            CellRecord::Failed { failed_method, .. } => *failed_method,
        }
    }

    pub fn is_failed(&self) -> bool {
        matches!(self, CellRecord::Failed { .. })
    }
}

/// Cells are stored row-major: `y` is the outer index, `x` the inner one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseDiagram {
    pub x: Axis,
    pub y: Axis,
    pub cells: Vec<CellRecord>,
}

impl PhaseDiagram {
    pub fn new(x: Axis, y: Axis, cells: Vec<CellRecord>) -> Result<Self> {
        if cells.len() != x.len() * y.len() {
            return Err(Error::Config(format!(
                "{} cells for a {}x{} grid",
                cells.len(),
                x.len(),
                y.len()
            )));
        }
        Ok(Self { x, y, cells })
    }

    pub fn cell(&self, ix: usize, iy: usize) -> &CellRecord {
        &self.cells[iy * self.x.len() + ix]
    }

    /// Iterate `(x, y, cell)` in storage order.
    pub fn iter(&self) -> impl Iterator<Item = (f64, f64, &CellRecord)> + '_ {
        let nx = self.x.len();
        self.cells
            .iter()
            .enumerate()
            .map(move |(i, c)| (self.x.values[i % nx], self.y.values[i / nx], c))
    }
}

/// Every `(x, y)` pair of a grid, y outer.
pub(crate) fn grid_points(x: &Axis, y: &Axis) -> Vec<(f64, f64)> {
    y.values
        .iter()
        .flat_map(|&yv| x.values.iter().map(move |&xv| (xv, yv)))
        .collect()
}
