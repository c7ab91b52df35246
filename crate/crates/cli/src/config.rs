//! JSON run configurations, one struct per method.
//!
//! Every config names its `method`, which must match the subcommand. Unknown
//! fields are rejected. After defaults are filled in, the config is written
//! back into the manifest so that a run is reproducible from it alone.

use std::fs;
use std::path::Path;

use kapitza_core::chain::ChainSlice;
use kapitza_core::diagram::Axis;
use kapitza_core::twa::{InitialEnsemble, LatticeSpec};
use kapitza_core::{ModelParams, Reduced};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::{CliError, Command, Result};

/// Either explicit `values` or `n` evenly spaced points from `min` to `max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
}

impl AxisSpec {
    pub fn linspace(min: f64, max: f64, n: usize) -> Self {
        Self { values: None, min: Some(min), max: Some(max), n: Some(n) }
    }

    pub fn values(values: Vec<f64>) -> Self {
        Self { values: Some(values), min: None, max: None, n: None }
    }

    pub fn resolve(&self, field: &str, name: &str) -> Result<Axis> {
        let axis = match (&self.values, self.min, self.max, self.n) {
            (Some(v), None, None, None) => Axis::new(name, v.clone()),
            (None, Some(min), Some(max), Some(n)) => {
                if n == 0 {
                    return Err(field_error(field, "n must be at least 1"));
                }
                Axis::linspace(name, min, max, n)
            }
            _ => return Err(field_error(field, "give either `values` or all of `min`, `max`, `n`")),
        };
        axis.map_err(|e| field_error(field, &e.to_string()))
    }
}

fn field_error(field: &str, msg: &str) -> CliError {
    CliError::Config(format!("field `{field}`: {msg}"))
}

fn positive(field: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(field_error(field, &format!("must be positive and finite, got {v}")))
    }
}

fn at_least(field: &str, v: usize, min: usize) -> Result<()> {
    if v >= min {
        Ok(())
    } else {
        Err(field_error(field, &format!("must be at least {min}, got {v}")))
    }
}

fn default_steps() -> usize {
    kapitza_core::floquet::DEFAULT_STEPS_PER_PERIOD
}
fn default_modes() -> usize {
    kapitza_core::chain::DEFAULT_MODES
}
fn default_periods() -> f64 {
    kapitza_core::variational::DEFAULT_CLASSIFY_PERIODS
}
fn default_k_points() -> usize {
    kapitza_core::variational::DEFAULT_K_POINTS
}
fn default_rtol() -> f64 {
    1e-8
}
fn default_atol() -> f64 {
    1e-12
}
fn default_one() -> usize {
    1
}
fn default_samples() -> usize {
    16
}
fn default_window() -> f64 {
    30.0
}
fn default_traj() -> usize {
    100
}
fn default_true() -> bool {
    true
}
fn default_ensemble() -> InitialEnsemble {
    InitialEnsemble::Gapless
}
fn default_consistency_lambda() -> f64 {
    0.01
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PendulumConfig {
    pub method: String,
    /// Horizontal axis, `g0 / gamma^2`.
    pub g0_over_gamma2: AxisSpec,
    /// Vertical axis, `g1 / gamma^2`.
    pub g1_over_gamma2: AxisSpec,
    #[serde(default = "default_steps")]
    pub steps_per_period: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadraticConfig {
    pub method: String,
    pub slice: ChainSlice,
    pub x: AxisSpec,
    pub y: AxisSpec,
    #[serde(default = "default_modes")]
    pub n_modes: usize,
    #[serde(default = "default_steps")]
    pub steps_per_period: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MagnusConfig {
    pub method: String,
    pub params: ModelParams,
    #[serde(default)]
    pub fifth_order: bool,
    /// Cutoff of the chain boundary compared with `K_eff = 0`.
    #[serde(default = "default_consistency_lambda")]
    pub consistency_lambda_over_gamma: f64,
    #[serde(default = "default_modes")]
    pub n_modes: usize,
    #[serde(default = "default_steps")]
    pub steps_per_period: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariationalConfig {
    pub method: String,
    #[serde(rename = "K")]
    pub k: f64,
    pub slice: ChainSlice,
    pub x: AxisSpec,
    pub y: AxisSpec,
    /// Classification time in drive periods.
    #[serde(default = "default_periods")]
    pub periods: f64,
    #[serde(default = "default_k_points")]
    pub n_k: usize,
    #[serde(default = "default_rtol")]
    pub rtol: f64,
    #[serde(default = "default_atol")]
    pub atol: f64,
    /// Measure `tau_d` per cell, up to this many periods.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decay_periods: Option<f64>,
    #[serde(default = "default_modes")]
    pub n_modes: usize,
    #[serde(default = "default_steps")]
    pub steps_per_period: usize,
    /// Points whose `Z(t)/Z(0)` is written as a time series.
    #[serde(default)]
    pub series: Vec<Reduced>,
    #[serde(default = "default_one")]
    pub samples_per_period: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwaConfig {
    pub method: String,
    #[serde(rename = "K")]
    pub k: f64,
    #[serde(rename = "L")]
    pub l: f64,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "Lambda_over_gamma")]
    pub lambda_over_gamma: f64,
    #[serde(rename = "Kg0_over_gamma2", default)]
    pub kg0_over_gamma2: f64,
    /// Drive amplitudes scanned.
    #[serde(rename = "Kg1_over_gamma2")]
    pub kg1_over_gamma2: AxisSpec,
    #[serde(default = "default_traj")]
    pub n_traj: usize,
    pub periods: f64,
    #[serde(default = "default_samples")]
    pub samples_per_period: usize,
    #[serde(default = "default_window")]
    pub window_periods: f64,
    #[serde(default = "default_ensemble")]
    pub ensemble: InitialEnsemble,
    #[serde(default)]
    pub seed: u64,
    /// Shorter run lengths summarised from the same trajectories.
    #[serde(default)]
    pub checkpoints: Vec<f64>,
    /// Write the `sigma_kin(t)` series of every drive amplitude.
    #[serde(default = "default_true")]
    pub series: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum ScanConfig {
    Pendulum(PendulumConfig),
    Quadratic(QuadraticConfig),
    Magnus(MagnusConfig),
    Variational(VariationalConfig),
    Twa(TwaConfig),
}

impl ScanConfig {
    pub fn method(&self) -> &'static str {
        match self {
            ScanConfig::Pendulum(_) => "pendulum",
            ScanConfig::Quadratic(_) => "quadratic",
            ScanConfig::Magnus(_) => "magnus",
            ScanConfig::Variational(_) => "variational",
            ScanConfig::Twa(_) => "twa",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ScanConfig::Pendulum(c) => {
                c.g0_over_gamma2.resolve("g0_over_gamma2", "g0_over_gamma2")?;
                c.g1_over_gamma2.resolve("g1_over_gamma2", "g1_over_gamma2")?;
                at_least("steps_per_period", c.steps_per_period, kapitza_core::floquet::MIN_STEPS_PER_PERIOD)
            }
            ScanConfig::Quadratic(c) => {
                validate_slice(&c.slice)?;
                c.x.resolve("x", "x")?;
                c.y.resolve("y", "y")?;
                at_least("n_modes", c.n_modes, kapitza_core::chain::MIN_MODES)?;
                at_least("steps_per_period", c.steps_per_period, kapitza_core::floquet::MIN_STEPS_PER_PERIOD)
            }
            ScanConfig::Magnus(c) => {
                c.params.validate().map_err(|e| field_error("params", &e.to_string()))?;
                positive("consistency_lambda_over_gamma", c.consistency_lambda_over_gamma)?;
                at_least("n_modes", c.n_modes, kapitza_core::chain::MIN_MODES)?;
                at_least("steps_per_period", c.steps_per_period, kapitza_core::floquet::MIN_STEPS_PER_PERIOD)
            }
            ScanConfig::Variational(c) => {
                positive("K", c.k)?;
                validate_slice(&c.slice)?;
                c.x.resolve("x", "x")?;
                c.y.resolve("y", "y")?;
                positive("periods", c.periods)?;
                at_least("n_k", c.n_k, 1)?;
                positive("rtol", c.rtol)?;
                positive("atol", c.atol)?;
                if let Some(d) = c.decay_periods {
                    positive("decay_periods", d)?;
                }
                at_least("n_modes", c.n_modes, kapitza_core::chain::MIN_MODES)?;
                at_least("steps_per_period", c.steps_per_period, kapitza_core::floquet::MIN_STEPS_PER_PERIOD)?;
                at_least("samples_per_period", c.samples_per_period, 1)?;
                for (i, r) in c.series.iter().enumerate() {
                    ModelParams::from_reduced(c.k, *r).map_err(|e| field_error(&format!("series[{i}]"), &e.to_string()))?;
                }
                Ok(())
            }
            ScanConfig::Twa(c) => {
                positive("K", c.k)?;
                positive("L", c.l)?;
                positive("Lambda_over_gamma", c.lambda_over_gamma)?;
                let spec = LatticeSpec::new(c.l, c.n).map_err(|e| field_error("N", &e.to_string()))?;
                let drive = c.kg1_over_gamma2.resolve("Kg1_over_gamma2", "Kg1_over_gamma2")?;
                for &kg1 in &drive.values {
                    spec.params(c.k, Reduced { kg0: c.kg0_over_gamma2, kg1, lambda: c.lambda_over_gamma })
                        .map_err(|e| field_error("Kg1_over_gamma2", &e.to_string()))?;
                }
                at_least("n_traj", c.n_traj, 2)?;
                positive("periods", c.periods)?;
                at_least("samples_per_period", c.samples_per_period, 1)?;
                positive("window_periods", c.window_periods)?;
                if let InitialEnsemble::Gapped { delta } = c.ensemble {
                    positive("ensemble.delta", delta)?;
                }
                for (i, &t) in c.checkpoints.iter().enumerate() {
                    positive(&format!("checkpoints[{i}]"), t)?;
                    if t >= c.periods {
                        return Err(field_error(&format!("checkpoints[{i}]"), "must be shorter than `periods`"));
                    }
                }
                Ok(())
            }
        }
    }
}

fn validate_slice(slice: &ChainSlice) -> Result<()> {
    match *slice {
        ChainSlice::FixedLambda { lambda_over_gamma } => positive("slice.lambda_over_gamma", lambda_over_gamma),
        ChainSlice::FixedKg0 { kg0_over_gamma2 } if kg0_over_gamma2.is_finite() => Ok(()),
        ChainSlice::FixedKg0 { .. } => Err(field_error("slice.kg0_over_gamma2", "must be finite")),
    }
}

#[derive(Deserialize)]
struct Peek {
    method: Option<String>,
}

/// Read a JSON document, mapping a missing file to exit code 3 and syntax
/// errors to exit code 2 with their line and column.
pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::MissingInput(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

/// Parse and validate the config for subcommand `cmd`.
pub fn load(path: &Path, cmd: Command) -> Result<ScanConfig> {
    let peek: Peek = read_json(path)?;
    let method = peek.method.ok_or_else(|| CliError::Config(format!("{}: field `method` is missing", path.display())))?;
    if method != cmd.name() {
        return Err(CliError::Config(format!(
            "{}: field `method`: config is for `{method}` but the subcommand is `{}`",
            path.display(),
            cmd.name()
        )));
    }
    let cfg = match cmd {
        Command::Pendulum => ScanConfig::Pendulum(read_json(path)?),
        Command::Quadratic => ScanConfig::Quadratic(read_json(path)?),
        Command::Magnus => ScanConfig::Magnus(read_json(path)?),
        Command::Variational => ScanConfig::Variational(read_json(path)?),
        Command::Twa => ScanConfig::Twa(read_json(path)?),
        Command::FitScaling | Command::Plot => unreachable!("not a scan method"),
    };
    cfg.validate().map_err(|e| match e {
        CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
        other => other,
    })?;
    Ok(cfg)
}
