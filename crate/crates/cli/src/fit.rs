//! `fit-scaling`: critical drive per run length, `g_c(T)` fit and collapsed
//! curves.

use std::path::{Path, PathBuf};
use std::time::Instant;

use kapitza_core::scaling::{collapse, finite_time_fit, Curve, MIN_FIT_TIMES, RESIDUAL_THRESHOLD};
use kapitza_core::twa::{detect_critical, CriticalEstimates, Estimate, MIN_SCAN_POINTS};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::output::{self, fmt_f64, OutDir};
use crate::scan::{finish, manifest, scan_points, Finished};
use crate::{CliError, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    #[default]
    CosPeak,
    SigmaKink,
    /// Mean of both when available.
    Combined,
}

impl Estimator {
    pub fn pick(&self, est: &CriticalEstimates) -> Option<Estimate> {
        match self {
            Estimator::CosPeak => est.cos_peak,
            Estimator::SigmaKink => est.sigma_kink,
            Estimator::Combined => est.combined(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitInput {
    #[serde(rename = "T_fin")]
    pub t_fin: f64,
    /// TWA scan CSV, relative to the config file.
    pub scan: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    #[serde(default = "method_name")]
    pub method: String,
    pub inputs: Vec<FitInput>,
    #[serde(default)]
    pub estimator: Estimator,
}

fn method_name() -> String {
    "fit-scaling".into()
}

pub fn run(config: &Path, out: &Path) -> Result<Vec<String>> {
    let start = Instant::now();
    let cfg: FitConfig = crate::config::read_json(config)?;
    if cfg.method != "fit-scaling" {
        return Err(CliError::Config(format!(
            "{}: field `method`: config is for `{}` but the subcommand is `fit-scaling`",
            config.display(),
            cfg.method
        )));
    }
    let mut times: Vec<f64> = cfg.inputs.iter().map(|i| i.t_fin).collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    if times.len() < MIN_FIT_TIMES || times.iter().any(|t| !(*t > 0.0)) {
        return Err(CliError::Config(format!(
            "{}: field `inputs`: need at least {MIN_FIT_TIMES} distinct positive T_fin values",
            config.display()
        )));
    }
    let base = match config.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut scans = Vec::new();
    for input in &cfg.inputs {
        let points = scan_points(&base.join(&input.scan))?;
        scans.push((input, points));
    }

    let outputs: Vec<String> = std::iter::once("fit.json".to_string())
        .chain(cfg.inputs.iter().map(|i| format!("collapsed_T{}.csv", fmt_f64(i.t_fin))))
        .collect();
    let tol = json!({ "residual_threshold": RESIDUAL_THRESHOLD, "min_fit_times": MIN_FIT_TIMES, "min_scan_points": MIN_SCAN_POINTS });
    let m = manifest(&cfg, "fit-scaling", serde_json::Value::Null, tol, serde_json::Value::Null, &outputs);
    let dir = OutDir::prepare(out, &m)?;

    let mut per_t = Vec::new();
    let (mut t_used, mut g_used, mut u_used) = (Vec::new(), Vec::new(), Vec::new());
    for (input, points) in &scans {
        let entry = match detect_critical(points) {
            Ok(est) => {
                let chosen = cfg.estimator.pick(&est);
                if let Some(e) = chosen {
                    t_used.push(input.t_fin);
                    g_used.push(e.value);
                    u_used.push(e.uncertainty);
                }
                json!({ "T_fin": input.t_fin, "scan": input.scan, "estimates": est, "used": chosen })
            }
            Err(e) => json!({ "T_fin": input.t_fin, "scan": input.scan, "error": e.to_string() }),
        };
        per_t.push(entry);
    }
    if t_used.is_empty() {
        return Err(CliError::AllCellsFailed(scans.len()));
    }
    let fit = finite_time_fit(&t_used, &g_used, Some(&u_used))?;

    let curves: Vec<Curve> = scans
        .iter()
        .map(|(i, p)| Curve { t: i.t_fin, drive: p.iter().map(|s| s.drive).collect(), value: p.iter().map(|s| s.delta_cos).collect() })
        .collect();
    let mut files = vec![("fit.json".to_string(), "g_c per run length and the fit g_c(T) = g_c_inf (1 + A/T)".to_string())];
    for (((input, points), shifted), name) in scans.iter().zip(collapse(&curves, &fit)).zip(&outputs[1..]) {
        let rows = points
            .iter()
            .zip(&shifted.drive)
            .map(|(p, x)| format!("{},{},{}", fmt_f64(*x), fmt_f64(p.sigma_final), fmt_f64(p.delta_cos)));
        output::write_csv(&dir.file(name), "g_minus_g_c,sigma_final,delta_cos", rows)?;
        files.push((name.clone(), format!("scan after {} periods against K g1/gamma^2 - g_c(T)", fmt_f64(input.t_fin))));
    }
    let report = json!({ "model": "g_c(T) = g_c_inf (1 + A/T)", "estimator": cfg.estimator, "fit": fit, "per_T": per_t });
    output::write_text(&dir.file("fit.json"), &output::to_json(&report)?)?;

    let mut lines = vec![format!(
        "g_c_inf = {}, A = {}, residual = {}, reliable = {}",
        fmt_f64(fit.g_c_inf),
        fmt_f64(fit.a),
        fmt_f64(fit.residual),
        fit.reliable
    )];
    if !fit.reliable {
        lines.push("fit flagged unreliable: g_c(T) not monotone within uncertainties or residual above threshold".into());
    }
    let notes = vec![
        format!("fit marked unreliable when non-monotone or residual > {RESIDUAL_THRESHOLD}"),
        format!("scan paths in config.json are relative to {}", base.display()),
    ];
    finish(Finished { dir, manifest: m, files, notes, lines }, "fit-scaling", start)
}
