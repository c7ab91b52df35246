//! Scan drivers for the five compute methods.

use std::path::Path;
use std::time::Instant;

use kapitza_core::chain::{ChainSlice, ChainSolver};
use kapitza_core::diagram::{Axis, CellRecord, QuadraticCell};
use kapitza_core::floquet::{pendulum_cell, DriveTable, STABILITY_TOLERANCE};
use kapitza_core::magnus::{
    appendix_integrals, coefficients, keff_consistency, upper_extremum_stable_highfreq, CoefficientOptions,
    APPENDIX_QUADRATURE_ORDER, APPENDIX_REFINEMENT_TOL, CONSISTENCY_BISECTION_TOL,
};
use kapitza_core::ode::Tolerances;
use kapitza_core::twa::{
    detect_critical, run_ensemble, steps_per_period, LatticeSpec, ObservableConfig, ScanPoint, BLOWUP_THRESHOLD,
    MIN_SCAN_POINTS,
};
use kapitza_core::variational::{
    evolve, initial_state, variational_cell, CellOptions, EvolveOptions, DECAY_THRESHOLD, GAP_MAX_ITERATIONS,
    GAP_RESIDUAL_TOL, G_MAX, G_MIN, STABILITY_THRESHOLD,
};
use kapitza_core::{ModelParams, Reduced};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::{MagnusConfig, PendulumConfig, QuadraticConfig, ScanConfig, TwaConfig, VariationalConfig};
use crate::output::{self, fmt_bool, fmt_f64, sanitize, Listing, OutDir, TIMING};
use crate::{plot, CliError, Result, VERSION};

pub const PENDULUM_HEADER: &str = "x,y,lower_stable,upper_stable,lower_growth,upper_growth,status";
pub const QUADRATIC_HEADER: &str = "x,y,stable_exact,stable_analytic,growth_exponent,worst_q,status";
pub const VARIATIONAL_HEADER: &str =
    "x,y,stable_exact,stable_analytic,growth_exponent,worst_q,stable_variational,z_ratio,tau_d_over_T,status";
pub const TWA_SCAN_HEADER: &str = "Kg1_over_gamma2,sigma_final,d_sigma,delta_cos,blowup_fraction,status";
pub const TWA_SERIES_HEADER: &str = "t_over_T,sigma_kin,mean_cos2phi";
pub const Z_SERIES_HEADER: &str = "t_over_T,Z_ratio";
pub const DIAGRAM: &str = "diagram.csv";
pub const SCAN: &str = "scan.csv";

/// What a method run hands back to the shared epilogue.
pub(crate) struct Finished {
    pub dir: OutDir,
    pub manifest: Value,
    pub files: Vec<Listing>,
    pub notes: Vec<String>,
    pub lines: Vec<String>,
}

pub fn run(cfg: &ScanConfig, out: &Path, seed: Option<u64>) -> Result<Vec<String>> {
    let start = Instant::now();
    if seed.is_some() && !matches!(cfg, ScanConfig::Twa(_)) {
        eprintln!("kapitza: --seed has no effect on `{}`", cfg.method());
    }
    let done = match cfg {
        ScanConfig::Pendulum(c) => pendulum(c, out)?,
        ScanConfig::Quadratic(c) => quadratic(c, out)?,
        ScanConfig::Magnus(c) => magnus(c, out)?,
        ScanConfig::Variational(c) => variational(c, out)?,
        ScanConfig::Twa(c) => twa(c, out, seed)?,
    };
    finish(done, cfg.method(), start)
}

/// Config copy, plot scripts, README and timing shared by every run.
pub(crate) fn finish(mut done: Finished, method: &str, start: Instant) -> Result<Vec<String>> {
    let config = done.manifest["config"].clone();
    output::write_text(&done.dir.file("config.json"), &output::to_json(&config)?)?;
    done.files.insert(0, ("config.json".into(), "the complete configuration of this run".into()));
    done.files.insert(0, (output::MANIFEST.into(), "configuration, tolerances, seeds and code version".into()));
    for script in plot::emit(&done.dir.path, &done.manifest)? {
        done.files.push((script, "gnuplot script".into()));
    }
    let command = format!("kapitza {method} --config config.json --out-dir <new dir>    (from this directory)");
    output::write_text(&done.dir.file("README.txt"), &output::readme(method, &command, &done.files, &done.notes))?;
    let timing = json!({ "wall_seconds": start.elapsed().as_secs_f64() });
    output::write_text(&done.dir.file(TIMING), &output::to_json(&timing)?)?;
    done.lines.push(format!("results in {}", done.dir.path.display()));
    Ok(done.lines)
}

pub(crate) fn manifest(config: &impl serde::Serialize, method: &str, axes: Value, tolerances: Value, seeds: Value, outputs: &[String]) -> Value {
    json!({
        "tool": "kapitza",
        "version": VERSION,
        "method": method,
        "config": config,
        "axes": axes,
        "tolerances": tolerances,
        "seeds": seeds,
        "outputs": outputs,
    })
}

fn axes_json(x: &Axis, y: &Axis) -> Value {
    json!({ "x": x, "y": y })
}

fn slice_axes(slice: &ChainSlice, x: &crate::config::AxisSpec, y: &crate::config::AxisSpec) -> Result<(Axis, Axis)> {
    let xname = match slice {
        ChainSlice::FixedLambda { .. } => "Kg0_over_gamma2",
        ChainSlice::FixedKg0 { .. } => "Lambda_over_gamma",
    };
    Ok((x.resolve("x", xname)?, y.resolve("y", "Kg1_over_gamma2")?))
}

/// Fields of one CSV row after the coordinates, and the failure if any.
struct Row {
    fields: String,
    failure: Option<String>,
}

#[derive(Debug, Clone, Copy)]
struct GridCount {
    cells: usize,
    resumed: usize,
    failed: usize,
}

fn is_failed_row(row: &str) -> bool {
    row.rsplit(',').next().is_some_and(|s| s.starts_with("failed"))
}

fn status(failure: &Option<String>) -> String {
    match failure {
        None => "ok".into(),
        Some(m) => format!("failed: {}", sanitize(m)),
    }
}

/// Evaluate every `(x, y)` cell, one y-row at a time; each finished row is
/// flushed before the next starts.
fn run_grid<F>(dir: &OutDir, header: &str, x: &Axis, y: &Axis, cell: F) -> Result<GridCount>
where
    F: Fn(f64, f64) -> Row + Sync,
{
    let points: Vec<(f64, f64)> =
        y.values.iter().flat_map(|&yv| x.values.iter().map(move |&xv| (xv, yv))).collect();
    let existing = dir.existing_rows(DIAGRAM, header);
    let done = existing.len().min(points.len());
    let mut failed = existing[..done].iter().filter(|r| is_failed_row(r)).count();
    let mut sink = dir.csv(DIAGRAM, header, &existing[..done])?;
    let nx = x.len();
    let mut i = done;
    while i < points.len() {
        let end = (i / nx + 1) * nx;
        let rows: Vec<String> = points[i..end]
            .par_iter()
            .map(|&(xv, yv)| {
                let r = cell(xv, yv);
                format!("{},{},{},{}", fmt_f64(xv), fmt_f64(yv), r.fields, status(&r.failure))
            })
            .collect();
        failed += rows.iter().filter(|r| is_failed_row(r)).count();
        sink.row_group(&rows)?;
        i = end;
    }
    if failed == points.len() {
        return Err(CliError::AllCellsFailed(points.len()));
    }
    Ok(GridCount { cells: points.len(), resumed: done, failed })
}

fn summary(method: &str, n: GridCount) -> String {
    format!("{method}: {} cells ({} resumed, {} failed)", n.cells, n.resumed, n.failed)
}

fn quadratic_fields(q: &QuadraticCell) -> String {
    format!(
        "{},{},{},{}",
        fmt_bool(q.stable_exact),
        fmt_bool(q.stable_analytic),
        fmt_f64(q.growth_exponent),
        fmt_f64(q.worst_q)
    )
}

/// CSV fields of a record with `width` value columns.
fn record_row(rec: CellRecord, width: usize) -> Row {
    let fields = match &rec {
        CellRecord::Pendulum { lower_stable, upper_stable, lower_growth, upper_growth } => format!(
            "{},{},{},{}",
            fmt_bool(*lower_stable),
            fmt_bool(*upper_stable),
            fmt_f64(*lower_growth),
            fmt_f64(*upper_growth)
        ),
        CellRecord::Quadratic(q) => quadratic_fields(q),
        CellRecord::Variational { stable, z_ratio, diverged: _, tau_d_over_t, quadratic } => format!(
            "{},{},{},{}",
            quadratic_fields(quadratic),
            fmt_bool(*stable),
            fmt_f64(*z_ratio),
            tau_d_over_t.map(fmt_f64).unwrap_or_default()
        ),
        CellRecord::Failed { message, .. } => {
            return Row { fields: vec![""; width].join(","), failure: Some(message.clone()) };
        }
    };
    Row { fields, failure: None }
}

fn floquet_tolerances(steps: usize) -> Value {
    json!({
        "steps_per_period": steps,
        "scheme": "magnus4",
        "stability_tolerance": STABILITY_TOLERANCE,
    })
}

fn diagram_listing(header: &str) -> Listing {
    (DIAGRAM.into(), format!("one row per cell, y outer and x inner; columns {header}"))
}

fn pendulum(c: &PendulumConfig, out: &Path) -> Result<Finished> {
    let x = c.g0_over_gamma2.resolve("g0_over_gamma2", "g0_over_gamma2")?;
    let y = c.g1_over_gamma2.resolve("g1_over_gamma2", "g1_over_gamma2")?;
    let table = DriveTable::new(c.steps_per_period)?;
    let m = manifest(c, "pendulum", axes_json(&x, &y), floquet_tolerances(c.steps_per_period), Value::Null, &[DIAGRAM.into()]);
    let dir = OutDir::prepare(out, &m)?;
    let n = run_grid(&dir, PENDULUM_HEADER, &x, &y, |g0, g1| record_row(pendulum_cell(g0, g1, &table), 4))?;
    Ok(Finished {
        dir,
        manifest: m,
        files: vec![diagram_listing(PENDULUM_HEADER)],
        notes: vec!["growth columns are the per-period log of the largest Floquet multiplier".into()],
        lines: vec![summary("pendulum", n)],
    })
}

fn quadratic(c: &QuadraticConfig, out: &Path) -> Result<Finished> {
    let (x, y) = slice_axes(&c.slice, &c.x, &c.y)?;
    let solver = ChainSolver::new(c.n_modes, c.steps_per_period)?;
    let mut tol = floquet_tolerances(c.steps_per_period);
    tol["n_modes"] = json!(c.n_modes);
    let m = manifest(c, "quadratic", axes_json(&x, &y), tol, Value::Null, &[DIAGRAM.into()]);
    let dir = OutDir::prepare(out, &m)?;
    let n = run_grid(&dir, QUADRATIC_HEADER, &x, &y, |xv, yv| record_row(solver.record(c.slice.reduced_at(xv, yv)), 4))?;
    Ok(Finished {
        dir,
        manifest: m,
        files: vec![diagram_listing(QUADRATIC_HEADER)],
        notes: vec!["worst_q is NaN when every mode is stable".into()],
        lines: vec![summary("quadratic", n)],
    })
}

fn magnus(c: &MagnusConfig, out: &Path) -> Result<Finished> {
    let p = c.params;
    let g2 = p.gamma * p.gamma;
    let (g0, g1) = (p.g0 / g2, p.g1 / g2);
    let tol = json!({
        "appendix_quadrature_order": APPENDIX_QUADRATURE_ORDER,
        "appendix_refinement_tol": APPENDIX_REFINEMENT_TOL,
        "consistency_bisection_tol": CONSISTENCY_BISECTION_TOL,
        "n_modes": c.n_modes,
        "steps_per_period": c.steps_per_period,
        "stability_tolerance": STABILITY_TOLERANCE,
    });
    let m = manifest(c, "magnus", Value::Null, tol, Value::Null, &["report.json".into()]);
    let dir = OutDir::prepare(out, &m)?;

    let coeffs = coefficients(&p, CoefficientOptions { fifth_order: c.fifth_order });
    let closed = [g1, g0 * g1 - 0.25 * g1 * g1];
    let integrals = match appendix_integrals(g0, g1) {
        Ok((i1, i2)) => {
            let rel = |a: f64, b: f64| if b == 0.0 { (a - b).abs() } else { ((a - b) / b).abs() };
            json!({
                "g0_over_gamma2": g0,
                "g1_over_gamma2": g1,
                "computed": [i1, i2],
                "closed_form": closed,
                "relative_error": [rel(i1, closed[0]), rel(i2, closed[1])],
            })
        }
        Err(e) => json!({ "g0_over_gamma2": g0, "g1_over_gamma2": g1, "closed_form": closed, "error": e.to_string() }),
    };
    let solver = ChainSolver::new(c.n_modes, c.steps_per_period)?;
    let consistency = match keff_consistency(&solver, c.consistency_lambda_over_gamma) {
        Ok(k) => json!(k),
        Err(e) => json!({ "error": e.to_string() }),
    };
    if integrals.get("error").is_some() && consistency.get("error").is_some() {
        return Err(CliError::AllCellsFailed(2));
    }
    let report = json!({
        "params": p,
        "coefficients": coeffs,
        "upper_extremum_stable_highfreq": upper_extremum_stable_highfreq(&p),
        "appendix_integrals": integrals,
        "keff_consistency": consistency,
    });
    let text = output::to_json(&report)?;
    output::write_text(&dir.file("report.json"), &text)?;
    Ok(Finished {
        dir,
        manifest: m,
        files: vec![("report.json".into(), "effective couplings, drive integrals and K_eff consistency".into())],
        notes: vec![],
        lines: vec![text.trim_end().to_string()],
    })
}

fn variational(c: &VariationalConfig, out: &Path) -> Result<Finished> {
    let (x, y) = slice_axes(&c.slice, &c.x, &c.y)?;
    let solver = ChainSolver::new(c.n_modes, c.steps_per_period)?;
    let tolerances = Tolerances { rtol: c.rtol, atol: c.atol, h_max: f64::INFINITY };
    let opts = CellOptions {
        periods: c.periods,
        n_k: c.n_k,
        evolve: EvolveOptions { tolerances, ..EvolveOptions::default() },
        decay_periods: c.decay_periods,
    };
    let series: Vec<String> = (0..c.series.len()).map(|i| format!("z_series_{i:03}.csv")).collect();
    let mut outputs = vec![DIAGRAM.to_string()];
    outputs.extend(series.iter().cloned());
    let tol = json!({
        "rtol": c.rtol,
        "atol": c.atol,
        "integrator": "dormand_prince_5_4",
        "n_k": c.n_k,
        "k_grid": "uniform right-endpoint on (0, Lambda]",
        "stability_threshold": STABILITY_THRESHOLD,
        "decay_threshold": DECAY_THRESHOLD,
        "g_min": G_MIN,
        "g_max": G_MAX,
        "gap_residual_tol": GAP_RESIDUAL_TOL,
        "gap_max_iterations": GAP_MAX_ITERATIONS,
        "quadratic": { "n_modes": c.n_modes, "steps_per_period": c.steps_per_period, "stability_tolerance": STABILITY_TOLERANCE },
    });
    let m = manifest(c, "variational", axes_json(&x, &y), tol, Value::Null, &outputs);
    let dir = OutDir::prepare(out, &m)?;
    let n = run_grid(&dir, VARIATIONAL_HEADER, &x, &y, |xv, yv| {
        record_row(variational_cell(c.k, c.slice.reduced_at(xv, yv), &opts, &solver), 7)
    })?;

    let mut files = vec![diagram_listing(VARIATIONAL_HEADER)];
    let mut notes = vec![
        format!("stable_variational: Z(T_f)/Z(0) > {STABILITY_THRESHOLD} at T_f = {} periods", c.periods),
        "x, y are the reduced axes named in manifest.json".into(),
    ];
    if let Some(d) = c.decay_periods {
        notes.push(format!("tau_d_over_T is empty where Z/Z(0) stays above {DECAY_THRESHOLD} for {d} periods"));
    }
    let evolve_opts = EvolveOptions { tolerances, samples_per_period: c.samples_per_period, ..EvolveOptions::default() };
    for (name, r) in series.iter().zip(&c.series) {
        let result = ModelParams::from_reduced(c.k, *r).and_then(|p| {
            let (state, _) = initial_state(&p, c.n_k)?;
            evolve(state, &p, c.periods * p.period(), &evolve_opts).map(|t| (p, t))
        });
        let label = format!("Kg0/g^2={}, Kg1/g^2={}, Lambda/g={}", fmt_f64(r.kg0), fmt_f64(r.kg1), fmt_f64(r.lambda));
        match result {
            Ok((p, traj)) => {
                let rows = traj.samples.iter().map(|s| format!("{},{}", fmt_f64(s.t / p.period()), fmt_f64(s.z / traj.z0)));
                output::write_csv(&dir.file(name), Z_SERIES_HEADER, rows)?;
                files.push((name.clone(), format!("Z(t)/Z(0) at {label}")));
            }
            Err(e) => {
                output::write_csv(&dir.file(name), Z_SERIES_HEADER, std::iter::empty())?;
                notes.push(format!("{name}: {label} failed: {e}"));
            }
        }
    }
    Ok(Finished { dir, manifest: m, files, notes, lines: vec![summary("variational", n)] })
}

fn checkpoint_file(t: f64) -> String {
    format!("scan_T{}.csv", fmt_f64(t))
}

fn twa(c: &TwaConfig, out: &Path, seed: Option<u64>) -> Result<Finished> {
    let mut c = c.clone();
    if let Some(s) = seed {
        c.seed = s;
    }
    let c = &c;
    let drive = c.kg1_over_gamma2.resolve("Kg1_over_gamma2", "Kg1_over_gamma2")?;
    let spec = LatticeSpec::new(c.l, c.n)?;
    let reduced = |kg1| Reduced { kg0: c.kg0_over_gamma2, kg1, lambda: c.lambda_over_gamma };
    let p0 = spec.params(c.k, reduced(drive.values[0]))?;
    let spp = steps_per_period(&spec, &p0, c.samples_per_period);
    let obs = ObservableConfig { samples_per_period: c.samples_per_period, window_periods: c.window_periods };

    let mut scans: Vec<(f64, String)> = vec![(c.periods, SCAN.into())];
    scans.extend(c.checkpoints.iter().map(|&t| (t, checkpoint_file(t))));
    let series: Vec<String> = (0..drive.len()).map(|i| format!("series_{i:03}.csv")).collect();
    let mut outputs: Vec<String> = scans.iter().map(|(_, f)| f.clone()).collect();
    outputs.push("critical.json".into());
    if c.series {
        outputs.extend(series.iter().cloned());
    }
    let tol = json!({
        "integrator": "leapfrog_kick_drift_kick",
        "dt": p0.period() / spp as f64,
        "steps_per_period": spp,
        "gamma": p0.gamma,
        "lattice_cutoff": "Lambda = 2/dx",
        "blowup_threshold": BLOWUP_THRESHOLD,
        "min_scan_points": MIN_SCAN_POINTS,
    });
    let seeds = json!({ "base_seed": c.seed, "trajectory_seed": "base_seed XOR trajectory_index", "rng": "chacha8" });
    let m = manifest(c, "twa", json!({ "x": drive }), tol, seeds, &outputs);
    let dir = OutDir::prepare(out, &m)?;

    let existing: Vec<Vec<String>> = scans.iter().map(|(_, f)| dir.existing_rows(f, TWA_SCAN_HEADER)).collect();
    let done = existing.iter().map(Vec::len).min().unwrap_or(0).min(drive.len());
    let mut sinks = Vec::new();
    for ((_, f), rows) in scans.iter().zip(&existing) {
        sinks.push(dir.csv(f, TWA_SCAN_HEADER, &rows[..done])?);
    }
    let mut failed = existing[0][..done].iter().filter(|r| is_failed_row(r)).count();
    for (i, &kg1) in drive.values.iter().enumerate().skip(done) {
        let result = spec
            .params(c.k, reduced(kg1))
            .and_then(|p| run_ensemble(&spec, &p, c.ensemble, c.n_traj, c.periods, &obs, c.seed));
        match result {
            Ok(stats) => {
                if c.series {
                    let rows = (0..stats.t_over_t.len()).map(|j| {
                        format!("{},{},{}", fmt_f64(stats.t_over_t[j]), fmt_f64(stats.sigma_kin[j]), fmt_f64(stats.cos2phi[j]))
                    });
                    output::write_csv(&dir.file(&series[i]), TWA_SERIES_HEADER, rows)?;
                }
                for ((t, _), sink) in scans.iter().zip(&mut sinks) {
                    let s = if *t == c.periods { stats.clone() } else { stats.truncated(*t)? };
                    sink.row_group(&[format!(
                        "{},{},{},{},{},ok",
                        fmt_f64(kg1),
                        fmt_f64(s.sigma_final),
                        fmt_f64(s.d_sigma),
                        fmt_f64(s.delta_cos),
                        fmt_f64(s.blowup_fraction)
                    )])?;
                }
            }
            Err(e) => {
                failed += 1;
                if c.series {
                    output::write_csv(&dir.file(&series[i]), TWA_SERIES_HEADER, std::iter::empty())?;
                }
                let row = format!("{},,,,,{}", fmt_f64(kg1), status(&Some(e.to_string())));
                for sink in &mut sinks {
                    sink.row_group(std::slice::from_ref(&row))?;
                }
            }
        }
    }
    drop(sinks);
    if failed == drive.len() {
        return Err(CliError::AllCellsFailed(failed));
    }

    let mut critical = Vec::new();
    let mut lines = vec![format!("twa: {} drive amplitudes ({} resumed, {} failed)", drive.len(), done, failed)];
    for (t, f) in &scans {
        let points = scan_points(&dir.file(f))?;
        let entry = match detect_critical(&points) {
            Ok(est) => {
                lines.push(format!("T_fin = {}: {}", fmt_f64(*t), describe(&est)));
                json!({ "T_fin": t, "scan": f, "estimates": est, "agree": est.agree(), "combined": est.combined() })
            }
            Err(e) => json!({ "T_fin": t, "scan": f, "error": e.to_string() }),
        };
        critical.push(entry);
    }
    output::write_text(&dir.file("critical.json"), &output::to_json(&critical)?)?;

    let mut files: Vec<Listing> = scans
        .iter()
        .map(|(t, f)| (f.clone(), format!("ensemble summary per drive amplitude after {} periods", fmt_f64(*t))))
        .collect();
    files.push(("critical.json".into(), "critical drive from the sigma kink and the delta_cos peak".into()));
    if c.series {
        files.push(("series_NNN.csv".into(), format!("{TWA_SERIES_HEADER} for the NNN-th drive amplitude")));
    }
    let notes = vec![
        "sigma_final is inf when any trajectory blew up; d_sigma is its standard error".into(),
        format!("delta_cos: max - min of <cos 2phi> over the last {} periods", fmt_f64(c.window_periods)),
    ];
    Ok(Finished { dir, manifest: m, files, notes, lines })
}

fn describe(est: &kapitza_core::twa::CriticalEstimates) -> String {
    let f = |e: Option<kapitza_core::twa::Estimate>| match e {
        Some(e) => format!("{} +- {}", fmt_f64(e.value), fmt_f64(e.uncertainty)),
        None => "none".into(),
    };
    format!("sigma kink {}, delta_cos peak {}", f(est.sigma_kink), f(est.cos_peak))
}

/// Successful rows of a TWA scan CSV.
pub fn scan_points(path: &Path) -> Result<Vec<ScanPoint>> {
    let (header, rows) = output::read_csv(path)?;
    let col = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::Config(format!("{}: no column `{name}`", path.display())))
    };
    let (d, s, c) = (col("Kg1_over_gamma2")?, col("sigma_final")?, col("delta_cos")?);
    let num = |v: &str| v.parse::<f64>().map_err(|_| CliError::Config(format!("{}: bad number `{v}`", path.display())));
    let mut out = Vec::new();
    for r in rows {
        if r.last().is_some_and(|s| s.starts_with("failed")) {
            continue;
        }
        out.push(ScanPoint { drive: num(&r[d])?, sigma_final: num(&r[s])?, delta_cos: num(&r[c])? });
    }
    Ok(out)
}
