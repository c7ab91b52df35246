//! Self-contained gnuplot scripts. Scripts read the CSVs by relative path
//! and are run from the output directory: `gnuplot diagram.gp`.

use std::path::Path;

use serde_json::Value;

use crate::output::{self, MANIFEST};
use crate::{CliError, Result};

fn label(name: &str) -> String {
    match name {
        "Kg0_over_gamma2" => "K g_0/{/Symbol g}^2".into(),
        "Kg1_over_gamma2" => "K g_1/{/Symbol g}^2".into(),
        "Lambda_over_gamma" => "{/Symbol L}/{/Symbol g}".into(),
        "g0_over_gamma2" => "g_0/{/Symbol g}^2".into(),
        "g1_over_gamma2" => "g_1/{/Symbol g}^2".into(),
        other => other.replace('_', " "),
    }
}

fn preamble(png: &str) -> String {
    format!(
        "set datafile separator ','\nset terminal pngcairo enhanced size 900,700\nset output '{png}'\nset key outside right\n"
    )
}

/// Boolean or continuous heatmap of column `col` of `diagram.csv`.
fn heatmap(png: &str, xname: &str, yname: &str, col: usize, title: &str, boolean: bool) -> String {
    let mut s = preamble(png);
    s.push_str(&format!("set xlabel '{}'\nset ylabel '{}'\nset title '{title}'\n", label(xname), label(yname)));
    if boolean {
        s.push_str("set cbrange [0:1]\nset palette defined (0 '#d73027', 1 '#4575b4')\nset cbtics ('unstable' 0, 'stable' 1)\n");
    } else {
        s.push_str("set palette rgb 33,13,10\n");
    }
    s.push_str(&format!("plot 'diagram.csv' skip 1 using 1:2:{col} with image notitle\n"));
    s
}

fn two_panel_heatmap(png: &str, xname: &str, yname: &str, panels: &[(usize, &str)]) -> String {
    let mut s = preamble(png);
    s.push_str(&format!(
        "set xlabel '{}'\nset ylabel '{}'\nset cbrange [0:1]\nset palette defined (0 '#d73027', 1 '#4575b4')\n",
        label(xname),
        label(yname)
    ));
    s.push_str(&format!("set multiplot layout 1,{}\n", panels.len()));
    for (col, title) in panels {
        s.push_str(&format!("set title '{title}'\nplot 'diagram.csv' skip 1 using 1:2:{col} with image notitle\n"));
    }
    s.push_str("unset multiplot\n");
    s
}

/// `tau_d` against the drive on log-log axes with a slope -1 guide through
/// the centroid of the measured points.
fn tau_d(png: &str) -> String {
    let mut s = preamble(png);
    s.push_str(&format!(
        "set logscale xy\nset xlabel '{}'\nset ylabel '{{/Symbol t}}_d / T'\n",
        label("Kg1_over_gamma2")
    ));
    s.push_str("stats 'diagram.csv' skip 1 using (log($2)):(log($9)) nooutput\n");
    s.push_str("c = exp(STATS_mean_y + STATS_mean_x)\n");
    s.push_str("plot 'diagram.csv' skip 1 using 2:9 with points pt 7 title '{/Symbol t}_d', \\\n");
    s.push_str("     c / x with lines dt 2 lc rgb 'black' title 'slope -1'\n");
    s
}

fn multi_curve(png: &str, xlabel: &str, ylabel: &str, curves: &[(String, usize, String)]) -> String {
    let mut s = preamble(png);
    s.push_str(&format!("set xlabel '{xlabel}'\nset ylabel '{ylabel}'\n"));
    let parts: Vec<String> = curves
        .iter()
        .map(|(file, col, title)| format!("'{file}' skip 1 using 1:{col} with lines title '{title}'"))
        .collect();
    s.push_str(&format!("plot {}\n", parts.join(", \\\n     ")));
    s
}

fn twa_scan(png: &str, files: &[String]) -> String {
    let mut s = preamble(png);
    s.push_str(&format!("set xlabel '{}'\nset multiplot layout 2,1\n", label("Kg1_over_gamma2")));
    let sigma: Vec<String> = files
        .iter()
        .map(|f| format!("'{f}' skip 1 using 1:2:3 with yerrorlines title '{}'", f.trim_end_matches(".csv")))
        .collect();
    s.push_str(&format!("set ylabel '{{/Symbol s}}_{{kin}}'\nplot {}\n", sigma.join(", \\\n     ")));
    let cos: Vec<String> = files
        .iter()
        .map(|f| format!("'{f}' skip 1 using 1:4 with linespoints title '{}'", f.trim_end_matches(".csv")))
        .collect();
    s.push_str(&format!("set ylabel '{{/Symbol d}}cos'\nplot {}\nunset multiplot\n", cos.join(", \\\n     ")));
    s
}

fn axis_name(m: &Value, axis: &str) -> String {
    m["axes"][axis]["name"].as_str().unwrap_or(axis).to_string()
}

fn outputs(m: &Value) -> Vec<String> {
    m["outputs"]
        .as_array()
        .map(|a| a.iter().filter_map(|v| v.as_str().map(str::to_string)).collect())
        .unwrap_or_default()
}

/// Write the scripts that fit the run described by `manifest` into `dir`;
/// returns their file names.
pub fn emit(dir: &Path, manifest: &Value) -> Result<Vec<String>> {
    let files = outputs(manifest);
    for f in &files {
        if !dir.join(f).is_file() {
            return Err(CliError::MissingInput(format!("{}", dir.join(f).display())));
        }
    }
    let (x, y) = (axis_name(manifest, "x"), axis_name(manifest, "y"));
    let mut scripts: Vec<(String, String)> = Vec::new();
    match manifest["method"].as_str().unwrap_or_default() {
        "pendulum" => {
            scripts.push(("diagram.gp".into(), two_panel_heatmap("diagram.png", &x, &y, &[(3, "phi = 0"), (4, "phi = pi")])));
        }
        "quadratic" => {
            scripts.push(("diagram.gp".into(), heatmap("diagram.png", &x, &y, 3, "quadratic chain", true)));
            scripts.push(("growth.gp".into(), heatmap("growth.png", &x, &y, 5, "Floquet growth exponent", false)));
        }
        "variational" => {
            scripts.push(("diagram.gp".into(), heatmap("diagram.png", &x, &y, 7, "variational", true)));
            scripts.push(("quadratic.gp".into(), heatmap("quadratic.png", &x, &y, 3, "quadratic chain", true)));
            scripts.push(("z_ratio.gp".into(), heatmap("z_ratio.png", &x, &y, 8, "Z(T_f)/Z(0)", false)));
            if manifest["config"].get("decay_periods").is_some() {
                scripts.push(("tau_d.gp".into(), tau_d("tau_d.png")));
            }
            let series: Vec<(String, usize, String)> = files
                .iter()
                .filter(|f| f.starts_with("z_series_"))
                .zip(manifest["config"]["series"].as_array().into_iter().flatten())
                .map(|(f, r)| (f.clone(), 2, format!("K g_1/{{/Symbol g}}^2 = {}", r["Kg1_over_gamma2"])))
                .collect();
            if !series.is_empty() {
                scripts.push(("z_series.gp".into(), multi_curve("z_series.png", "t / T", "Z / Z(0)", &series)));
            }
        }
        "twa" => {
            let scans: Vec<String> = files.iter().filter(|f| f.starts_with("scan")).cloned().collect();
            scripts.push(("scan.gp".into(), twa_scan("scan.png", &scans)));
            let drives = manifest["axes"]["x"]["values"].as_array().cloned().unwrap_or_default();
            let series: Vec<(&String, &Value)> =
                files.iter().filter(|f| f.starts_with("series_")).zip(drives.iter()).collect();
            if !series.is_empty() {
                let key = |col: usize| -> Vec<(String, usize, String)> {
                    series
                        .iter()
                        .map(|(f, d)| ((*f).clone(), col, format!("K g_1/{{/Symbol g}}^2 = {d}")))
                        .collect()
                };
                scripts.push(("sigma_kin.gp".into(), multi_curve("sigma_kin.png", "t / T", "{/Symbol s}_{kin}", &key(2))));
                scripts.push(("cos2phi.gp".into(), multi_curve("cos2phi.png", "t / T", "<cos 2{/Symbol f}>", &key(3))));
            }
        }
        "fit-scaling" => {
            let curves: Vec<String> = files.iter().filter(|f| f.starts_with("collapsed_")).cloned().collect();
            let key = |col: usize| -> Vec<(String, usize, String)> {
                curves.iter().map(|f| (f.clone(), col, f.trim_start_matches("collapsed_").trim_end_matches(".csv").into())).collect()
            };
            let xl = "K g_1/{/Symbol g}^2 - g_c(T)";
            scripts.push(("collapse_delta_cos.gp".into(), multi_curve("collapse_delta_cos.png", xl, "{/Symbol d}cos", &key(3))));
            scripts.push(("collapse_sigma.gp".into(), multi_curve("collapse_sigma.png", xl, "{/Symbol s}_{kin}", &key(2))));
        }
        "magnus" => {}
        other => return Err(CliError::Config(format!("manifest names unknown method `{other}`"))),
    }
    for (name, text) in &scripts {
        output::write_text(&dir.join(name), text)?;
    }
    Ok(scripts.into_iter().map(|(n, _)| n).collect())
}

/// `plot` subcommand: rebuild the scripts of a finished run.
pub fn emit_for_dir(dir: &Path) -> Result<Vec<String>> {
    let path = dir.join(MANIFEST);
    let manifest: Value = crate::config::read_json(&path)?;
    let scripts = emit(dir, &manifest)?;
    Ok(scripts.into_iter().map(|s| format!("wrote {}", dir.join(s).display())).collect())
}
