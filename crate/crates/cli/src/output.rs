//! Output directory handling: manifest check, resumable CSV files, text
//! artifacts.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use crate::{CliError, Result};

pub const MANIFEST: &str = "manifest.json";
pub const TIMING: &str = "timing.json";

/// Shortest round-trip decimal, switching to exponent form outside
/// `[1e-4, 1e15)`.
pub fn fmt_f64(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || !v.is_finite() || (1e-4..1e15).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

pub fn fmt_bool(b: bool) -> &'static str {
    if b {
        "1"
    } else {
        "0"
    }
}

/// A CSV field that cannot break the row.
pub fn sanitize(s: &str) -> String {
    s.replace([',', '\n', '\r'], ";")
}

pub fn to_json<T: Serialize>(v: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(v).map_err(|e| CliError::Config(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text)?;
    Ok(())
}

/// An output directory bound to one manifest.
#[derive(Debug)]
pub struct OutDir {
    pub path: PathBuf,
    /// A previous run with the same manifest left results here.
    pub resume: bool,
}

impl OutDir {
    /// Create `path` and record `manifest` in it. An existing manifest must
    /// match exactly; the run then resumes from the rows already on disk.
    pub fn prepare(path: &Path, manifest: &Value) -> Result<Self> {
        fs::create_dir_all(path)?;
        let text = to_json(manifest)?;
        let file = path.join(MANIFEST);
        let resume = match fs::read_to_string(&file) {
            Ok(old) if old == text => true,
            Ok(_) => {
                return Err(CliError::Config(format!(
                    "{} holds a different run; choose another --out-dir",
                    path.display()
                )))
            }
            Err(_) => false,
        };
        if !resume {
            write_text(&file, &text)?;
        }
        Ok(Self { path: path.to_path_buf(), resume })
    }

    pub fn file(&self, name: &str) -> PathBuf {
        self.path.join(name)
    }

    /// Complete data rows of `name` from an earlier run, or nothing when
    /// starting fresh or when the header differs. A trailing partial line
    /// is dropped.
    pub fn existing_rows(&self, name: &str, header: &str) -> Vec<String> {
        if !self.resume {
            return Vec::new();
        }
        let Ok(text) = fs::read_to_string(self.file(name)) else {
            return Vec::new();
        };
        let mut lines: Vec<&str> = text.split_inclusive('\n').collect();
        if lines.first().map(|h| h.trim_end_matches('\n')) != Some(header) {
            return Vec::new();
        }
        if lines.last().is_some_and(|l| !l.ends_with('\n')) {
            lines.pop();
        }
        lines[1..].iter().map(|l| l.trim_end_matches('\n').to_string()).collect()
    }

    /// Start `name` afresh with `header` followed by `rows`.
    pub fn csv(&self, name: &str, header: &str, rows: &[String]) -> Result<CsvSink> {
        let mut w = BufWriter::new(File::create(self.file(name))?);
        writeln!(w, "{header}")?;
        for r in rows {
            writeln!(w, "{r}")?;
        }
        w.flush()?;
        Ok(CsvSink { w })
    }
}

/// Append-only CSV writer; every `row_group` reaches the disk before the
/// next one is computed.
pub struct CsvSink {
    w: BufWriter<File>,
}

impl CsvSink {
    pub fn row_group(&mut self, rows: &[String]) -> Result<()> {
        for r in rows {
            writeln!(self.w, "{r}")?;
        }
        self.w.flush()?;
        Ok(())
    }
}

/// Write a whole CSV file in one go.
pub fn write_csv(path: &Path, header: &str, rows: impl IntoIterator<Item = String>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{header}")?;
    for r in rows {
        writeln!(w, "{r}")?;
    }
    w.flush()?;
    Ok(())
}

/// Header and data rows of a CSV file, split on commas.
pub fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let file = File::open(path).map_err(|e| CliError::MissingInput(format!("{}: {e}", path.display())))?;
    let mut lines = BufReader::new(file).lines();
    let header = match lines.next() {
        Some(h) => h?.split(',').map(str::to_string).collect(),
        None => return Err(CliError::MissingInput(format!("{}: empty file", path.display()))),
    };
    let mut rows = Vec::new();
    for l in lines {
        let l = l?;
        if !l.is_empty() {
            rows.push(l.split(',').map(str::to_string).collect());
        }
    }
    Ok((header, rows))
}

/// One `(file, description)` entry of a scan README.
pub type Listing = (String, String);

pub fn readme(method: &str, command: &str, files: &[Listing], notes: &[String]) -> String {
    let mut s = format!("kapitza {method} scan\n\nReproduce with:\n  {command}\n\nFiles:\n");
    let width = files.iter().map(|(f, _)| f.len()).max().unwrap_or(0);
    for (f, d) in files {
        s.push_str(&format!("  {f:width$}  {d}\n"));
    }
    s.push_str(&format!(
        "  {:width$}  wall time of the last invocation; the only file that changes between reruns\n",
        TIMING
    ));
    if !notes.is_empty() {
        s.push_str("\nNotes:\n");
        for n in notes {
            s.push_str(&format!("  {n}\n"));
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format_round_trips() {
        for v in [0.0, 0.1, 1.0 / 3.0, 1e-12, 2.5e20, -7.25, 1e-4, 123456.0] {
            let s = fmt_f64(v);
            assert_eq!(s.parse::<f64>().unwrap(), v, "{s}");
        }
        assert_eq!(fmt_f64(1e-12), "1e-12");
        assert_eq!(fmt_f64(0.25), "0.25");
        assert_eq!(fmt_f64(f64::INFINITY), "inf");
        assert_eq!(fmt_f64(f64::NAN), "NaN");
    }

    #[test]
    fn partial_rows_are_dropped_on_resume() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = serde_json::json!({"method": "test"});
        let out = OutDir::prepare(dir.path(), &manifest).unwrap();
        assert!(!out.resume);
        fs::write(out.file("a.csv"), "x,y\n1,2\n3,4\n5,").unwrap();
        let again = OutDir::prepare(dir.path(), &manifest).unwrap();
        assert!(again.resume);
        assert_eq!(again.existing_rows("a.csv", "x,y"), vec!["1,2", "3,4"]);
        assert!(again.existing_rows("a.csv", "x,z").is_empty());
        let other = serde_json::json!({"method": "other"});
        assert!(matches!(OutDir::prepare(dir.path(), &other), Err(CliError::Config(_))));
    }
}
