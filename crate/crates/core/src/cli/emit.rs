//! CSV and JSON writers for sweep results.

use std::collections::BTreeSet;
use std::io::Write;
use std::path::Path;

use super::sweep::SweepResult;
use crate::error::{Error, Result};

fn io(e: impl std::fmt::Display) -> Error {
    Error::IoError(e.to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// Shortest round-trip decimal, in exponent form for very small or large
/// magnitudes.
fn num(x: f64) -> String {
    let a = x.abs();
    if a != 0.0 && !(1e-4..1e16).contains(&a) {
        format!("{x:e}")
    } else {
        x.to_string()
    }
}

pub fn to_json(r: &SweepResult) -> Result<String> {
    let mut s = serde_json::to_string_pretty(r).map_err(io)?;
    s.push('\n');
    Ok(s)
}

pub fn from_json(s: &str) -> Result<SweepResult> {
    serde_json::from_str(s).map_err(|e| Error::SchemaError { path: "sweep".into(), msg: e.to_string() })
}

/// One row per record: `re_lambda, im_lambda`, matrix entries as
/// `re_/im_` pairs (row-major), diagnostics, checks, then provenance.
pub fn to_csv(r: &SweepResult) -> Result<String> {
    let mut mats: BTreeSet<(String, usize, usize)> = BTreeSet::new();
    let mut diags: BTreeSet<String> = BTreeSet::new();
    let mut checks: BTreeSet<String> = BTreeSet::new();
    for rec in &r.records {
        for (k, m) in &rec.matrices {
            mats.insert((k.clone(), m.rows, m.cols));
        }
        diags.extend(rec.diagnostics.keys().cloned());
        checks.extend(rec.checks.keys().cloned());
    }
    let mut header = vec!["re_lambda".to_string(), "im_lambda".to_string()];
    for (name, rows, cols) in &mats {
        for i in 0..*rows {
            for j in 0..*cols {
                header.push(format!("re_{name}_{i}_{j}"));
                header.push(format!("im_{name}_{i}_{j}"));
            }
        }
    }
    header.extend(diags.iter().map(|d| format!("diag_{d}")));
    header.extend(checks.iter().map(|d| format!("check_{d}")));
    header.extend(["kind", "source", "error", "config_hash"].map(String::from));
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&header).map_err(io)?;
    for rec in &r.records {
        let mut row = vec![num(rec.lambda[0]), num(rec.lambda[1])];
        for (name, rows, cols) in &mats {
            let m = rec.matrices.get(name).filter(|m| m.rows == *rows && m.cols == *cols);
            for k in 0..rows * cols {
                match m {
                    Some(m) => {
                        row.push(num(m.data[k][0]));
                        row.push(num(m.data[k][1]));
                    }
                    None => row.extend([String::new(), String::new()]),
                }
            }
        }
        row.extend(diags.iter().map(|d| rec.diagnostics.get(d).map(|&x| num(x)).unwrap_or_default()));
        row.extend(checks.iter().map(|d| rec.checks.get(d).map(|&b| u8::from(b).to_string()).unwrap_or_default()));
        row.push(rec.kind.clone());
        row.push(rec.source.clone());
        row.push(rec.error.clone().unwrap_or_default());
        row.push(rec.config_hash.clone());
        w.write_record(&row).map_err(io)?;
    }
    String::from_utf8(w.into_inner().map_err(io)?).map_err(io)
}

pub fn render(r: &SweepResult, format: Format) -> Result<String> {
    match format {
        Format::Csv => to_csv(r),
        Format::Json => to_json(r),
    }
}

/// Write `r` to `path`, or to standard output when `path` is `None`.
pub fn emit(r: &SweepResult, format: Format, path: Option<&Path>) -> Result<()> {
    let text = render(r, format)?;
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| Error::IoError(format!("{}: {e}", p.display()))),
        None => std::io::stdout().lock().write_all(text.as_bytes()).map_err(io),
    }
}
