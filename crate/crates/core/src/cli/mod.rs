//! Batch front end: problem files, sweeps, verification and output.

pub mod emit;
pub mod problem;
pub mod sweep;

use std::path::{Path, PathBuf};

pub use emit::{emit, render, Format};
pub use problem::{parse_problem, parse_problem_str, ProblemFile};
pub use sweep::{config_hash, run_sweep, Command, Record, SweepOptions, SweepResult};

use crate::error::{Error, Result};

/// Problem files named by `inputs`: files as given, directories expanded to
/// their `*.json` entries in name order.
pub fn collect_inputs(inputs: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in inputs {
        if p.is_dir() {
            let mut v: Vec<PathBuf> = std::fs::read_dir(p)
                .map_err(|e| Error::IoError(format!("{}: {e}", p.display())))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|q| q.extension().is_some_and(|x| x == "json"))
                .collect();
            v.sort();
            out.extend(v);
        } else {
            out.push(p.clone());
        }
    }
    if out.is_empty() {
        return Err(Error::IoError("no problem files given".into()));
    }
    Ok(out)
}

fn source_name(p: &Path) -> String {
    p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| p.display().to_string())
}

/// Parse every input and run `cmd` on each, merging the records.
pub fn run_files(inputs: &[PathBuf], cmd: Command, opts: &SweepOptions) -> Result<SweepResult> {
    let files = collect_inputs(inputs)?;
    let problems = files.iter().map(|f| Ok((source_name(f), parse_problem(f)?))).collect::<Result<Vec<_>>>()?;
    let mut acc = SweepResult { command: cmd, records: Vec::new() };
    for (name, p) in &problems {
        acc = acc.merge(run_sweep(p, name, cmd, opts)?);
    }
    Ok(acc)
}
