use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;

use evenop::cli::problem::GridSpec;
use evenop::cli::{emit, run_files, Command, Format, SweepOptions};

/// Weyl functions, characteristic matrices, Green kernels and resolvents
/// of even-order matrix differential operators.
#[derive(Debug, Parser)]
#[command(name = "evenop", version)]
struct Args {
    #[arg(value_enum)]
    command: Command,
    /// Problem files or directories of `*.json` problems.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    /// λ grid override: `list:RE,IM;RE,IM` or `rect:re0,re1,nre,im0,im1,nim`.
    #[arg(long)]
    grid: Option<String>,
    /// Convergence tolerance of the m-function limit.
    #[arg(long)]
    tol: Option<f64>,
    /// First cutoff for a singular endpoint.
    #[arg(long)]
    cutoff: Option<f64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Exit with status 1 if any record carries an error.
    #[arg(long)]
    strict: bool,
    /// Output file (default: standard output).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let grid = match args.grid.as_deref().map(GridSpec::parse_flag).transpose() {
        Ok(g) => g,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let opts = SweepOptions { grid, tol: args.tol, cutoff: args.cutoff };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = args.threads {
        pool = pool.num_threads(n);
    }
    let pool = match pool.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let start = Instant::now();
    let result = match pool.install(|| run_files(&args.inputs, args.command, &opts)) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    if let Err(e) = emit(&result, args.format, args.out.as_deref()) {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    let failed = result.failed_checks();
    let errors = result.error_count();
    eprintln!(
        "{}: {} records, {} failed checks, {} with errors, {:.2}s",
        args.command.name(),
        result.records.len(),
        failed.len(),
        errors,
        start.elapsed().as_secs_f64()
    );
    for f in &failed {
        eprintln!("FAILED {f}");
    }
    if (args.command == Command::Verify && !failed.is_empty()) || (args.strict && errors > 0) {
        return ExitCode::from(1);
    }
    ExitCode::SUCCESS
}
