use std::path::{Path, PathBuf};
use std::process::Command as Process;

use evenop::cli::emit::{from_json, to_csv, to_json};
use evenop::cli::problem::GridSpec;
use evenop::cli::{collect_inputs, parse_problem, parse_problem_str, run_files, run_sweep, Command, SweepOptions};
use evenop::Error;

fn corpus() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
}

fn problem(name: &str) -> PathBuf {
    corpus().join(format!("{name}.json"))
}

fn two_points() -> SweepOptions {
    SweepOptions { grid: Some(GridSpec::parse_flag("list:0,1;1,1").unwrap()), ..Default::default() }
}

#[test]
fn every_corpus_problem_parses() {
    let files = collect_inputs(&[corpus()]).unwrap();
    assert_eq!(files.len(), 11);
    for f in files {
        let p = parse_problem(&f).unwrap();
        p.validate().unwrap();
    }
}

#[test]
fn unknown_field_is_reported_with_path() {
    let text = r#"{"n": 1, "d": 1, "endpoint": {"regular": 1.0}, "coeffs": "free", "tau": "tau0", "lamda": 3}"#;
    match parse_problem_str(text, "typo") {
        Err(Error::SchemaError { path, .. }) => assert!(path.starts_with("typo"), "{path}"),
        other => panic!("expected schema error, got {other:?}"),
    }
}

#[test]
fn mfun_sweep_gives_one_csv_row_per_lambda() {
    let p = parse_problem(&problem("halfline_free_tau0")).unwrap();
    let r = run_sweep(&p, "tau0", Command::Mfun, &two_points()).unwrap();
    assert_eq!(r.records.len(), 2);
    let csv = to_csv(&r).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[0].starts_with("re_lambda,im_lambda"));
}

#[test]
fn mfun_matches_closed_form_on_the_half_line() {
    let p = parse_problem(&problem("halfline_free_tau0")).unwrap();
    let r = run_sweep(&p, "tau0", Command::Mfun, &two_points()).unwrap();
    let expected = [[0.5f64.sqrt(), 0.5f64.sqrt()], [0.3217971264527912, 0.7768869870150186]];
    for (rec, want) in r.records.iter().zip(expected) {
        let m = &rec.matrices["m"].data[0];
        assert!((m[0] - want[0]).abs() < 1e-6 && (m[1] - want[1]).abs() < 1e-6, "{:?} vs {want:?}", m);
    }
}

#[test]
fn json_round_trip_and_determinism() {
    let inputs = vec![problem("regular_free_random_sa"), problem("halfline_free_dirichlet")];
    let a = run_files(&inputs, Command::Charmat, &two_points()).unwrap();
    let b = run_files(&inputs, Command::Charmat, &two_points()).unwrap();
    let text = to_json(&a).unwrap();
    assert_eq!(text, to_json(&b).unwrap());
    let back = from_json(&text).unwrap();
    assert_eq!(to_json(&back).unwrap(), text);
    assert_eq!(back.records.len(), 4);
}

#[test]
fn config_hash_depends_on_overrides() {
    let p = parse_problem(&problem("regular_free_dirichlet")).unwrap();
    let a = run_sweep(&p, "x", Command::Mfun, &two_points()).unwrap();
    let opts = SweepOptions { tol: Some(1e-9), ..two_points() };
    let b = run_sweep(&p, "x", Command::Mfun, &opts).unwrap();
    assert_ne!(a.records[0].config_hash, b.records[0].config_hash);
}

fn evenop(args: &[&str]) -> std::process::Output {
    Process::new(env!("CARGO_BIN_EXE_evenop")).args(args).output().unwrap()
}

#[test]
fn binary_exit_codes() {
    let good = problem("regular_free_dirichlet");
    let good = good.to_str().unwrap();
    let ok = evenop(&["mfun", good, "--grid", "list:0,1", "--format", "csv"]);
    assert_eq!(ok.status.code(), Some(0));
    assert_eq!(String::from_utf8(ok.stdout).unwrap().lines().count(), 2);

    let missing = evenop(&["mfun", "/nonexistent/problem.json"]);
    assert_eq!(missing.status.code(), Some(2));

    let bad_grid = evenop(&["mfun", good, "--grid", "polar:1"]);
    assert_eq!(bad_grid.status.code(), Some(2));

    let half = problem("halfline_free_tau0");
    let half = half.to_str().unwrap();
    let lenient = evenop(&["mfun", half, "--grid", "list:1,0"]);
    assert_eq!(lenient.status.code(), Some(0));
    let strict = evenop(&["mfun", half, "--grid", "list:1,0", "--strict"]);
    assert_eq!(strict.status.code(), Some(1));
}

#[test]
fn binary_verify_passes_on_a_problem() {
    let f = problem("halfline_rational_robin");
    let out = evenop(&["verify", f.to_str().unwrap(), "--threads", "2"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
}
