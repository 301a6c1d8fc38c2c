//! End-to-end checks of the command-line interface through the compiled
//! binary.

use std::path::Path;
use std::process::{Command, Output};

fn snmf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_snmf"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_demo_matrix(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("v.csv");
    let out = snmf(&[
        "synth",
        "--rows",
        "12",
        "--cols",
        "9",
        "--seed",
        "5",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    path
}

#[test]
fn factorize_writes_factors_and_trace() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_demo_matrix(dir.path());
    let out_w = dir.path().join("w.csv");
    let out_h = dir.path().join("h.csv");
    let trace = dir.path().join("trace.csv");
    let out = snmf(&[
        "factorize",
        "--input",
        input.to_str().unwrap(),
        "--k",
        "2",
        "--beta",
        "1",
        "--alpha",
        "0.5",
        "--method",
        "mm",
        "--max-iter",
        "80",
        "--out-w",
        out_w.to_str().unwrap(),
        "--out-h",
        out_h.to_str().unwrap(),
        "--trace",
        trace.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let w_text = std::fs::read_to_string(&out_w).unwrap();
    assert_eq!(w_text.lines().count(), 12);
    let h_text = std::fs::read_to_string(&out_h).unwrap();
    assert_eq!(h_text.lines().count(), 2);
    // rescaled dictionary: columns sum to one
    for k in 0..2 {
        let col_sum: f64 = w_text
            .lines()
            .map(|l| l.split(',').nth(k).unwrap().parse::<f64>().unwrap())
            .sum();
        assert!((col_sum - 1.0).abs() < 1e-9, "column {k} sums to {col_sum}");
    }
    // trace rows: header + iteration 0 + one per sweep
    let trace_text = std::fs::read_to_string(&trace).unwrap();
    let rows = trace_text.lines().count() - 1;
    assert!(rows >= 2);
    assert!(trace_text.starts_with("iteration,objective,cpu_seconds,norm_residual"));
}

#[test]
fn factorize_max_iter_zero_echoes_init() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_demo_matrix(dir.path());
    let out_w = dir.path().join("w.csv");
    let out_h = dir.path().join("h.csv");
    let out = snmf(&[
        "factorize",
        "--input",
        input.to_str().unwrap(),
        "--k",
        "2",
        "--beta",
        "2",
        "--alpha",
        "0",
        "--method",
        "mm",
        "--max-iter",
        "0",
        "--out-w",
        out_w.to_str().unwrap(),
        "--out-h",
        out_h.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("max_iter"));
    assert!(out_w.exists() && out_h.exists());
}

#[test]
fn lagrangian_beta_range_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_demo_matrix(dir.path());
    let out = snmf(&[
        "factorize",
        "--input",
        input.to_str().unwrap(),
        "--k",
        "2",
        "--beta",
        "1.3",
        "--alpha",
        "1",
        "--method",
        "lagr",
        "--out-w",
        dir.path().join("w.csv").to_str().unwrap(),
        "--out-h",
        dir.path().join("h.csv").to_str().unwrap(),
    ]);
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("beta <= 1"), "stderr: {stderr}");
}

#[test]
fn benchmark_report_has_a_row_per_method_and_seed() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_demo_matrix(dir.path());
    let report = dir.path().join("report.csv");
    let out = snmf(&[
        "benchmark",
        "--input",
        input.to_str().unwrap(),
        "--k",
        "2",
        "--beta",
        "0.5",
        "--alpha",
        "0.5",
        "--methods",
        "mm,heur",
        "--seeds",
        "2",
        "--max-iter",
        "60",
        "--report",
        report.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&report).unwrap();
    let data_rows = text
        .lines()
        .filter(|l| l.starts_with("mm,") || l.starts_with("heur,"))
        .count();
    assert_eq!(data_rows, 4);
    assert_eq!(text.lines().filter(|l| l.starts_with("# summary,")).count(), 3);
}

#[test]
fn benchmark_json_layout() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_demo_matrix(dir.path());
    let report = dir.path().join("report.json");
    let out = snmf(&[
        "benchmark",
        "--input",
        input.to_str().unwrap(),
        "--k",
        "2",
        "--beta",
        "1",
        "--alpha",
        "0.1",
        "--methods",
        "mm",
        "--seeds",
        "1",
        "--max-iter",
        "40",
        "--layout",
        "json",
        "--report",
        report.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(&report).unwrap();
    assert!(text.contains("\"runs\"") && text.contains("\"summary\""));
}

#[test]
fn verify_suites_pass_and_zero_trials_is_vacuous() {
    for suite in ["majorization", "descent", "cross-method"] {
        let out = snmf(&["verify", "--suite", suite, "--trials", "20", "--seed", "3"]);
        assert!(
            out.status.success(),
            "suite {suite}: {}",
            String::from_utf8_lossy(&out.stdout)
        );
        assert!(String::from_utf8_lossy(&out.stdout).contains("0 violations"));
    }
    let out = snmf(&["verify", "--suite", "kkt", "--trials", "0"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("vacuous"));
}

#[test]
fn synthetic_descent_demo_produces_monotone_trace() {
    // the negative-beta setup the MM method is advertised on: the trace
    // written by factorize must be non-increasing
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("v.csv");
    let out = snmf(&[
        "synth", "--rows", "50", "--cols", "40", "--seed", "1",
        "--out", input.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let trace = dir.path().join("trace.csv");
    let out = snmf(&[
        "factorize",
        "--input", input.to_str().unwrap(),
        "--k", "3",
        "--beta", "-0.5",
        "--alpha", "5",
        "--reg", "l1",
        "--method", "mm",
        "--max-iter", "60",
        "--out-w", dir.path().join("w.csv").to_str().unwrap(),
        "--out-h", dir.path().join("h.csv").to_str().unwrap(),
        "--trace", trace.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&trace).unwrap();
    let objectives: Vec<f64> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert!(objectives.len() >= 2);
    for pair in objectives.windows(2) {
        assert!(
            pair[1] <= pair[0] * (1.0 + 1e-9),
            "objective increased: {} -> {}",
            pair[0],
            pair[1]
        );
    }
}

#[test]
fn sparse_coordinate_input_is_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("v.coord");
    std::fs::write(&input, "3 4 4\n1 1 2.0\n2 3 1.5\n3 2 4.0\n3 4 0.5\n").unwrap();
    let out = snmf(&[
        "factorize",
        "--input",
        input.to_str().unwrap(),
        "--format",
        "sparse-coord",
        "--k",
        "2",
        "--beta",
        "2",
        "--alpha",
        "0.1",
        "--method",
        "mm",
        "--max-iter",
        "40",
        "--out-w",
        dir.path().join("w.csv").to_str().unwrap(),
        "--out-h",
        dir.path().join("h.csv").to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
