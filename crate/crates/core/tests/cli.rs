use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_trace-tucker"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Rows of a CSV file as header → value maps.
fn records(path: &Path) -> Vec<std::collections::HashMap<String, String>> {
    let mut rdr = csv::Reader::from_path(path).unwrap();
    let header = rdr.headers().unwrap().clone();
    rdr.records()
        .map(|r| header.iter().map(String::from).zip(r.unwrap().iter().map(String::from)).collect())
        .collect()
}

#[test]
fn gen_then_decompose_recovers_truth() {
    let tmp = TempDir::new().unwrap();
    let data = tmp.path().join("data");
    ok(&["gen", "--dims", "20,20,20", "--true-rank", "3", "--delta", "0.01", "--seed", "4", "--out", s(&data)]);
    for f in ["clean.tnsr", "noisy.tnsr", "truth_core.tnsr", "truth_factor_1.tnsr", "truth_factor_3.tnsr", "spec.kv"] {
        assert!(data.join(f).exists(), "{f} missing");
    }
    let out = tmp.path().join("ctd");
    ok(&[
        "decompose",
        s(&data.join("noisy.tnsr")),
        "--method",
        "ctd",
        "--reference",
        s(&data.join("clean.tnsr")),
        "--out",
        s(&out),
    ]);
    let summary = records(&out.join("summary.csv"));
    assert_eq!(summary.len(), 1);
    assert_eq!(summary[0]["est_ranks"], "3x3x3");
    let rse: f64 = summary[0]["rse"].parse().unwrap();
    assert!(rse <= 1e-2, "rse {rse}");
    for f in ["core.tnsr", "factor_1.tnsr", "factor_2.tnsr", "factor_3.tnsr", "reconstruction.tnsr", "trace.csv"] {
        assert!(out.join(f).exists(), "{f} missing");
    }
}

#[test]
fn zero_tensor_is_not_an_error() {
    let tmp = TempDir::new().unwrap();
    let input = tmp.path().join("zero.csv");
    std::fs::write(&input, "0\n".repeat(60)).unwrap();
    for method in ["ctd", "hooi", "nctd"] {
        let out = tmp.path().join(method);
        ok(&["decompose", s(&input), "--dims", "3x4x5", "--method", method, "--ranks", "2", "--reference", s(&input), "--out", s(&out)]);
        let summary = records(&out.join("summary.csv"));
        assert_eq!(summary[0]["rse"], "", "{method}");
        assert_eq!(summary[0]["est_ranks"], "0x0x0", "{method}");
    }
}

#[test]
fn csv_input_with_dims() {
    let tmp = TempDir::new().unwrap();
    let input = tmp.path().join("t.csv");
    let values: Vec<String> = (0..24).map(|k| format!("{}", (k % 5) as f64 - 1.5)).collect();
    std::fs::write(&input, format!("value\n{}\n", values.join("\n"))).unwrap();
    let out = tmp.path().join("o");
    ok(&["decompose", s(&input), "--dims", "2,3,4", "--method", "hosvd", "--ranks", "2,3,4", "--out", s(&out)]);
    let summary = records(&out.join("summary.csv"));
    assert_eq!(summary[0]["dims"], "2x3x4");
    // Without extents a CSV cannot be shaped.
    assert_eq!(run(&["decompose", s(&input), "--method", "hosvd", "--ranks", "2", "--out", s(&out)]).status.code(), Some(1));
}

#[test]
fn bad_input_exits_with_failure() {
    let tmp = TempDir::new().unwrap();
    let input = tmp.path().join("bad.tnsr");
    std::fs::write(&input, "not a tensor").unwrap();
    let out = run(&["decompose", s(&input), "--out", s(&tmp.path().join("o"))]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
    let missing = run(&["decompose", s(&tmp.path().join("missing.tnsr"))]);
    assert_eq!(missing.status.code(), Some(1));
    let two = run(&["decompose", s(&input), "--method", "ctd,hooi"]);
    assert_eq!(two.status.code(), Some(1));
}

#[test]
fn hitting_max_iter_exits_with_two() {
    let tmp = TempDir::new().unwrap();
    let data = tmp.path().join("data");
    ok(&["gen", "--dims", "12,12,12", "--true-rank", "2", "--delta", "0.05", "--out", s(&data)]);
    let out = run(&["decompose", s(&data.join("noisy.tnsr")), "--method", "ctd", "--max-iter", "2", "--out", s(&tmp.path().join("o"))]);
    assert_eq!(out.status.code(), Some(2));
    let summary = records(&tmp.path().join("o").join("summary.csv"));
    assert_eq!(summary[0]["converged"], "0");
}

#[test]
fn benchmark_rows_and_config_precedence() {
    let tmp = TempDir::new().unwrap();
    let cfg = tmp.path().join("bench.kv");
    std::fs::write(&cfg, "methods = hosvd\ndims = 10,10,10\ntrue_rank = 2\nrepeats = 3\ndelta = 0.01\n").unwrap();
    let csv_path = tmp.path().join("bench.csv");
    ok(&["benchmark", "--config", s(&cfg), "--repeats", "1", "--out", s(&csv_path)]);
    let rows = records(&csv_path);
    assert_eq!(rows.len(), 2);
    assert_eq!(rows.iter().filter(|r| r["kind"] == "trial").count(), 1);
    assert_eq!(rows.iter().filter(|r| r["kind"] == "mean").count(), 1);
    assert!(rows.iter().all(|r| r["method"] == "hosvd" && r["dims"] == "10x10x10"));
}

#[test]
fn phase_grid_size() {
    let tmp = TempDir::new().unwrap();
    let csv_path = tmp.path().join("phase.csv");
    ok(&[
        "phase", "--dims", "10,10,10", "--true-rank", "2", "--ranks", "2,3", "--axis", "noise", "--delta", "0,0.01,0.02",
        "--repeats", "1", "--out", s(&csv_path),
    ]);
    let rows = records(&csv_path);
    // Default methods hooi and ctd, 2 ranks × 3 levels each.
    assert_eq!(rows.len(), 12);
    assert!(rows.iter().all(|r| r["axis"] == "noise" && r["trials"] == "1"));
}

#[test]
fn trace_decreases_and_nctd_settles() {
    let tmp = TempDir::new().unwrap();
    let csv_path = tmp.path().join("trace.csv");
    ok(&["trace", "--tol", "1e-14", "--max-iter", "60", "--out", s(&csv_path)]);
    let rows = records(&csv_path);
    let change = |method: &str, iter: &str| -> f64 {
        rows.iter().find(|r| r["method"] == method && r["iter"] == iter).unwrap()["rel_change"].parse().unwrap()
    };
    for m in ["ctd", "nctd"] {
        assert!(change(m, "50") < change(m, "5"), "{m}");
    }
    assert!(rows.iter().any(|r| r["method"] == "hooi"));

    let default_path = tmp.path().join("default.csv");
    ok(&["trace", "--method", "nctd", "--out", s(&default_path)]);
    let nctd = records(&default_path);
    let last: f64 = nctd.last().unwrap()["residual"].parse().unwrap();
    assert!(last < 1e-5, "final residual {last}");
}
