use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn hsdc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hsdc")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = hsdc(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn path(dir: &TempDir, name: &str) -> String {
    dir.path().join(name).to_str().unwrap().to_string()
}

fn json(p: impl AsRef<Path>) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn generate_writes_matrix_and_sidecar() {
    let dir = TempDir::new().unwrap();
    let m = path(&dir, "t.mtx");
    ok(&["generate", "--kind", "toeplitz121", "--n", "64", "--out", &m]);
    let text = std::fs::read_to_string(&m).unwrap();
    let size = text.lines().find(|l| !l.starts_with('%')).unwrap();
    assert_eq!(size, "64 64 127");
    let side = json(format!("{m}.json"));
    assert_eq!(side["n"], 64);
    assert_eq!(side["bandwidth"], 1);
    assert_eq!(side["spectrum"].as_array().unwrap().len(), 64);
}

#[test]
fn sidecar_spectrum_matches_matrix() {
    let dir = TempDir::new().unwrap();
    let m = path(&dir, "g.mtx");
    ok(&["generate", "--n", "200", "--bandwidth", "3", "--gap", "1e-3", "--n-stop", "50", "--seed", "4", "--out", &m]);
    let side = json(format!("{m}.json"));
    let spectrum: Vec<f64> = side["spectrum"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    let a = hsdc_cli::mm::read_banded(std::io::BufReader::new(std::fs::File::open(&m).unwrap())).unwrap();
    assert_eq!(a.bandwidth(), 3);
    let exact = hsdc_core::oracle::dense_eigenvalues(&a.to_dense()).unwrap();
    for (x, y) in exact.iter().zip(&spectrum) {
        assert!((x - y).abs() <= 1e-12, "{x} vs {y}");
    }
}

#[test]
fn solve_and_verify_toeplitz() {
    let dir = TempDir::new().unwrap();
    let m = path(&dir, "t.mtx");
    let out = path(&dir, "sol");
    ok(&["generate", "--kind", "toeplitz121", "--n", "512", "--out", &m]);
    ok(&["solve", "--input", &m, "--out", &out]);
    for f in ["eigenvalues.txt", "q.bin", "run.json", "diagnostics.jsonl"] {
        assert!(dir.path().join("sol").join(f).is_file(), "{f} missing");
    }
    let run = json(dir.path().join("sol/run.json"));
    assert_eq!(run["status"], "ok");
    let report = ok(&["verify", "--input", &m, "--decomposition", &out]);
    let v: Value = serde_json::from_slice(&report.stdout).unwrap();
    assert!(v["e_lambda"].as_f64().unwrap() <= 1e-9);
    assert!(v["e_res"].as_f64().unwrap() <= 1e-8);
    assert!(v["e_orth"].as_f64().unwrap() <= 1e-8);
    assert!(v["e_q"].as_f64().unwrap() <= 1e-8);

    let csv = ok(&["verify", "--input", &m, "--decomposition", &out, "--format", "csv"]);
    let text = String::from_utf8(csv.stdout).unwrap();
    assert_eq!(text.lines().count(), 2);
    assert!(text.starts_with("input,"));
}

#[test]
fn solve_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let m = path(&dir, "g.mtx");
    ok(&["generate", "--n", "600", "--bandwidth", "2", "--seed", "9", "--n-stop", "150", "--out", &m]);
    let (a, b) = (path(&dir, "a"), path(&dir, "b"));
    ok(&["solve", "--input", &m, "--out", &a, "--n-stop", "150", "--leaf-size", "64", "--seed", "3"]);
    ok(&["solve", "--input", &m, "--out", &b, "--n-stop", "150", "--leaf-size", "64", "--seed", "3"]);
    for f in ["eigenvalues.txt", "q.bin"] {
        let x = std::fs::read(dir.path().join("a").join(f)).unwrap();
        let y = std::fs::read(dir.path().join("b").join(f)).unwrap();
        assert_eq!(x, y, "{f} differs");
    }
}

#[test]
fn tiny_gap_reports_breakdown() {
    let dir = TempDir::new().unwrap();
    let m = path(&dir, "g.mtx");
    ok(&["generate", "--n", "1024", "--bandwidth", "8", "--gap", "1e-10", "--out", &m]);
    let out = hsdc(&["solve", "--input", &m, "--out", &path(&dir, "sol"), "--shift", "spectrum"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("gap too small"), "{err}");
    let run = json(dir.path().join("sol/run.json"));
    assert_eq!(run["status"], "gap_too_small");
}

#[test]
fn sweep_writes_one_row_per_value() {
    let dir = TempDir::new().unwrap();
    let out = path(&dir, "sweep.csv");
    ok(&["sweep", "--grid", "delta", "--values", "0.3,0.6", "--n", "256", "--n-stop", "64", "--leaf-size", "32", "--out", &out]);
    let mut r = csv::Reader::from_path(&out).unwrap();
    let rows: Vec<csv::StringRecord> = r.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 2);
    let head = r.headers().unwrap().clone();
    let status = head.iter().position(|h| h == "status").unwrap();
    assert!(rows.iter().all(|row| &row[status] == "ok"));
}

#[test]
fn configuration_errors_exit_4() {
    let dir = TempDir::new().unwrap();
    let m = path(&dir, "t.mtx");
    ok(&["generate", "--kind", "clement", "--n", "32", "--out", &m]);
    for args in [
        vec!["solve", "--input", &m, "--out", "x", "--delta", "1.5"],
        vec!["solve", "--input", &m, "--out", "x", "--leaf-size", "0"],
        vec!["solve", "--input", &m, "--out", "x", "--frobnicate"],
        vec!["generate", "--kind", "hilbert", "--n", "8", "--out", "x"],
        vec!["generate", "--n", "8", "--gap", "2", "--out", &m],
    ] {
        assert_eq!(hsdc(&args).status.code(), Some(4), "{args:?}");
    }
}

#[test]
fn io_errors_exit_3() {
    let dir = TempDir::new().unwrap();
    let missing = path(&dir, "nope.mtx");
    assert_eq!(hsdc(&["solve", "--input", &missing, "--out", &path(&dir, "sol")]).status.code(), Some(3));
    let bad = path(&dir, "bad.mtx");
    std::fs::write(&bad, "not a matrix\n").unwrap();
    assert_eq!(hsdc(&["solve", "--input", &bad, "--out", &path(&dir, "sol")]).status.code(), Some(3));
}

#[test]
fn help_succeeds() {
    let out = ok(&["--help"]);
    assert!(String::from_utf8_lossy(&out.stdout).contains("Exit codes"));
}

// At high δ most of the basis comes from the randomized completion, and the
// appended columns stress the low-rank recompression.
#[test]
fn high_delta_keeps_orthogonality() {
    let dir = TempDir::new().unwrap();
    let out = path(&dir, "sweep.csv");
    ok(&["sweep", "--grid", "delta", "--values", "0.9", "--n", "1024", "--out", &out]);
    let mut r = csv::Reader::from_path(&out).unwrap();
    let head = r.headers().unwrap().clone();
    let row = r.records().next().unwrap().unwrap();
    let get = |name: &str| row[head.iter().position(|h| h == name).unwrap()].parse::<f64>().unwrap();
    assert!(get("selection_pct") < 50.0);
    assert!(get("e_res") <= 1e-8, "e_res {}", get("e_res"));
    assert!(get("e_orth") <= 1e-8, "e_orth {}", get("e_orth"));
}
