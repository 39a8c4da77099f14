use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use menger_core::estimators::{CurvatureEstimate, MCEstimate};
use menger_core::harness::SuiteReport;
use menger_core::multiscale::FlatnessReport;
use menger_core::planes::Beta2Result;
use menger_core::WeightedPointCloud;
use serde::de::DeserializeOwned;
use serde_json::Value;
use tempfile::TempDir;

fn menger(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_menger")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn generate(dir: &Path, name: &str, args: &[&str]) -> PathBuf {
    let path = dir.join(name);
    let mut all = vec!["generate"];
    all.extend_from_slice(args);
    all.extend_from_slice(&["--out", path.to_str().unwrap()]);
    let o = menger(&all);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    path
}

/// Parses the `result` field of a JSON envelope into `T`.
fn result<T: DeserializeOwned>(o: &Output) -> T {
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_str(&stdout(o)).unwrap();
    serde_json::from_value(v["result"].clone()).unwrap()
}

#[test]
fn cantor_level_two_has_sixteen_rows() {
    let dir = TempDir::new().unwrap();
    let p = generate(dir.path(), "c.csv", &["cantor", "--level", "2"]);
    let text = std::fs::read_to_string(&p).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("dim=2"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 16);
    for r in rows {
        let w: f64 = r.rsplit(',').next().unwrap().parse().unwrap();
        assert_eq!(w, 1.0 / 16.0);
    }
}

#[test]
fn plane_rows_and_determinism() {
    let dir = TempDir::new().unwrap();
    let a = generate(dir.path(), "a.csv", &["plane", "--d", "1", "--D", "2", "--n", "100", "--seed", "4"]);
    let b = generate(dir.path(), "b.csv", &["plane", "--d", "1", "--D", "2", "--n", "100", "--seed", "4"]);
    let c = generate(dir.path(), "c.csv", &["plane", "--d", "1", "--D", "2", "--n", "100", "--seed", "5"]);
    let (a, b, c) = (std::fs::read(a).unwrap(), std::fs::read(b).unwrap(), std::fs::read(c).unwrap());
    assert_eq!(a, b);
    assert_ne!(a, c);
    assert_eq!(String::from_utf8(a).unwrap().lines().count(), 101);
}

#[test]
fn generated_files_read_back() {
    let dir = TempDir::new().unwrap();
    for (name, args) in [
        ("s.csv", vec!["sphere", "--D", "3", "--n", "50"]),
        ("g.csv", vec!["graph", "--d", "2", "--D", "3", "--n", "50"]),
    ] {
        let p = generate(dir.path(), name, &args);
        let cloud = WeightedPointCloud::read_csv(&p, 2).unwrap();
        assert_eq!(cloud.len(), 50);
        assert_eq!(cloud.dim(), 3);
    }
}

#[test]
fn planar_input_is_flat() {
    let dir = TempDir::new().unwrap();
    let p = generate(dir.path(), "p.csv", &["plane", "--d", "2", "--D", "3", "--n", "300"]);
    let input = p.to_str().unwrap();
    let beta: Beta2Result = result(&menger(&["beta", "--input", input, "--d", "2"]));
    assert!(beta.value <= 1e-10);
    let flat: FlatnessReport = result(&menger(&["flatness", "--input", input, "--d", "2"]));
    assert!(flat.total <= 1e-10);
    assert!(!flat.terms.is_empty());
    let cont: FlatnessReport = result(&menger(&[
        "flatness", "--input", input, "--d", "2", "--mode", "continuous", "--subsample", "20",
    ]));
    assert!(cont.total <= 1e-10);
    let curv: CurvatureEstimate = result(&menger(&["curvature", "--input", input, "--d", "2", "--samples", "5000"]));
    assert!(curv.curvature.estimate <= 1e-10);
    assert!(!curv.curvature.exact);
}

#[test]
fn cantor_curvature_is_positive_and_exact() {
    let dir = TempDir::new().unwrap();
    let p = generate(dir.path(), "c.csv", &["cantor", "--level", "3"]);
    let curv: CurvatureEstimate = result(&menger(&["curvature", "--input", p.to_str().unwrap(), "--d", "1"]));
    assert!(curv.curvature.exact);
    assert_eq!(curv.curvature.n_samples, 64 * 64 * 64);
    assert!(curv.curvature.estimate > 0.0);
}

#[test]
fn separated_curvature_with_ball() {
    let dir = TempDir::new().unwrap();
    let p = generate(dir.path(), "c.csv", &["sphere", "--D", "2", "--n", "300"]);
    let input = p.to_str().unwrap();
    let o = menger(&["curvature", "--input", input, "--ball", "1,0:1", "--lambda", "0.3", "--samples", "2000"]);
    let est: MCEstimate = result(&o);
    assert!(est.estimate > 0.0);
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["command"], "curvature");
    assert_eq!(v["config"]["ball"]["radius"], 1.0);
    assert_eq!(v["config"]["lambda"], 0.3);
}

#[test]
fn verify_geometry_passes() {
    let o = menger(&["verify", "geometry", "--seed", "3"]);
    assert_eq!(o.status.code(), Some(0));
    let report: SuiteReport = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(report.passed);
    assert_eq!(report.seed, 3);
    assert!(report.checks.iter().any(|c| c.name == "geometry.product_formula"));
}

#[test]
fn planted_violation_exits_one_and_names_invariant() {
    let o = menger(&["verify", "planted"]);
    assert_eq!(o.status.code(), Some(1));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["failures"], serde_json::json!(["sequences.scale_bounds"]));
    assert!(String::from_utf8_lossy(&o.stderr).contains("sequences.scale_bounds"));
}

#[test]
fn verify_csv_format() {
    let o = menger(&["verify", "sequences", "--format", "csv"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.starts_with("name,passed,value,limit,detail\n"));
    assert!(text.contains("sequences.golden,true"));
}

#[test]
fn input_errors_exit_two() {
    let dir = TempDir::new().unwrap();
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "dim=2\n0,0,1\n1,0,-1\n").unwrap();
    let o = menger(&["beta", "--input", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("weight"));
    assert_eq!(menger(&["beta", "--input", "/nonexistent.csv"]).status.code(), Some(2));
    assert_eq!(menger(&["verify", "nonsense"]).status.code(), Some(2));
    assert_eq!(menger(&["ratio", "thm99", "--input", bad.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(menger(&["generate", "torus"]).status.code(), Some(2));
    let good = generate(dir.path(), "p.csv", &["plane", "--n", "20"]);
    let o = menger(&["beta", "--input", good.to_str().unwrap(), "--ball", "0,0,0:1"]);
    assert_eq!(o.status.code(), Some(2));
    let o = menger(&["beta", "--input", good.to_str().unwrap(), "--ball", "0,0:-1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn planar_separated_ratio_has_zero_lhs() {
    let dir = TempDir::new().unwrap();
    let p = generate(dir.path(), "p.csv", &["plane", "--n", "200"]);
    let o = menger(&[
        "ratio", "prop11", "--input", p.to_str().unwrap(), "--samples", "2000", "--balls", "4", "--format", "csv",
    ]);
    assert!(o.status.success());
    let text = stdout(&o);
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let lhs = header.iter().position(|h| *h == "lhs").unwrap();
    let flag = header.iter().position(|h| *h == "flag").unwrap();
    let rows: Vec<Vec<String>> = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    assert_eq!(rows.len(), 12);
    for r in rows {
        assert!(r[lhs].parse::<f64>().unwrap().abs() <= 1e-20);
        assert_eq!(r[flag], "zero_over_zero");
    }
}

#[test]
fn ratio_json_and_determinism() {
    let dir = TempDir::new().unwrap();
    let p = generate(dir.path(), "c.csv", &["sphere", "--D", "2", "--n", "200"]);
    let args = ["ratio", "thm13", "--input", p.to_str().unwrap(), "--samples", "2000", "--balls", "3", "--seed", "2"];
    let a = menger(&args);
    let b = menger(&args);
    assert_eq!(a.stdout, b.stdout);
    let v: Value = serde_json::from_str(&stdout(&a)).unwrap();
    let rows = v["result"].as_array().unwrap();
    assert_eq!(rows.len(), 3);
    for r in rows {
        let ratio = r["ratio"].as_f64().unwrap();
        assert!((ratio - r["lhs"].as_f64().unwrap() / r["mass"].as_f64().unwrap()).abs() <= 1e-12 * ratio);
    }
}

#[test]
fn thread_count_does_not_change_output() {
    let dir = TempDir::new().unwrap();
    let p = generate(dir.path(), "c.csv", &["sphere", "--D", "2", "--n", "200"]);
    let run = |t: &str| {
        Command::new(env!("CARGO_BIN_EXE_menger"))
            .args(["curvature", "--input", p.to_str().unwrap(), "--samples", "20000", "--exact-limit", "0"])
            .env("MENGER_THREADS", t)
            .output()
            .unwrap()
            .stdout
    };
    assert_eq!(run("1"), run("4"));
}
