use std::path::Path;
use std::process::{Command, Output};

use margspline::application::SyntheticPair;
use margspline::io::write_columns;
use serde_json::Value;

fn margspline(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_margspline"))
        .args(["--threads", "1"])
        .args(args)
        .env("MARGSPLINE_OUT", out)
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_pair(dir: &Path) {
    let pair = SyntheticPair::generate(300, 600, false, 4);
    write_columns(&dir.join("h.csv"), &["x", "z", "y"], &[&pair.h.x, &pair.h.z, &pair.h.y]).unwrap();
    write_columns(&dir.join("v.csv"), &["x", "y"], &[&pair.v.x, &pair.v.y]).unwrap();
}

fn report(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn usage_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(margspline(&["simulate", "--no-such-flag"], dir.path()).status.code(), Some(1));
    assert_eq!(margspline(&["--help"], dir.path()).status.code(), Some(0));
    // no reference tuning values exist for this basis size
    let o = margspline(&["simulate", "--n", "400", "--px", "5", "--pz", "5"], dir.path());
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
}

#[test]
fn bad_cells_are_reported_by_row_and_column() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("h.csv"), "x,z,y\n0.1,0.2,1\n0.4,0.3,0\n0.5,nan?,1\n").unwrap();
    std::fs::write(dir.path().join("v.csv"), "x,y\n0.1,1\n0.2,0\n").unwrap();
    let h = dir.path().join("h.csv");
    let v = dir.path().join("v.csv");
    let o = margspline(&["fit", "--h", h.to_str().unwrap(), "--v", v.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let msg = stderr(&o);
    assert!(msg.contains("row 3") && msg.contains("column z"), "{msg}");

    let o = margspline(&["fit", "--h", "/nonexistent/h.csv", "--v", v.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn config_file_overrides_flags_and_rejects_unknown_keys() {
    let dir = tempfile::tempdir().unwrap();
    write_pair(dir.path());
    let h = dir.path().join("h.csv");
    let v = dir.path().join("v.csv");
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"analysis": {"lambda1": 2.5, "lambda2": 4.0}}"#).unwrap();
    let args = ["--config", cfg.to_str().unwrap(), "fit", "--h", h.to_str().unwrap(), "--v", v.to_str().unwrap()];
    let o = margspline(&[&args[..], &["--lambda1", "1", "--v-lambda1", "1"]].concat(), dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let r = report(&dir.path().join("fit_report.json"));
    assert_eq!(r["schema_version"], 1);
    assert_eq!(r["command"], "fit");
    assert_eq!(r["result"]["application"]["lambda1"], 2.5);
    assert_eq!(r["result"]["application"]["lambda2"], 4.0);

    std::fs::write(&cfg, r#"{"analysis": {"lamda1": 2.5}}"#).unwrap();
    let o = margspline(&args, dir.path());
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    assert!(stderr(&o).contains("lamda1"));
}

#[test]
fn output_directory_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("nested");
    let o = margspline(&["simulate", "--n", "100", "--nsim", "2", "--seed", "3"], &out);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["simulate_report.json", "simulate_summary.csv", "simulate_marginals.csv"] {
        assert!(out.join(f).is_file(), "missing {f}");
    }
}

#[test]
fn zero_lambda2_makes_fit2_equal_fit1() {
    let dir = tempfile::tempdir().unwrap();
    write_pair(dir.path());
    let h = dir.path().join("h.csv");
    let v = dir.path().join("v.csv");
    let o = margspline(
        &[
            "fit",
            "--h",
            h.to_str().unwrap(),
            "--v",
            v.to_str().unwrap(),
            "--lambda1",
            "1",
            "--lambda2",
            "0",
            "--v-lambda1",
            "1",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let r = report(&dir.path().join("fit_report.json"));
    let models = r["result"]["application"]["models"].as_array().unwrap();
    let beta =
        |i: usize| -> Vec<f64> { models[i]["beta"].as_array().unwrap().iter().map(|b| b.as_f64().unwrap()).collect() };
    let (b1, b2) = (beta(1), beta(2));
    let gap = b1.iter().zip(&b2).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
    assert!(gap < 1e-10, "Fit1 and Fit2 differ by {gap}");
}
