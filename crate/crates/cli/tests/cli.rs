//! End-to-end runs of the `shapecon` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn shapecon(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_shapecon")).args(args).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

fn json(out: &Output) -> serde_json::Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn fits_decreasing_and_log_concave_densities() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "x.csv", "x\n0.3\n0.1\n1.2\n0.7\n2.5\n0.05\n");
    let g = json(&shapecon(&["fit-grenander", "--input", &input, "--json"]));
    let levels = g["levels"].as_array().unwrap();
    assert!(levels.windows(2).all(|w| w[1].as_f64() <= w[0].as_f64()));

    let out_file = dir.path().join("fit.json");
    let f = json(&shapecon(&["fit-lcmle", "--input", &input, "--json", "--output", out_file.to_str().unwrap()]));
    assert_eq!(f["knots"].as_array().unwrap().len(), 6);
    let saved: serde_json::Value = serde_json::from_str(&fs::read_to_string(&out_file).unwrap()).unwrap();
    assert_eq!(saved, f);

    let s = shapecon(&["fit-smoothed", "--input", &input]);
    assert!(s.status.success());
    assert!(String::from_utf8_lossy(&s.stdout).contains("a_hat"));
}

#[test]
fn score_and_efficiency_tables() {
    let s = json(&shapecon(&["score", "--model", "logistic", "--grid", "1025", "--json"]));
    let u: Vec<f64> = s["ugrid"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    let slopes: Vec<f64> = s["slopes"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    assert_eq!((u[0], u[u.len() - 1]), (0.0, 1.0));
    assert_eq!(slopes.len(), u.len() - 1);
    assert!(slopes.windows(2).all(|w| w[1] <= w[0]));
    // the logistic score is ½ − u on the probability scale
    let mid = slopes.len() / 2;
    assert!((slopes[mid] - (0.5 - 0.5 * (u[mid] + u[mid + 1]))).abs() < 1e-2);

    let a = json(&shapecon(&["are", "--model", "gaussian,cauchy", "--json"]));
    let rows = a.as_array().unwrap();
    assert_eq!(rows.len(), 2);
    let cauchy = rows[1]["are_star"].as_f64().unwrap();
    assert!((0.865..1.0).contains(&cauchy), "{cauchy}");
}

#[test]
fn regression_losses() {
    let dir = tempfile::tempdir().unwrap();
    let body: String = (0..40)
        .map(|i| {
            let x = i as f64 / 4.0;
            let noise = if i % 2 == 0 { 0.3 } else { -0.3 };
            format!("{x},{}\n", 1.0 + 2.0 * x + noise)
        })
        .collect();
    let input = write(dir.path(), "xy.csv", &body);
    for loss in ["ols", "lad", "huber:1.5", "model:logistic", "alternating"] {
        let m = json(&shapecon(&["mest", "--input", &input, "--loss", loss, "--json"]));
        let beta: Vec<f64> = m["beta"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
        assert_eq!(beta.len(), 2, "{loss}");
        assert!((beta[1] - 2.0).abs() < 0.1, "{loss}: {beta:?}");
    }
}

#[test]
fn experiment_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = shapecon(&[
        "experiment", "--id", "holder-counterexample", "--output", out.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let csv = fs::read_to_string(out.join("holder-counterexample.csv")).unwrap();
    assert!(csv.starts_with("n,metric,mean,median,std_error,scaled\n"));
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("holder-counterexample.json")).unwrap()).unwrap();
    assert_eq!(summary["config"]["id"], "holder-counterexample");
    assert!(summary["checks"].as_array().unwrap().iter().all(|c| c["holds"] == true));
    assert!(out.join("holder-counterexample.wasserstein1.series.csv").exists());
}

#[test]
fn experiment_is_deterministic_across_runs() {
    let run = || {
        shapecon(&[
            "experiment", "--id", "grenander-risk", "--n-grid", "50,100,200", "--replicates", "8",
            "--seed", "42", "--json",
        ])
        .stdout
    };
    let a = run();
    assert!(!a.is_empty());
    assert_eq!(a, run());
}

#[test]
fn usage_errors_exit_with_two() {
    let cases: [&[&str]; 6] = [
        &["experiment", "--id", "no-such-study"],
        &["experiment", "--id", "marshall", "--n-grid", "20,10"],
        &["experiment", "--id", "marshall", "--replicates", "0"],
        &["fit-lcmle"],
        &["mest", "--input", "whatever.csv", "--loss", "quartic"],
        &["no-such-command"],
    ];
    for args in cases {
        assert_eq!(shapecon(args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn runtime_failures_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.csv");
    let o = shapecon(&["fit-lcmle", "--input", missing.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error:"));

    let negative = write(dir.path(), "neg.csv", "-1\n2\n3\n");
    assert_eq!(shapecon(&["fit-grenander", "--input", &negative]).status.code(), Some(1));

    let bad = write(dir.path(), "bad.csv", "1\nabc\n");
    assert_eq!(shapecon(&["fit-lcmle", "--input", &bad]).status.code(), Some(1));

    let blocked = write(dir.path(), "file", "");
    let o = shapecon(&["experiment", "--id", "holder-counterexample", "--output", &format!("{blocked}/sub")]);
    assert_eq!(o.status.code(), Some(1));
}
