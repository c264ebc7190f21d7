use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const HYPERBOLIC_POLY: &str = r#"
seed = 11

[system]
name = "diag-hyperbolic"
lambda = 1.0

[rate]
name = "poly"

[params]
samples = 2000
"#;

const ROTATION: &str = r#"
[system]
name = "rotation"
omega = 1.0

[rate]
name = "exp"

[params]
samples = 2000
"#;

const BLOWUP: &str = r#"
[system]
kind = "coefficients"
times = [0.0, 1.0]
matrices = [[[1000.0]], [[1000.0]]]

[rate]
name = "exp"

[grid]
sigma_min = 0.0
span = 5.0
"#;

fn hdich(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hdich")).current_dir(dir).args(args).output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_owned()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!("{e}: {}\n{}", String::from_utf8_lossy(&out.stdout), String::from_utf8_lossy(&out.stderr))
    })
}

#[test]
fn pipeline_reports_a_dichotomy() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "h.toml", HYPERBOLIC_POLY);
    let out = hdich(dir.path(), &["pipeline", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(0));
    let report = json(&out);
    assert_eq!(report["status"], "dichotomic");
    assert_eq!(report["result"]["verdict"], "dichotomic");
    assert_eq!(report["result"]["subspace"]["s_basis"].as_array().unwrap().len(), 2);
    assert_eq!(report["exit_code"], 0);
}

#[test]
fn rotation_is_critical_at_every_window() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "r.toml", ROTATION);
    let out = hdich(dir.path(), &["check-noncritical", "--config", &cfg, "--C", "1"]);
    assert_eq!(out.status.code(), Some(1));
    let report = json(&out);
    assert_eq!(report["status"], "fail");
    let theta = report["result"]["theta"].as_f64().unwrap();
    assert!((theta - 1.0).abs() < 1e-9, "{theta}");

    let out = hdich(dir.path(), &["pipeline", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(json(&out)["result"]["verdict"], "not-dichotomic");
}

#[test]
fn rescaled_config_reaches_the_same_verdict() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "h.toml", HYPERBOLIC_POLY);
    let out = hdich(dir.path(), &["rescale", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(0));
    let rescaled = write(dir.path(), "rescaled.toml", std::str::from_utf8(&out.stdout).unwrap());
    assert!(std::fs::read_to_string(&rescaled).unwrap().contains("rescaled"));

    let direct = json(&hdich(dir.path(), &["pipeline", "--config", &cfg]));
    let via = hdich(dir.path(), &["pipeline", "--config", &rescaled]);
    assert_eq!(via.status.code(), Some(0));
    let via = json(&via);
    assert_eq!(via["result"]["rate"], "exp");
    assert_eq!(direct["result"]["verdict"], via["result"]["verdict"]);
    let thetas = |r: &Value| -> Vec<f64> {
        r["result"]["c"]["estimates"].as_array().unwrap().iter().map(|e| e["theta"].as_f64().unwrap()).collect()
    };
    for (a, b) in thetas(&direct).iter().zip(thetas(&via)) {
        assert!((a - b).abs() <= 1e-9);
    }
}

#[test]
fn configuration_errors_exit_64() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(hdich(dir.path(), &["pipeline"]).status.code(), Some(64));
    assert_eq!(hdich(dir.path(), &["pipeline", "--config", "missing.toml"]).status.code(), Some(64));
    let bad = write(dir.path(), "bad.toml", "[system]\nname = \"diag-hyperbolic\"\nlamda = 1.0\n");
    assert_eq!(hdich(dir.path(), &["pipeline", "--config", &bad]).status.code(), Some(64));
    let bad = write(dir.path(), "rate.toml", "[system]\nname = \"rotation\"\n[rate]\nname = \"power\"\np = -1.0\n");
    assert_eq!(hdich(dir.path(), &["check-growth", "--config", &bad]).status.code(), Some(64));
    assert_eq!(hdich(dir.path(), &["no-such-command"]).status.code(), Some(64));
    let cfg = write(dir.path(), "h.toml", HYPERBOLIC_POLY);
    let out = hdich(dir.path(), &["check-dichotomy", "--config", &cfg, "--D", "2"]);
    assert_eq!(out.status.code(), Some(64));
    assert!(!out.stderr.is_empty());
}

#[test]
fn numerical_breakdown_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "b.toml", BLOWUP);
    let out = hdich(dir.path(), &["check-growth", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(70), "{}", String::from_utf8_lossy(&out.stderr));
    let out = hdich(dir.path(), &["pipeline", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(json(&out)["status"], "inconclusive");
}

#[test]
fn reports_are_deterministic_for_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "h.toml", HYPERBOLIC_POLY);
    let a = hdich(dir.path(), &["check-expansive", "--config", &cfg, "--seed", "5"]);
    let b = hdich(dir.path(), &["check-expansive", "--config", &cfg, "--seed", "5"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(json(&a)["seed"], 5);
}

#[test]
fn csv_and_output_directory() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "h.toml", HYPERBOLIC_POLY);
    let out = hdich(dir.path(), &["check-noncritical", "--config", &cfg, "--format", "csv"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert!(header.len() >= 2);
    for line in lines {
        let cells: Vec<f64> = line.split(',').map(|c| c.parse().unwrap()).collect();
        assert_eq!(cells.len(), header.len());
    }

    let target = dir.path().join("run");
    let out =
        hdich(dir.path(), &["check-growth", "--config", &cfg, "--format", "csv", "--out", target.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let report: Value = serde_json::from_str(&std::fs::read_to_string(target.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["command"], "check-growth");
    assert!(std::fs::read_to_string(target.join("data.csv")).unwrap().starts_with("sigma_t,sigma_s,norm,bound\n"));
}

#[test]
fn demo_runs_without_a_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = hdich(dir.path(), &["demo"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(!out.stdout.is_empty());
}
