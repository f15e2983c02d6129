use std::path::Path;
use std::process::{Command, Output};

fn massbound(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_massbound")).args(args).output().unwrap()
}

const CONFIG: &str = r#"{
    "name": "small",
    "domain": {"kind": "ellipse", "params": {"a": 1.5, "b": 1.0}},
    "problem": {"kind": "liouville", "lambda": 0.5, "alpha": 0.0,
                "k": {"kind": "affine", "c0": 1.0, "cx": 0.3, "cy": 0.1}},
    "grid": {"n_r": 32, "n_theta": 16},
    "map_nodes": 128,
    "sweep": {"parameter": "s", "range": [0.2, 1.0], "steps": 3}
}"#;

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("config.json");
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn sweep_writes_reports_and_report_reads_them() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONFIG);
    let out = dir.path().join("out");
    let run = massbound(&["sweep", &cfg, "--out", out.to_str().unwrap()]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let csv = std::fs::read_to_string(out.join("small/small.csv")).unwrap();
    assert!(csv.starts_with("s,lambda,mass,sup_norm,residual,holder_gap,rho0,pass\n"));
    assert_eq!(csv.lines().count(), 4);

    let report = massbound(&["report", out.join("small").to_str().unwrap()]);
    assert!(report.status.success());
    assert!(String::from_utf8_lossy(&report.stdout).contains("3/3 pass"));

    let sol = out.join("small/solution.csv");
    let check = massbound(&["pohozaev", &cfg, sol.to_str().unwrap(), "--grid", "32x16"]);
    assert_eq!(check.status.code(), Some(2), "stored solution is from the last sweep step, not λ = 0.5");
}

#[test]
fn solve_then_pohozaev_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONFIG);
    let out = dir.path().join("out");
    assert!(massbound(&["solve", &cfg, "--grid", "64x32", "--out", out.to_str().unwrap()]).status.success());
    let sol = out.join("small/solution.csv");
    let check = massbound(&["pohozaev", &cfg, sol.to_str().unwrap(), "--grid", "64x32"]);
    let text = String::from_utf8_lossy(&check.stdout);
    assert!(text.contains("\"holder_gap\""), "{text}");
}

#[test]
fn csv_format_prints_rows() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONFIG);
    let run = massbound(&["certify", &cfg, "--format", "csv"]);
    assert!(run.status.success());
    let text = String::from_utf8_lossy(&run.stdout);
    assert!(text.starts_with("s,lambda,mass"));
    assert!(text.lines().nth(1).unwrap().ends_with(",true"));
}

#[test]
fn invalid_input_exits_with_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &CONFIG.replace("\"map_nodes\"", "\"map_node\""));
    let run = massbound(&["solve", &cfg]);
    assert_eq!(run.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&run.stderr).contains("map_node"));

    let cfg = write_config(dir.path(), CONFIG);
    assert_eq!(massbound(&["solve", &cfg, "--tol", "-1e-8"]).status.code(), Some(2));
    assert_eq!(massbound(&["experiment", "E42"]).status.code(), Some(2));
    assert_ne!(massbound(&["solve", &cfg, "--grid", "32"]).status.code(), Some(0));
}

#[test]
fn map_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONFIG);
    let run = massbound(&["map", &cfg]);
    assert!(run.status.success());
    assert!(String::from_utf8_lossy(&run.stdout).contains("phi_prime_0=0.8653"));
}
