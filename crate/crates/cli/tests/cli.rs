use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn fraclap(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fraclap")).args(args).output().expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

fn scratch(name: &str) -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join(name);
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn schema() -> jsonschema::JSONSchema {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../schemas/bound_report.schema.json");
    let schema: Value = serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap();
    jsonschema::JSONSchema::compile(&schema).unwrap()
}

fn assert_valid(report: &Value) {
    let schema = schema();
    if let Err(errors) = schema.validate(report) {
        let msgs: Vec<String> = errors.map(|e| e.to_string()).collect();
        panic!("schema violations: {msgs:?}");
    };
}

#[test]
fn constants_match_closed_forms() {
    let out = fraclap(&["constants", "--alpha", "1", "--dim", "1"]);
    assert!(out.status.success());
    let v = stdout_json(&out);
    assert!((v["c_thm1"].as_f64().unwrap() - 2.0).abs() < 1e-12);
    let ct = v["c_tilde_stated"].as_f64().unwrap();
    assert!((ct - 1.0 / (2.0 * std::f64::consts::PI)).abs() < 1e-12);
    assert!((ct * v["c_thm1"].as_f64().unwrap() - v["a_norm"].as_f64().unwrap()).abs() < 1e-12);

    let v = stdout_json(&fraclap(&["constants", "--alpha", "1", "--dim", "2"]));
    let want = std::f64::consts::PI.sqrt() / 16.0;
    assert!((v["c_tilde_stated"].as_f64().unwrap() - want).abs() < 1e-12);
}

#[test]
fn solve_interval_writes_valid_reports() {
    let dir = scratch("solve_interval");
    let out = fraclap(&["solve", "--domain", "interval:-1,1", "--h", "0.002", "--out", dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v = stdout_json(&out);
    let l1 = v["report"]["lambda1"].as_f64().unwrap();
    assert!(l1 > 1.0);
    assert!(v["report"]["gap"].as_f64().unwrap() > l1);
    let report: Value = serde_json::from_str(&fs::read_to_string(dir.join("bound_report.json")).unwrap()).unwrap();
    assert_valid(&report);
    assert_eq!(report, v["report"]);
    let csv = fs::read_to_string(dir.join("eigen.csv")).unwrap();
    assert!(csv.starts_with("# lambda1="));
    assert_eq!(csv.lines().count(), 1002);
    assert!(dir.join("level_set.json").exists());
}

#[test]
fn solve_square_and_mask_share_report_shape() {
    let out = fraclap(&["solve", "--domain", "box:-1,-1,1,1", "--h", "0.1"]);
    assert!(out.status.success());
    let square = stdout_json(&out);
    assert_eq!(square["report"]["verdicts"]["thm1"], Value::Bool(true));
    assert_eq!(square["report"]["printed_discrepancy"], Value::Bool(true));
    assert_valid(&square["report"]);

    let dir = scratch("mask");
    let mask = dir.join("l.mask");
    // L-shape, 20 × 20 cells of width 0.1; the first row is the lowest
    let mut text = String::from("2 0.1 20 20\n");
    for j in 0..20 {
        let row: String = (0..20).map(|i| if i >= 10 && j >= 10 { '0' } else { '1' }).collect();
        text.push_str(&row);
        text.push('\n');
    }
    fs::write(&mask, text).unwrap();
    let spec = format!("mask:{}", mask.display());
    let out = fraclap(&["solve", "--domain", &spec, "--h", "0.1"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let l = stdout_json(&out);
    assert_valid(&l["report"]);
    let keys = |v: &Value| v.as_object().unwrap().keys().cloned().collect::<Vec<_>>();
    assert_eq!(keys(&l), keys(&square));
    assert_eq!(l["nodes"].as_u64(), Some(300));
}

#[test]
fn exit_time_matches_ball_formula() {
    let out = fraclap(&["exit-time", "--domain", "interval:-1,1", "--h", "0.005"]);
    assert!(out.status.success());
    let v = stdout_json(&out);
    let s = v["sup_exit_time"].as_f64().unwrap();
    assert!((s - 1.0).abs() < 0.02, "{s}");
    assert!((v["ball_centre_exact"].as_f64().unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn mc_is_deterministic() {
    let args = ["mc", "--domain", "interval:-1,1", "--paths", "2000", "--dt", "0.01", "--seed", "5"];
    let a = fraclap(&args);
    let b = fraclap(&[&args[..], &["--workers", "1"]].concat());
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let v = stdout_json(&a);
    assert!(v["estimate"]["mean_exit_time"].as_f64().unwrap() > 0.0);
}

#[test]
fn mc_compares_with_grid() {
    let out = fraclap(&[
        "mc", "--domain", "interval:-1,1", "--paths", "20000", "--dt", "0.001", "--h", "0.01", "--compare",
    ]);
    assert!(out.status.success());
    let v = stdout_json(&out);
    let mean = v["estimate"]["mean_exit_time"].as_f64().unwrap();
    assert!((mean - 1.0).abs() < 0.05, "{mean}");
    let rate = -v["grid"]["survival_log_slope"].as_f64().unwrap();
    let l1 = v["grid"]["lambda1"].as_f64().unwrap();
    assert!((rate / l1 - 1.0).abs() < 0.1, "{rate} vs {l1}");
}

#[test]
fn config_file_with_flag_override() {
    let dir = scratch("config");
    let cfg = dir.join("run.json");
    fs::write(&cfg, r#"{"alpha": 0.5, "dim": 2, "domain": "ball:0,0,1", "h": 0.2}"#).unwrap();
    let from_file = stdout_json(&fraclap(&["solve", "--config", cfg.to_str().unwrap()]));
    assert_eq!(from_file["report"]["alpha"].as_f64(), Some(0.5));
    assert_eq!(from_file["report"]["d"].as_u64(), Some(2));
    let overridden = stdout_json(&fraclap(&["solve", "--config", cfg.to_str().unwrap(), "--alpha", "1.5"]));
    assert_eq!(overridden["report"]["alpha"].as_f64(), Some(1.5));
    assert_eq!(overridden["report"]["h"].as_f64(), Some(0.2));

    fs::write(&cfg, r#"{"alpha": 1.0, "colour": "red"}"#).unwrap();
    assert_eq!(fraclap(&["solve", "--config", cfg.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn suite_runs_and_warns_outside_trusted_range() {
    let dir = scratch("suite");
    let cfg = dir.join("suite.json");
    fs::write(
        &cfg,
        r#"{"suite": {"alphas": [1.0], "entries": [
            {"label": "interval", "domain": {"shape": "intervals", "intervals": [[-1, 1]]}, "h": 0.02},
            {"label": "disk", "domain": {"shape": "ball", "center": [0, 0], "radius": 1}, "h": 0.2}
        ]}}"#,
    )
    .unwrap();
    let out = fraclap(&["suite", "--config", cfg.to_str().unwrap(), "--out", dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.join("summary.csv")).unwrap();
    assert!(csv.starts_with("domain,alpha,lambda1,lambda2,gap,thm1_margin,thm2_margin\n"));
    assert!(csv.contains("# two_ball_slope,"));
    for line in fs::read_to_string(dir.join("reports.jsonl")).unwrap().lines() {
        let v: Value = serde_json::from_str(line).unwrap();
        assert_valid(&v["report"]);
    }

    let out = fraclap(&["suite", "--config", cfg.to_str().unwrap(), "--alpha", "1.9"]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("warning: alpha = 1.9"));
    assert!(matches!(out.status.code(), Some(0) | Some(1)));
}

#[test]
fn usage_errors_exit_with_2() {
    assert_eq!(fraclap(&["solve", "--alpha", "2.5"]).status.code(), Some(2));
    assert_eq!(fraclap(&["solve", "--domain", "triangle:1"]).status.code(), Some(2));
    assert_eq!(fraclap(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(fraclap(&["mc", "--paths", "10"]).status.code(), Some(2));
    assert_eq!(fraclap(&["two-ball", "--h", "0.5"]).status.code(), Some(2));
}

#[test]
fn numerical_failure_exits_with_3() {
    // no path can leave within the step budget at this time step
    let out = fraclap(&["mc", "--paths", "1000", "--dt", "1e-12", "--workers", "1"]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("survived"));
}
