use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pareto-avgcost"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn validate_builtin_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["validate", "paper"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&dir.path().join("validation.json"))["all_passed"], true);
}

#[test]
fn validate_reports_bad_row_sum() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = dir.path().join("bad.json");
    // start from the built-in scenario written back as JSON
    let sys = pareto_avgcost::paper_example();
    let mut file = serde_json::to_value(sys.to_scenario_file()).unwrap();
    file["subsystems"][0]["transition"][0][0] = serde_json::json!([0.7, 0.5]);
    fs::write(&scenario, file.to_string()).unwrap();
    let out = run(&["validate", scenario.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("row_stochastic") && stdout.contains("FAIL"), "{stdout}");
}

#[test]
fn missing_scenario_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["validate", "--scenario", "/definitely/not/here.json"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["tables", "--bogus"], dir.path()).status.code(), Some(2));
    assert_eq!(run(&["tables", "--tol", "-1"], dir.path()).status.code(), Some(2));
}

#[test]
fn golden_tables_pass_and_fail_at_tight_tolerance() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["tables", "paper", "--golden"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let csv = fs::read_to_string(dir.path().join("tables.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("policy,J_sub1,J_sub2,J_system"));
    assert_eq!(csv.lines().count(), 17);

    let tight = run(&["tables", "paper", "--golden", "--tol", "1e-6"], dir.path());
    assert_eq!(tight.status.code(), Some(1));
    assert!(String::from_utf8(tight.stdout).unwrap().contains("mismatch: policy"));
}

#[test]
fn pareto_names_sixteen() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["pareto", "paper"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&dir.path().join("pareto.json"))["policy_id"], 16);
    let frontier = fs::read_to_string(dir.path().join("frontier.csv")).unwrap();
    assert!(frontier.starts_with("state,action_tuple,k_sub1,k_sub2,k_system,on_frontier,selected\n"));
}

#[test]
fn dp_gain() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["dp"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let dp = json(&dir.path().join("dp.json"));
    assert!((dp["gain"].as_f64().unwrap() - 1.8431).abs() < 5e-3);
    assert_eq!(dp["policy_id"], 16);
}

#[test]
fn audit_has_no_gap() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["audit", "paper", "--norm", "max"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let audit = json(&dir.path().join("audit.json"));
    assert_eq!(audit["gap"].as_f64(), Some(0.0));
    assert_eq!(audit["norm"], "max");
    let csv = fs::read_to_string(dir.path().join("audit.csv")).unwrap();
    assert!(csv.lines().last().unwrap().starts_with("summary,phi_star="));
}

#[test]
fn replicate_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["replicate", "--reps", "40", "--seed", "7"];
    assert_eq!(run(&args, a.path()).status.code(), Some(0));
    assert_eq!(run(&args, b.path()).status.code(), Some(0));
    for f in ["replications.csv", "histogram.csv", "replicate.json"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
    assert_eq!(json(&a.path().join("replicate.json"))["dJ_violations"], 0);
}

#[test]
fn thread_count_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let bad = Command::new(env!("CARGO_BIN_EXE_pareto-avgcost"))
        .args(["pareto", "--out"])
        .arg(dir.path())
        .env("PARETO_AVGCOST_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2));
    let one = Command::new(env!("CARGO_BIN_EXE_pareto-avgcost"))
        .args(["pareto", "--out"])
        .arg(dir.path())
        .env("PARETO_AVGCOST_THREADS", "1")
        .output()
        .unwrap();
    assert_eq!(one.status.code(), Some(0));
}
