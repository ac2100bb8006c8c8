use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn geomonge(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_geomonge"))
        .args(args)
        .current_dir(dir)
        .env("GEOMONGE_THREADS", "1")
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn segment_fixture(dir: &Path) {
    assert!(geomonge(&["space", "gen", "segment", "--n", "6", "--length", "5", "--out", "seg.json"], dir).status.success());
    std::fs::write(dir.join("mu.csv"), "point,mass\n0,0.5\n1,0.5\n").unwrap();
    std::fs::write(dir.join("nu.csv"), "4,0.5\n5,0.5\n").unwrap();
}

#[test]
fn solve_certify_and_map() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    segment_fixture(d);
    let plan = json(&geomonge(&["kanto", "solve", "seg.json", "mu.csv", "nu.csv"], d));
    // Two atoms at 0, 1 moved to 4, 5: cost 0.5·4 + 0.5·4.
    assert_eq!(plan["cost"], 4.0);
    std::fs::write(d.join("plan.json"), plan.to_string()).unwrap();

    let cert = json(&geomonge(&["kanto", "certify", "seg.json", "plan.json"], d));
    assert_eq!(cert["passed"], true);

    let map = json(&geomonge(&["monge", "solve", "seg.json", "mu.csv", "nu.csv"], d));
    assert_eq!(map["is_pure_map"], true);
    assert_eq!(map["assignment"], serde_json::json!([[0, 4], [1, 5]]));
    assert_eq!(map["cost_identity"]["defect"], 0.0);

    let flow = json(&geomonge(&["flow", "solve", "seg.json", "mu.csv", "nu.csv"], d));
    assert_eq!(flow["l1_norm"], flow["cost"]);

    let rays = json(&geomonge(&["rays", "build", "seg.json", "plan.json"], d));
    assert!(rays["rays"].as_array().is_some_and(|r| !r.is_empty()));
}

#[test]
fn validate_reports_segment_clean() {
    let dir = tempfile::tempdir().unwrap();
    segment_fixture(dir.path());
    let v = json(&geomonge(&["space", "validate", "seg.json"], dir.path()));
    assert_eq!(v["non_branching"], true);
    assert_eq!(v["report"]["triangle_ok"], true);
}

#[test]
fn mismatched_mass_is_reported_with_code() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    segment_fixture(d);
    std::fs::write(d.join("heavy.csv"), "5,2\n").unwrap();
    let out = geomonge(&["kanto", "solve", "seg.json", "mu.csv", "heavy.csv"], d);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("error[INFEASIBLE_MASS]"));
}

#[test]
fn run_writes_report_and_sidecars() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = geomonge(&["run", "intro-1d", "--seed", "5", "--out", "r.json"], d);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: Value = serde_json::from_str(&std::fs::read_to_string(d.join("r.json")).unwrap()).unwrap();
    assert_eq!(report["schema_version"], 1);
    assert_eq!(report["pass"], true);
    let profile = std::fs::read_to_string(d.join("r.profile.csv")).unwrap();
    assert!(profile.starts_with("ts,masses\n"));
}

#[test]
fn run_is_byte_identical_across_invocations() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    for name in ["a.json", "b.json"] {
        assert!(geomonge(&["run", "blocks", "--seed", "11", "--out", name], d).status.success());
    }
    assert_eq!(std::fs::read(d.join("a.json")).unwrap(), std::fs::read(d.join("b.json")).unwrap());
}

#[test]
fn unknown_scenario_fails() {
    let dir = tempfile::tempdir().unwrap();
    let out = geomonge(&["run", "no-such-thing"], dir.path());
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("INVALID_INPUT"));
}

#[test]
fn mcp_check_on_lebesgue_segment() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert!(geomonge(&["space", "gen", "segment", "--n", "11", "--out", "seg.json"], d).status.success());
    let mut eta = String::new();
    for i in 0..11 {
        let w = if i == 0 || i == 10 { 0.05 } else { 0.1 };
        eta.push_str(&format!("{i},{w}\n"));
    }
    std::fs::write(d.join("eta.csv"), eta).unwrap();
    let r = json(&geomonge(&["mcp", "check", "seg.json", "eta.csv", "--K", "0", "--N", "1", "--xbar", "0"], d));
    assert_eq!(r["pass"], true);
    let bad = geomonge(&["mcp", "check", "seg.json", "eta.csv", "--K", "1", "--N", "0.5"], d);
    assert!(!bad.status.success());
}

#[test]
fn disint_evolve_moves_points_forward() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    segment_fixture(d);
    let plan = json(&geomonge(&["kanto", "solve", "seg.json", "mu.csv", "nu.csv"], d));
    std::fs::write(d.join("plan.json"), plan.to_string()).unwrap();
    std::fs::write(d.join("set.json"), "[1, 2]").unwrap();
    let v = json(&geomonge(&["disint", "evolve", "seg.json", "plan.json", "set.json", "--t", "0", "1"], d));
    assert_eq!(v[0]["evolved"]["points"], serde_json::json!([1, 2]));
    assert_eq!(v[1]["evolved"]["points"], serde_json::json!([2, 3]));
}
