use std::path::Path;
use std::process::{Command, Output};

use greenwave_core::curves::CumulativeCurves;
use greenwave_core::fd::TriangularFD;
use greenwave_core::moskowitz::lax_hopf_moskowitz;
use greenwave_core::network::Link;
use greenwave_core::scenario::preset;
use greenwave_milp::{export_mps, LinExpr, MilpModel, ObjSense, Sense};

fn greenwave(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_greenwave")).args(args).output().expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn knapsack(extra_row: bool) -> MilpModel {
    let mut m = MilpModel::new("knap", ObjSense::Maximize);
    let a = m.add_binary("a");
    let b = m.add_binary("b");
    let c = m.add_binary("c");
    let mut w = LinExpr::new();
    w.add_term(a, 2.0).add_term(b, 3.0).add_term(c, 1.0);
    m.add_row("w", &w, Sense::Le, 4.0, "capacity");
    if extra_row {
        m.add_row("force", &LinExpr::var(b), Sense::Ge, 1.0, "force");
        let mut ac = LinExpr::new();
        ac.add_term(a, 1.0).add_term(b, 1.0);
        m.add_row("both", &ac, Sense::Ge, 2.0, "force");
    }
    let mut obj = LinExpr::new();
    obj.add_term(a, 5.0).add_term(b, 4.0).add_term(c, 3.0);
    m.set_objective(&obj, ObjSense::Maximize);
    m
}

#[test]
fn solve_writes_solution() {
    let dir = tempfile::tempdir().unwrap();
    let mps = dir.path().join("k.mps");
    let out = dir.path().join("sol.csv");
    export_mps(&knapsack(false), &mps).unwrap();
    let o = greenwave(&["solve", "--in", s(&mps), "--gap", "1e-6", "--out", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("objective 8"));
    let sol = std::fs::read_to_string(&out).unwrap();
    assert_eq!(sol.lines().next(), Some("variable,value"));
    assert_eq!(sol.lines().count(), 4);
}

#[test]
fn infeasible_model_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let mps = dir.path().join("k.mps");
    export_mps(&knapsack(true), &mps).unwrap();
    let o = greenwave(&["solve", "--in", s(&mps), "--out", s(&dir.path().join("x.csv"))]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn analyze_stops_free_flow() {
    let dir = tempfile::tempdir().unwrap();
    let link = Link::new(1, 400.0, TriangularFD::urban(), 10.0).unwrap();
    let mut out = vec![0.0; 30];
    for o in out.iter_mut().skip(3) {
        *o = 0.5;
    }
    let c = CumulativeCurves::from_flows(&[0.5; 30], &out, 10.0);
    let g = lax_hopf_moskowitz(&link, &c, 10.0, 10).unwrap();
    let p = dir.path().join("grid.csv");
    g.write_csv(std::fs::File::create(&p).unwrap()).unwrap();
    let o = greenwave(&["analyze-stops", "--grid", s(&p), "--levels", "50"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(String::from_utf8_lossy(&o.stdout).trim(), "0.000000");
}

fn short_scenario(dir: &Path, steps: usize) -> std::path::PathBuf {
    let mut sc = preset("I").unwrap();
    sc.horizon_s = 10.0 * steps as f64;
    for c in sc.caps.values_mut().flatten() {
        *c *= steps as f64 / 90.0;
    }
    sc.solver.search_time_s = 10.0;
    let p = dir.join("scenario.json");
    std::fs::write(&p, serde_json::to_string(&sc).unwrap()).unwrap();
    p
}

#[test]
fn run_scenario_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let sc = short_scenario(dir.path(), 24);
    let out = dir.path().join("out");
    let o = greenwave(&["run-scenario", "--scenario", s(&sc), "--mode", "lwre", "--out", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["summary.csv", "comparison.csv", "violations.csv", "stops.csv", "grid_scenario-I_lwre_link1.csv", "contours_scenario-I_base_link2.csv"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let summary = std::fs::read_to_string(out.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 3);
}

#[test]
fn impossible_caps_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let sc = short_scenario(dir.path(), 24);
    let caps = dir.path().join("caps.json");
    std::fs::write(&caps, r#"{"1": 5.0, "2": null}"#).unwrap();
    let o = greenwave(&["run-scenario", "--scenario", s(&sc), "--mode", "lwre", "--caps", s(&caps), "--out", s(&dir.path().join("o"))]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn schema_error_reports_field() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.json");
    let mut v = serde_json::to_value(preset("I").unwrap()).unwrap();
    v["horizon_s"] = serde_json::json!("fifteen minutes");
    std::fs::write(&p, v.to_string()).unwrap();
    let o = greenwave(&["run-scenario", "--scenario", s(&p), "--out", s(&dir.path().join("o"))]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("horizon_s"));
}

#[test]
fn sample_fit_and_use_relation() {
    let dir = tempfile::tempdir().unwrap();
    let samples = dir.path().join("samples.csv");
    let o = greenwave(&["simulate-emissions", "--model", "modal", "--runs", "2", "--samples-per-run", "100", "--seed", "3", "--out", s(&samples)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(std::fs::read_to_string(&samples).unwrap().lines().count(), 201);

    let rel = dir.path().join("relation.json");
    let o = greenwave(&["fit", "--in", s(&samples), "--shape", "affine", "--l0", "0", "--u0", "400", "--l1", "53.3", "--u1", "66", "--sigma", "1.2", "--out", s(&rel)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let j: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&rel).unwrap()).unwrap();
    assert_eq!(j["shape"], "affine");
    assert_eq!(j["uncertainty"]["sigma"], 1.2);

    let convex = dir.path().join("convex.json");
    let o = greenwave(&["fit", "--in", s(&samples), "--shape", "convex", "--pieces", "2", "--out", s(&convex)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let sc = short_scenario(dir.path(), 12);
    let o = greenwave(&["run-scenario", "--scenario", s(&sc), "--mode", "base", "--relation", s(&rel), "--out", s(&dir.path().join("o"))]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let o = greenwave(&["run-scenario", "--scenario", s(&sc), "--relation", s(&convex), "--out", s(&dir.path().join("o2"))]);
    assert_eq!(o.status.code(), Some(1));
}
