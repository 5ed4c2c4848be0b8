use greenwave_core::error::Error;
use greenwave_core::scenario::*;

/// Preset with a shorter horizon; caps scaled with the horizon.
fn short(name: &str, steps: usize) -> Scenario {
    let mut sc = preset(name).unwrap();
    sc.horizon_s = sc.network.dt * steps as f64;
    let f = steps as f64 / 90.0;
    for c in sc.caps.values_mut().flatten() {
        *c *= f;
    }
    sc.solver.search_time_s = 20.0;
    sc
}

#[test]
fn zero_demand_is_empty() {
    let mut sc = short("I", 20);
    for d in sc.demand.values_mut() {
        *d = DemandSpec::Ratio(0.0);
    }
    let r = run_base(&sc, &[]).unwrap().report;
    assert_eq!(r.objective, 0.0);
    assert!(r.link_emissions.values().all(|&e| e == 0.0));
    assert_eq!(r.total_emission, 0.0);
    assert!(r.stops.values().all(|&s| s == 0.0));
}

#[test]
fn base_report_invariants() {
    let sc = short("I", 30);
    let r = run_base(&sc, &[]).unwrap().report;
    assert!(r.objective > 0.0);
    assert!(r.violations_pct.values().all(|&v| v == 0.0));
    assert_eq!(r.total_emission, r.link_emissions.values().sum::<f64>());
    assert_eq!(r.link_emissions.keys().copied().collect::<Vec<_>>(), vec![1, 2, 3, 4, 5, 6]);
    assert!(r.max_flow_mismatch <= 1e-4);
    assert!(r.stops.values().all(|&s| s >= 0.0));
}

#[test]
fn uncapped_lwre_equals_base() {
    let mut sc = short("II", 30);
    for c in sc.caps.values_mut() {
        *c = None;
    }
    let b = run_base(&sc, &[]).unwrap().report;
    let l = run_lwre(&sc, &[]).unwrap().report;
    assert_eq!(b.objective, l.objective);
    assert_eq!(b.plan, l.plan);
    assert_eq!(b.link_emissions, l.link_emissions);
    assert_eq!(b.stops, l.stops);
    assert!(l.violations_pct.is_empty());
}

#[test]
fn pair_orders_objectives_and_respects_caps() {
    let sc = short("I", 30);
    let (b, l) = run_pair(&sc).unwrap();
    assert!(l.report.objective <= b.report.objective);
    assert!(l.best.feasible());
    for (id, bound) in &l.report.robust_bound {
        assert!(*bound <= sc.caps[id].unwrap() * (1.0 + 1e-6), "link {id}: {bound}");
    }
    assert!(l.report.max_flow_mismatch <= 1e-4);
}

#[test]
fn cap_below_idle_floor_is_infeasible() {
    let mut sc = short("I", 30);
    // 30 steps · 400 g/h · 10/3600 h = 33.3 g even with an empty link
    sc.caps.insert(3, Some(30.0));
    assert!(matches!(run_lwre(&sc, &[]), Err(Error::Infeasible(_))));
}

#[test]
fn reports_are_deterministic_and_null_encoded() {
    let sc = short("II", 24);
    let (b, l) = run_pair(&sc).unwrap();
    let reports = vec![b.report, l.report];
    let d1 = tempfile::tempdir().unwrap();
    let d2 = tempfile::tempdir().unwrap();
    emit_reports(&reports, d1.path(), 20).unwrap();
    emit_reports(&reports, d2.path(), 20).unwrap();
    let mut names: Vec<_> = std::fs::read_dir(d1.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert!(names.len() >= 4 + 2 * 3 * 2);
    for n in &names {
        assert_eq!(std::fs::read(d1.path().join(n)).unwrap(), std::fs::read(d2.path().join(n)).unwrap(), "{n:?}");
    }
    let v = std::fs::read_to_string(d1.path().join("violations.csv")).unwrap();
    let lines: Vec<&str> = v.lines().collect();
    assert_eq!(lines[0], "link,scenario-II/base,scenario-II/lwre");
    assert_eq!(lines.len(), 1 + 6, "rows only for capped links");
    for line in &lines[1..] {
        let cells: Vec<&str> = line.split(',').collect();
        assert_eq!(cells[1], "", "base has no caps: {line}");
        assert!(cells[2].parse::<f64>().is_ok());
    }
}

#[test]
fn scenario_file_round_trip() {
    let sc = short("III", 12);
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("s.json");
    std::fs::write(&p, serde_json::to_string_pretty(&sc).unwrap()).unwrap();
    let back = load_scenario(&p).unwrap();
    assert_eq!(back.steps().unwrap(), 12);
    assert_eq!(back.boundary().unwrap(), sc.boundary().unwrap());
}
