//! Four-intersection experiment: scenario configuration, base and
//! emission-constrained runs, replay, and report files.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use greenwave_milp::{BnbConfig, MilpError, MilpStatus};

use crate::emissions::{link_aer, total_emission, EmissionConfig};
use crate::error::{Error, Result};
use crate::fd::TriangularFD;
use crate::ltm::{ltm_simulate, SignalPlan, SimulationTrace};
use crate::macro_relation::UncertaintySet;
use crate::moskowitz::{acceleration_field, density_velocity_fields, lax_hopf_moskowitz, MoskowitzGrid};
use crate::network::{Boundary, FdConfig, JunctionSpec, LinkConfig, Network, NetworkConfig};
use crate::plan_search::{search_plan, Candidate, SearchConfig};
use crate::signal_milp::{build_signal_milp, BigMConfig, MilpOptions, SignalMilp, SourceCoupling};
use crate::stops::{contour_levels, count_stops, trajectory};

/// Demand of one source link: a fraction of its capacity held constant, or
/// an explicit per-step profile (veh/s).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DemandSpec {
    Ratio(f64),
    Profile(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverSettings {
    pub coupling: SourceCoupling,
    pub bigm: BigMConfig,
    /// plan-search budget (s)
    pub search_time_s: f64,
    /// branch-and-bound budget after the search (s); 0 skips it
    pub bnb_time_s: f64,
    pub gap: f64,
    pub node_limit: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings { coupling: SourceCoupling::Metered, bigm: BigMConfig::default(), search_time_s: 120.0, bnb_time_s: 0.0, gap: 1e-6, node_limit: 100_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReplaySettings {
    /// Lax-Hopf spatial step (m)
    pub dx: f64,
    /// grid rows per simulation step
    pub substeps: usize,
    pub stop_levels: usize,
    /// m/s
    pub v_stop: f64,
    /// links whose Moskowitz grids are kept for output
    pub grid_links: Vec<usize>,
}

impl Default for ReplaySettings {
    fn default() -> Self {
        ReplaySettings { dx: 10.0, substeps: 10, stop_levels: 50, v_stop: 0.1, grid_links: vec![1, 2, 3] }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub network: NetworkConfig,
    /// total horizon (s); must equal steps·δt
    pub horizon_s: f64,
    pub demand: BTreeMap<usize, DemandSpec>,
    pub objective_links: Vec<usize>,
    /// links whose emissions are reported and summed; empty means all
    #[serde(default)]
    pub report_links: Vec<usize>,
    #[serde(default)]
    pub emission: EmissionConfig,
    /// grams per link over the horizon; `null` leaves a link uncapped
    #[serde(default)]
    pub caps: BTreeMap<usize, Option<f64>>,
    pub uncertainty: UncertaintySet,
    #[serde(default)]
    pub solver: SolverSettings,
    #[serde(default)]
    pub replay: ReplaySettings,
}

/// Four intersections: A (1, 3 → 5, 7), B (2, 5 → 6, 8), C (4, 6 → 9)
/// signalized; D (10 → 3, 4) unsignalized. All links 400 m.
pub fn four_intersection_network(dt: f64) -> NetworkConfig {
    let fd = TriangularFD::urban();
    let fdc = FdConfig { k: fd.k, rho_jam: fd.rho_jam, rho_crit: fd.rho_crit };
    let j = |name: &str, incoming: Vec<usize>, outgoing: Vec<usize>, turning: Vec<Vec<f64>>, signalized: bool| JunctionSpec { name: name.into(), incoming, outgoing, turning, signalized };
    NetworkConfig {
        dt,
        links: (1..=10).map(|id| LinkConfig { id, length: 400.0, fd: fdc.clone() }).collect(),
        junctions: vec![
            j("A", vec![1, 3], vec![5, 7], vec![vec![0.5, 0.5], vec![0.4, 0.6]], true),
            j("B", vec![2, 5], vec![6, 8], vec![vec![0.3, 0.7], vec![0.5, 0.5]], true),
            j("C", vec![4, 6], vec![9], vec![vec![1.0], vec![1.0]], true),
            j("D", vec![10], vec![3, 4], vec![vec![0.53, 0.47]], false),
        ],
    }
}

/// Built-in presets "I", "II", "III" (also accepted as "scenario-I" …).
pub fn preset(name: &str) -> Result<Scenario> {
    let key = name.trim_start_matches("scenario-");
    let (ratios, caps): ([f64; 3], [f64; 6]) = match key {
        "I" => ([0.531, 0.437, 0.516], [390.0, 310.0, 210.0, 160.0, 310.0, 240.0]),
        "II" => ([0.606, 0.512, 0.684], [600.0, 380.0, 300.0, 210.0, 490.0, 250.0]),
        "III" => ([0.644, 0.549, 0.8338], [1100.0, 440.0, 750.0, 300.0, 600.0, 300.0]),
        other => return Err(Error::Config(format!("unknown preset {other:?} (expected I, II or III)"))),
    };
    let demand = [1, 2, 10].into_iter().zip(ratios).map(|(id, r)| (id, DemandSpec::Ratio(r))).collect();
    Ok(Scenario {
        name: format!("scenario-{key}"),
        network: four_intersection_network(10.0),
        horizon_s: 900.0,
        demand,
        objective_links: vec![7, 8, 9],
        report_links: (1..=6).collect(),
        emission: EmissionConfig::default(),
        caps: (1..=6).zip(caps).map(|(id, c)| (id, Some(c))).collect(),
        uncertainty: UncertaintySet::affine(0.0, 400.0, 53.3, 66.0, 1.2)?,
        solver: SolverSettings::default(),
        replay: ReplaySettings::default(),
    })
}

/// Load a scenario file; schema errors name the offending field path.
pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path)?;
    parse_scenario(&text)
}

pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let sc: Scenario = serde_path_to_error::deserialize(de).map_err(|e| Error::Config(format!("scenario field `{}`: {}", e.path(), e.inner())))?;
    sc.validate()?;
    Ok(sc)
}

impl Scenario {
    pub fn steps(&self) -> Result<usize> {
        let dt = self.network.dt;
        let n = self.horizon_s / dt;
        if !(dt > 0.0) || !(n >= 1.0) || (n - n.round()).abs() > 1e-9 * n {
            return Err(Error::Config(format!("horizon_s = {} is not a positive multiple of network.dt = {dt}", self.horizon_s)));
        }
        Ok(n.round() as usize)
    }

    pub fn network(&self) -> Result<Network> {
        Network::from_config(&self.network)
    }

    pub fn boundary(&self) -> Result<Boundary> {
        let net = self.network()?;
        let n = self.steps()?;
        let mut b = Boundary::default();
        for (&id, spec) in &self.demand {
            let link = net.link(id).ok_or_else(|| Error::Config(format!("demand.{id}: unknown link")))?;
            let c = link.capacity();
            let profile = match spec {
                DemandSpec::Ratio(r) => vec![r * c; n],
                DemandSpec::Profile(p) => {
                    if p.len() != n {
                        return Err(Error::Config(format!("demand.{id}.profile: {} entries, horizon has {n} steps", p.len())));
                    }
                    p.clone()
                }
            };
            if let Some(k) = profile.iter().position(|&d| !(d >= 0.0) || d > c * (1.0 + 1e-12)) {
                return Err(Error::Config(format!("demand.{id}: step {} value {} outside [0, capacity {c}]", k + 1, profile[k])));
            }
            b.demand.insert(id, profile);
        }
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        self.steps()?;
        let net = self.network()?;
        let sources: Vec<usize> = net.sources().into_iter().map(|p| net.links[p].id).collect();
        for id in self.demand.keys() {
            if !sources.contains(id) {
                return Err(Error::Config(format!("demand.{id}: link is not a source")));
            }
        }
        self.boundary()?;
        for id in &self.objective_links {
            net.link(*id).ok_or_else(|| Error::Config(format!("objective_links: unknown link {id}")))?;
        }
        for id in &self.report_links {
            net.link(*id).ok_or_else(|| Error::Config(format!("report_links: unknown link {id}")))?;
        }
        for (id, cap) in &self.caps {
            net.link(*id).ok_or_else(|| Error::Config(format!("caps.{id}: unknown link")))?;
            if let Some(c) = cap {
                if !(*c > 0.0) {
                    return Err(Error::Config(format!("caps.{id}: cap must be positive, got {c}")));
                }
            }
        }
        self.uncertainty.validate().map_err(|e| Error::Config(format!("uncertainty: {e}")))?;
        self.emission.build().map_err(|e| Error::Config(format!("emission: {e}")))?;
        Ok(())
    }

    /// Copy with every finite cap multiplied by `factor`.
    pub fn with_cap_scale(&self, factor: f64) -> Scenario {
        let mut s = self.clone();
        for c in s.caps.values_mut().flatten() {
            *c *= factor;
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Base,
    Lwre,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Base => "base",
            Mode::Lwre => "lwre",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub scenario: String,
    pub mode: Mode,
    pub objective: f64,
    /// "optimal" when branch-and-bound closed the gap, "limit" when it ran
    /// out of time or nodes, "heuristic" when only the plan search ran
    pub status: String,
    pub best_bound: Option<f64>,
    /// grams per reported link over the horizon, from the replay
    pub link_emissions: BTreeMap<usize, f64>,
    pub total_emission: f64,
    /// caps in force (empty for base runs)
    pub caps: BTreeMap<usize, f64>,
    pub violations_pct: BTreeMap<usize, f64>,
    /// robust worst-case bound per capped link (g)
    pub robust_bound: BTreeMap<usize, f64>,
    pub stops: BTreeMap<usize, f64>,
    /// largest |MILP flow − replayed flow| (veh/s)
    pub max_flow_mismatch: f64,
    pub plan: SignalPlan,
    pub meter: BTreeMap<usize, Vec<f64>>,
    #[serde(skip)]
    pub grids: Vec<(usize, MoskowitzGrid)>,
    #[serde(skip)]
    pub trace: Option<SimulationTrace>,
}

pub fn violation_pct(emission: f64, cap: f64) -> f64 {
    ((emission - cap) / cap).max(0.0) * 100.0
}

/// Build the model for a scenario (robust rows only in `Lwre` mode; caps
/// that are `null` stay out of the model).
pub fn build_model(sc: &Scenario, mode: Mode) -> Result<SignalMilp> {
    let net = sc.network()?;
    let b = sc.boundary()?;
    let n = sc.steps()?;
    let opts = MilpOptions { bigm: sc.solver.bigm, coupling: sc.solver.coupling, objective_links: sc.objective_links.clone() };
    let mut m = build_signal_milp(&net, &b, n, &opts)?;
    if mode == Mode::Lwre {
        let w = crate::robust::gram_weight(net.dt);
        let floor = n as f64 * sc.uncertainty.upper[0] * w;
        for (&id, cap) in &sc.caps {
            let Some(cap) = *cap else { continue };
            if sc.uncertainty.budget_feasible() && cap < floor {
                return Err(Error::Infeasible(format!("cap {cap} g on link {id} is below the zero-occupancy worst case {floor} g")));
            }
            m.add_robust_affine(id, cap, &sc.uncertainty)?;
        }
    }
    Ok(m)
}

/// Seed for the plan search: a plan and (optionally) a metering profile.
pub type Seed = (SignalPlan, Option<BTreeMap<usize, Vec<f64>>>);

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub report: RunReport,
    pub best: Candidate,
}

pub fn run_base(sc: &Scenario, seeds: &[Seed]) -> Result<RunOutcome> {
    run(sc, Mode::Base, seeds)
}

pub fn run_lwre(sc: &Scenario, seeds: &[Seed]) -> Result<RunOutcome> {
    run(sc, Mode::Lwre, seeds)
}

pub fn run(sc: &Scenario, mode: Mode, seeds: &[Seed]) -> Result<RunOutcome> {
    sc.validate()?;
    let m = build_model(sc, mode)?;
    let cfg = SearchConfig { time_limit: Duration::from_secs_f64(sc.solver.search_time_s), ..Default::default() };
    let mut best = search_plan(&m, seeds, &cfg)?;
    let mut status = "heuristic".to_string();
    let mut best_bound = None;
    if sc.solver.bnb_time_s > 0.0 || !best.feasible() {
        let bnb = BnbConfig {
            gap: sc.solver.gap,
            node_limit: sc.solver.node_limit,
            // without a feasible plan from the search, B&B gets at least a minute to find one
            time_limit: Some(Duration::from_secs_f64(if best.feasible() { sc.solver.bnb_time_s } else { sc.solver.bnb_time_s.max(60.0) })),
            ..Default::default()
        };
        let start = best.feasible().then_some(best.x.as_slice());
        match m.solve(&bnb, start) {
            Ok(sol) => {
                status = if sol.status == MilpStatus::Optimal { "optimal" } else { "limit" }.into();
                best_bound = Some(sol.best_bound);
                if !best.feasible() || sol.objective > best.objective {
                    let plan = m.plan_from(&sol.x);
                    let meter = meter_from(&m, &sol.x);
                    best = Candidate { plan, meter, objective: sol.objective, violation: 0.0, x: sol.x };
                }
            }
            Err(Error::Solver(MilpError::Infeasible)) => return Err(Error::Infeasible(format!("{} ({}) has no feasible signal plan", sc.name, mode.name()))),
            Err(Error::Solver(MilpError::LimitReached)) => return Err(Error::SolverLimit(format!("{} ({}): no feasible plan found within the limits", sc.name, mode.name()))),
            Err(e) => return Err(e),
        }
    }
    let mut report = replay_report(sc, mode, &m, &best)?;
    report.status = status;
    report.best_bound = best_bound;
    Ok(RunOutcome { report, best })
}

/// Base and emission-constrained runs of one scenario. Each run seeds the
/// other: the base solution starts the constrained search, and a constrained
/// solution (feasible for the base model, since both share the metered
/// coupling) is fed back if it beats the base incumbent.
pub fn run_pair(sc: &Scenario) -> Result<(RunOutcome, RunOutcome)> {
    let base = run_base(sc, &[])?;
    let lwre = run_lwre(sc, &[(base.best.plan.clone(), Some(base.best.meter.clone()))])?;
    if lwre.report.objective > base.report.objective {
        let base = run_base(sc, &[(lwre.best.plan.clone(), Some(lwre.best.meter.clone()))])?;
        return Ok((base, lwre));
    }
    Ok((base, lwre))
}

/// Admitted fraction of boundary demand per source and step.
fn meter_from(m: &SignalMilp, x: &[f64]) -> BTreeMap<usize, Vec<f64>> {
    m.net
        .sources()
        .into_iter()
        .map(|p| {
            let id = m.net.links[p].id;
            let d = m.boundary.demand.get(&id);
            let f = (0..m.steps).map(|k| d.map_or(1.0, |d| if d[k] > 0.0 { (x[m.links[p].q_in[k].0] / d[k]).clamp(0.0, 1.0) } else { 1.0 })).collect();
            (id, f)
        })
        .collect()
}

/// Replay a solution and measure emissions over the Lax-Hopf fields, cap
/// violations and stops.
pub fn replay_report(sc: &Scenario, mode: Mode, m: &SignalMilp, best: &Candidate) -> Result<RunReport> {
    let model = sc.emission.build()?;
    let b = m.realized_boundary(&best.x);
    let tr = ltm_simulate(&m.net, &best.plan, &b, m.steps)?;
    let (qin, qout) = m.flows(&best.x);
    let mut mismatch: f64 = 0.0;
    for p in 0..m.net.links.len() {
        for k in 0..m.steps {
            mismatch = mismatch.max((qin[p][k] - tr.inflow[p][k]).abs()).max((qout[p][k] - tr.outflow[p][k]).abs());
        }
    }
    let mut link_emissions = BTreeMap::new();
    let mut stops = BTreeMap::new();
    let mut grids = Vec::new();
    for (p, link) in m.net.links.iter().enumerate() {
        let grid = lax_hopf_moskowitz(link, &tr.curves[p], sc.replay.dx, sc.replay.substeps)?;
        let (rho, v) = density_velocity_fields(&grid, &link.fd);
        let a = acceleration_field(&v, grid.dt, grid.dx);
        let aer = link_aer(&rho, &v, &a, &model, grid.dx)?;
        if sc.report_links.is_empty() || sc.report_links.contains(&link.id) {
            link_emissions.insert(link.id, total_emission(&aer, grid.dt));
        }
        stops.insert(link.id, count_stops(&grid, sc.replay.stop_levels, sc.replay.v_stop));
        if sc.replay.grid_links.contains(&link.id) {
            grids.push((link.id, grid));
        }
    }
    let total_emission = link_emissions.values().sum();
    let caps: BTreeMap<usize, f64> = match mode {
        Mode::Lwre => sc.caps.iter().filter_map(|(&id, c)| c.map(|c| (id, c))).collect(),
        Mode::Base => BTreeMap::new(),
    };
    let violations_pct = caps.iter().filter_map(|(&id, &c)| link_emissions.get(&id).map(|&e| (id, violation_pct(e, c)))).collect();
    let w = crate::robust::gram_weight(m.net.dt);
    let robust_bound = caps
        .keys()
        .filter_map(|&id| {
            let p = m.net.position(id)?;
            let occ: Vec<f64> = (1..=m.steps).map(|k| tr.curves[p].occupancy(k)).collect();
            sc.uncertainty.worst_case(&occ, w).map(|v| (id, v))
        })
        .collect();
    Ok(RunReport {
        scenario: sc.name.clone(),
        mode,
        objective: best.objective,
        status: "heuristic".into(),
        best_bound: None,
        link_emissions,
        total_emission,
        caps,
        violations_pct,
        robust_bound,
        stops,
        max_flow_mismatch: mismatch,
        plan: best.plan.clone(),
        meter: best.meter.clone(),
        grids,
        trace: Some(tr),
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|v| format!("{v:.6}")).unwrap_or_default()
}

fn report_label(r: &RunReport) -> String {
    format!("{}/{}", r.scenario, r.mode.name())
}

/// Write the report files into `out_dir`:
///
/// * `summary.csv` — one row per report
/// * `comparison.csv` — per link and report: emission, cap, violation, stops
/// * `violations.csv` — capped links × reports, empty cell where a report
///   has no cap on the link
/// * `stops.csv` — links × reports
/// * `grid_<scenario>_<mode>_link<id>.csv` and `contours_….csv` for the
///   kept Moskowitz grids
///
/// Output depends only on the reports, in the order given.
pub fn emit_reports(reports: &[RunReport], out_dir: &Path, contour_levels_n: usize) -> Result<()> {
    std::fs::create_dir_all(out_dir)?;
    let mut s = String::from("scenario,mode,objective,status,best_bound,total_emission_g,max_violation_pct,mean_stops,max_flow_mismatch\n");
    for r in reports {
        let maxv = r.violations_pct.values().copied().fold(0.0, f64::max);
        let mean_stops = if r.stops.is_empty() { 0.0 } else { r.stops.values().sum::<f64>() / r.stops.len() as f64 };
        writeln!(s, "{},{},{:.6},{},{},{:.6},{:.6},{:.6},{:.3e}", r.scenario, r.mode.name(), r.objective, r.status, fmt_opt(r.best_bound), r.total_emission, maxv, mean_stops, r.max_flow_mismatch).unwrap();
    }
    std::fs::write(out_dir.join("summary.csv"), s)?;

    let mut s = String::from("scenario,mode,link,emission_g,cap_g,violation_pct,robust_bound_g,stops\n");
    for r in reports {
        for (&id, &e) in &r.link_emissions {
            let cap = r.caps.get(&id).copied();
            writeln!(s, "{},{},{id},{e:.6},{},{},{},{:.6}", r.scenario, r.mode.name(), fmt_opt(cap), fmt_opt(r.violations_pct.get(&id).copied()), fmt_opt(r.robust_bound.get(&id).copied()), r.stops.get(&id).copied().unwrap_or(0.0)).unwrap();
        }
    }
    std::fs::write(out_dir.join("comparison.csv"), s)?;

    let labels: Vec<String> = reports.iter().map(report_label).collect();
    let table = |name: &str, rows: Vec<usize>, cell: &dyn Fn(&RunReport, usize) -> Option<f64>| -> Result<()> {
        let mut s = String::from("link");
        for l in &labels {
            write!(s, ",{l}").unwrap();
        }
        s.push('\n');
        for id in rows {
            write!(s, "{id}").unwrap();
            for r in reports {
                write!(s, ",{}", fmt_opt(cell(r, id))).unwrap();
            }
            s.push('\n');
        }
        std::fs::write(out_dir.join(name), s)?;
        Ok(())
    };
    let capped: std::collections::BTreeSet<usize> = reports.iter().flat_map(|r| r.caps.keys().copied()).collect();
    table("violations.csv", capped.into_iter().collect(), &|r, id| r.violations_pct.get(&id).copied())?;
    let links: std::collections::BTreeSet<usize> = reports.iter().flat_map(|r| r.stops.keys().copied()).collect();
    table("stops.csv", links.into_iter().collect(), &|r, id| r.stops.get(&id).copied())?;

    for r in reports {
        for (id, grid) in &r.grids {
            let stem = format!("{}_{}_link{id}", r.scenario, r.mode.name());
            grid.write_csv(std::fs::File::create(out_dir.join(format!("grid_{stem}.csv")))?)?;
            let mut s = String::from("level,n,t,x\n");
            for (i, c) in contour_levels(grid, contour_levels_n).into_iter().enumerate() {
                for (t, x) in trajectory(grid, c) {
                    writeln!(s, "{i},{c:.6},{t:.3},{x:.3}").unwrap();
                }
            }
            std::fs::write(out_dir.join(format!("contours_{stem}.csv")), s)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preset_one_demand() {
        let sc = preset("scenario-I").unwrap();
        let b = sc.boundary().unwrap();
        assert_eq!(b.demand[&1].len(), 90);
        assert!((b.demand[&1][0] - 0.531 * 4.0 / 3.0).abs() < 1e-12);
        assert!((b.demand[&10][5] - 0.516 * 4.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn preset_topology() {
        let sc = preset("II").unwrap();
        let net = sc.network().unwrap();
        assert_eq!(net.links.len(), 10);
        assert_eq!(net.signalized().len(), 3);
        for j in &net.junctions {
            for row in &j.turning {
                assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
        let mut src: Vec<usize> = net.sources().into_iter().map(|p| net.links[p].id).collect();
        src.sort();
        assert_eq!(src, vec![1, 2, 10]);
        let mut snk: Vec<usize> = net.sinks().into_iter().map(|p| net.links[p].id).collect();
        snk.sort();
        assert_eq!(snk, vec![7, 8, 9]);
    }

    #[test]
    fn unknown_preset() {
        assert!(matches!(preset("IV"), Err(Error::Config(_))));
    }

    #[test]
    fn horizon_mismatch() {
        let mut sc = preset("I").unwrap();
        sc.horizon_s = 905.0;
        assert!(matches!(sc.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn schema_error_names_field() {
        let mut v = serde_json::to_value(preset("I").unwrap()).unwrap();
        v["network"]["links"][3]["length"] = serde_json::json!("long");
        let e = parse_scenario(&v.to_string()).unwrap_err().to_string();
        assert!(e.contains("network.links[3].length"), "{e}");
    }

    #[test]
    fn json_round_trip() {
        let sc = preset("III").unwrap();
        let back = parse_scenario(&serde_json::to_string(&sc).unwrap()).unwrap();
        assert_eq!(back.demand, sc.demand);
        assert_eq!(back.caps, sc.caps);
        assert_eq!(back.uncertainty, sc.uncertainty);
    }

    #[test]
    fn demand_above_capacity_rejected() {
        let mut sc = preset("I").unwrap();
        sc.demand.insert(1, DemandSpec::Ratio(1.2));
        assert!(sc.validate().is_err());
        sc.demand.insert(1, DemandSpec::Profile(vec![0.5; 89]));
        assert!(sc.validate().is_err());
    }

    #[test]
    fn violation_formula() {
        assert_eq!(violation_pct(90.0, 100.0), 0.0);
        assert!((violation_pct(105.45, 100.0) - 5.45).abs() < 1e-9);
    }

    #[test]
    fn empty_reports_header_only() {
        let dir = tempfile::tempdir().unwrap();
        emit_reports(&[], dir.path(), 50).unwrap();
        for f in ["summary.csv", "comparison.csv", "violations.csv", "stops.csv"] {
            let t = std::fs::read_to_string(dir.path().join(f)).unwrap();
            assert_eq!(t.lines().count(), 1, "{f}");
        }
    }
}
