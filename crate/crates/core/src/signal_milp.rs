//! Discrete-time signal-control MILP on cumulative counts.
//!
//! Per link and step the model carries entering/exiting flows, cumulative
//! counts, demand, supply and the two regime binaries; per junction and
//! step it carries the exact min linearisation of the junction flow, the
//! signal controls and the turning split. All big-M constants are derived
//! row by row from variable bounds, which are themselves tightened by
//! propagating the largest counts the boundary demand can produce.

use serde::{Deserialize, Serialize};

use greenwave_milp::{solve_milp_with_heuristic, BnbConfig, LinExpr, MilpModel, MilpSolution, ObjSense, Sense, VarId};

use crate::error::{Error, Result};
use crate::ltm::{ltm_simulate, SignalPlan, SimulationTrace};
use crate::network::{Boundary, Network};
use crate::robust::RobustBlock;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BigMConfig {
    /// Fixed M for every conditional row; `None` derives the smallest valid
    /// M per row from variable bounds.
    pub m: Option<f64>,
    /// Width (veh) of the band in which a regime binary may take either value.
    pub eps: f64,
}

impl Default for BigMConfig {
    fn default() -> Self {
        BigMConfig { m: None, eps: 1e-4 }
    }
}

/// How source links take up boundary demand.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SourceCoupling {
    /// inflow = min(demand, supply), enforced with a selection binary
    #[default]
    Exact,
    /// inflow ≤ min(demand, supply): vehicles may be held at the boundary
    Metered,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MilpOptions {
    pub bigm: BigMConfig,
    pub coupling: SourceCoupling,
    /// link ids whose discharge is rewarded in the objective
    pub objective_links: Vec<usize>,
}

/// Variables of one link; vectors are indexed by step − 1.
#[derive(Debug, Clone)]
pub struct LinkVars {
    pub q_in: Vec<VarId>,
    pub q_out: Vec<VarId>,
    pub n_up: Vec<VarId>,
    pub n_down: Vec<VarId>,
    pub demand: Vec<VarId>,
    pub supply: Vec<VarId>,
    pub r_down: Vec<VarId>,
    pub r_up: Vec<VarId>,
}

#[derive(Debug, Clone)]
pub enum Selector {
    /// two options: the binary is 1 when option 1 attains the min
    Single(VarId),
    OneHot(Vec<VarId>),
}

/// `target = min(options)` linearised with selection binaries.
#[derive(Debug, Clone)]
pub struct MinBlock {
    pub target: VarId,
    pub options: Vec<LinExpr>,
    pub selector: Selector,
}

#[derive(Debug, Clone)]
pub struct JunctionVars {
    /// per incoming: control binary (None when unsignalized)
    pub u: Vec<Option<VarId>>,
    pub zeta: Vec<VarId>,
}

#[derive(Debug, Clone)]
pub struct SignalMilp {
    pub model: MilpModel,
    pub net: Network,
    pub boundary: Boundary,
    pub steps: usize,
    pub opts: MilpOptions,
    pub links: Vec<LinkVars>,
    /// per junction, per step
    pub junctions: Vec<Vec<JunctionVars>>,
    pub mins: Vec<MinBlock>,
    /// throughput objective (kept separately for epigraph weighting)
    pub throughput: LinExpr,
    pub robust: Vec<RobustBlock>,
    /// largest cumulative counts reachable, per link, index 0..=N
    pub ub_up: Vec<Vec<f64>>,
    pub ub_down: Vec<Vec<f64>>,
}

fn demand_at(b: &Boundary, id: usize, k: usize) -> f64 {
    b.demand.get(&id).map_or(0.0, |v| v[k - 1])
}

impl SignalMilp {
    /// Count variable as an expression; indices ≤ 0 are the empty initial state.
    pub fn n_up_expr(&self, p: usize, j: isize) -> LinExpr {
        if j <= 0 {
            LinExpr::new()
        } else {
            LinExpr::var(self.links[p].n_up[j as usize - 1])
        }
    }

    pub fn n_down_expr(&self, p: usize, j: isize) -> LinExpr {
        if j <= 0 {
            LinExpr::new()
        } else {
            LinExpr::var(self.links[p].n_down[j as usize - 1])
        }
    }

    /// N_up − N_down at the end of step `k`.
    pub fn occupancy_expr(&self, p: usize, k: usize) -> LinExpr {
        let mut e = self.n_up_expr(p, k as isize);
        e.add_expr(&self.n_down_expr(p, k as isize), -1.0);
        e
    }

    pub fn position(&self, id: usize) -> Result<usize> {
        self.net.position(id).ok_or_else(|| Error::Config(format!("unknown link {id}")))
    }

    fn bigm(&self, derived: f64) -> f64 {
        self.opts.bigm.m.unwrap_or(derived).max(0.0)
    }
}

/// Largest reachable cumulative counts under the boundary demand, ignoring
/// signals (every approach treated as always green).
fn count_upper_bounds(net: &Network, b: &Boundary, steps: usize) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let nl = net.links.len();
    let dt = net.dt;
    let mut up = vec![vec![0.0; steps + 1]; nl];
    let mut down = vec![vec![0.0; steps + 1]; nl];
    let sources = net.sources();
    for k in 1..=steps {
        for p in 0..nl {
            let l = &net.links[p];
            let arrived: f64 = if k >= l.delta_f { up[p][k - l.delta_f] } else { 0.0 };
            down[p][k] = arrived.min(down[p][k - 1] + l.capacity() * dt);
        }
        for &p in &sources {
            let l = &net.links[p];
            up[p][k] = up[p][k - 1] + demand_at(b, l.id, k).min(l.capacity()) * dt;
        }
        for j in 0..net.junctions.len() {
            for (o_idx, &o) in net.outgoing_positions(j).iter().enumerate() {
                let feed: f64 = net.incoming_positions(j).iter().zip(&net.junctions[j].turning).map(|(&i, row)| row[o_idx] * down[i][k]).sum();
                up[o][k] = feed.min(up[o][k - 1] + net.links[o].capacity() * dt);
            }
        }
    }
    (up, down)
}

fn add_min(model: &mut MilpModel, name: &str, target: VarId, options: Vec<LinExpr>, mins: &mut Vec<MinBlock>, fixed_m: Option<f64>) {
    let n = options.len();
    let lo_min = options.iter().map(|o| o.bounds(model).0).fold(f64::INFINITY, f64::min);
    let selector = if n == 2 { Selector::Single(model.add_binary(format!("{name}_sel"))) } else { Selector::OneHot((0..n).map(|m| model.add_binary(format!("{name}_sel{m}"))).collect()) };
    for (m, opt) in options.iter().enumerate() {
        // target ≤ option
        let mut e = LinExpr::var(target);
        e.add_expr(opt, -1.0);
        model.add_row(format!("{name}_le{m}"), &e, Sense::Le, 0.0, "junction_min");
        // target ≥ option − M(1 − sel_m)
        let big = fixed_m.unwrap_or((opt.bounds(model).1 - lo_min).max(0.0));
        let mut e = LinExpr::var(target);
        e.add_expr(opt, -1.0);
        match &selector {
            Selector::Single(b) => {
                // sel_0 = 1 − b, sel_1 = b
                if m == 0 {
                    e.add_term(*b, big);
                    model.add_row(format!("{name}_ge{m}"), &e, Sense::Ge, 0.0, "junction_min");
                } else {
                    e.add_term(*b, -big);
                    model.add_row(format!("{name}_ge{m}"), &e, Sense::Ge, -big, "junction_min");
                }
            }
            Selector::OneHot(s) => {
                e.add_term(s[m], -big);
                model.add_row(format!("{name}_ge{m}"), &e, Sense::Ge, -big, "junction_min");
            }
        }
    }
    if let Selector::OneHot(s) = &selector {
        let mut e = LinExpr::new();
        for &v in s {
            e.add_term(v, 1.0);
        }
        model.add_row(format!("{name}_one"), &e, Sense::Eq, 1.0, "junction_min");
    }
    mins.push(MinBlock { target, options, selector });
}

/// Build the signal-control MILP over `steps` steps.
pub fn build_signal_milp(net: &Network, boundary: &Boundary, steps: usize, opts: &MilpOptions) -> Result<SignalMilp> {
    if steps == 0 {
        return Err(Error::Config("horizon must be at least one step".into()));
    }
    let eps = opts.bigm.eps;
    if !(eps > 0.0 && eps < net.min_capacity() * net.dt) {
        return Err(Error::Config(format!("eps = {eps} must lie in (0, C_min·dt)")));
    }
    for &id in &opts.objective_links {
        net.position(id).ok_or_else(|| Error::Config(format!("objective link {id} is not in the network")))?;
    }
    for (&id, d) in &boundary.demand {
        let p = net.position(id).ok_or_else(|| Error::Config(format!("demand given for unknown link {id}")))?;
        if !net.sources().contains(&p) || d.len() < steps {
            return Err(Error::Config(format!("bad demand profile for link {id}")));
        }
    }
    let dt = net.dt;
    let (ub_up, ub_down) = count_upper_bounds(net, boundary, steps);
    let mut model = MilpModel::new("signal", ObjSense::Maximize);
    let mut links = Vec::with_capacity(net.links.len());
    for (p, l) in net.links.iter().enumerate() {
        let id = l.id;
        let c = l.capacity();
        let mut lv = LinkVars { q_in: vec![], q_out: vec![], n_up: vec![], n_down: vec![], demand: vec![], supply: vec![], r_down: vec![], r_up: vec![] };
        for k in 1..=steps {
            lv.q_in.push(model.add_continuous(format!("qin_{id}_{k}"), 0.0, c));
            lv.q_out.push(model.add_continuous(format!("qout_{id}_{k}"), 0.0, c));
            lv.n_up.push(model.add_continuous(format!("nup_{id}_{k}"), 0.0, ub_up[p][k]));
            lv.n_down.push(model.add_continuous(format!("ndn_{id}_{k}"), 0.0, ub_down[p][k]));
            lv.demand.push(model.add_continuous(format!("dem_{id}_{k}"), 0.0, c));
            lv.supply.push(model.add_continuous(format!("sup_{id}_{k}"), 0.0, c));
            lv.r_down.push(model.add_binary(format!("rdn_{id}_{k}")));
            lv.r_up.push(model.add_binary(format!("rup_{id}_{k}")));
        }
        links.push(lv);
    }
    let mut m = SignalMilp {
        model,
        net: net.clone(),
        boundary: boundary.clone(),
        steps,
        opts: opts.clone(),
        links,
        junctions: vec![Vec::with_capacity(steps); net.junctions.len()],
        mins: Vec::new(),
        throughput: LinExpr::new(),
        robust: Vec::new(),
        ub_up,
        ub_down,
    };

    for p in 0..net.links.len() {
        let l = net.links[p].clone();
        let id = l.id;
        let c = l.capacity();
        let cdt = c * dt;
        let storage = l.storage();
        for k in 1..=steps {
            let ki = k as isize;
            let lv = m.links[p].clone();
            let ix = k - 1;
            // cumulative count dynamics
            let mut e = LinExpr::var(lv.n_up[ix]);
            e.add_expr(&m.n_up_expr(p, ki - 1), -1.0).add_term(lv.q_in[ix], -dt);
            m.model.add_row(format!("cnt_up_{id}_{k}"), &e, Sense::Eq, 0.0, "count_dynamics");
            let mut e = LinExpr::var(lv.n_down[ix]);
            e.add_expr(&m.n_down_expr(p, ki - 1), -1.0).add_term(lv.q_out[ix], -dt);
            m.model.add_row(format!("cnt_dn_{id}_{k}"), &e, Sense::Eq, 0.0, "count_dynamics");

            // demand: X = N_up[k − Δᶠ] − N_down[k − 1]
            let mut x = m.n_up_expr(p, ki - l.delta_f as isize);
            x.add_expr(&m.n_down_expr(p, ki - 1), -1.0);
            let (xlo, xhi) = x.bounds(&m.model);
            m.model.vars[lv.demand[ix].0].upper = c.min(xhi.max(0.0) / dt);
            let rd = lv.r_down[ix];
            if xhi < cdt - eps {
                m.model.vars[rd.0].upper = 0.0;
            }
            let ma = m.bigm(cdt - eps - xlo);
            let mut e = x.clone();
            e.add_term(rd, -ma);
            m.model.add_row(format!("dem_on_{id}_{k}"), &e, Sense::Ge, cdt - eps - ma, "demand_phase");
            let mb = m.bigm(xhi - cdt);
            let mut e = x.clone();
            e.add_term(rd, -mb);
            m.model.add_row(format!("dem_off_{id}_{k}"), &e, Sense::Le, cdt, "demand_phase");
            let mut e = LinExpr::var(lv.demand[ix]);
            e.add_term(rd, -c);
            m.model.add_row(format!("dem_cap_{id}_{k}"), &e, Sense::Ge, 0.0, "demand_value");
            // D = min(C, X/δt) never exceeds X/δt; kept unconditional for a tighter relaxation
            let mut e = LinExpr::new();
            e.add_term(lv.demand[ix], dt).add_expr(&x, -1.0);
            m.model.add_row(format!("dem_env_{id}_{k}"), &e, Sense::Le, 0.0, "demand_value");
            let md = m.bigm(xhi - cdt);
            let mut e = LinExpr::new();
            e.add_term(lv.demand[ix], dt).add_expr(&x, -1.0).add_term(rd, md);
            m.model.add_row(format!("dem_ge_{id}_{k}"), &e, Sense::Ge, 0.0, "demand_value");

            // supply: Y = N_down[k − Δᵇ] + ρ_jam·L − N_up[k − 1]
            let mut y = m.n_down_expr(p, ki - l.delta_b as isize);
            y.add_constant(storage).add_expr(&m.n_up_expr(p, ki - 1), -1.0);
            let (ylo, yhi) = y.bounds(&m.model);
            m.model.vars[lv.supply[ix].0].upper = c.min(yhi.max(0.0) / dt);
            let ru = lv.r_up[ix];
            if ylo > cdt {
                m.model.vars[ru.0].upper = 0.0;
            }
            let me = m.bigm(yhi - cdt);
            let mut e = y.clone();
            e.add_term(ru, me);
            m.model.add_row(format!("sup_on_{id}_{k}"), &e, Sense::Le, cdt + me, "supply_phase");
            let mf = m.bigm(cdt - eps - ylo);
            let mut e = y.clone();
            e.add_term(ru, mf);
            m.model.add_row(format!("sup_off_{id}_{k}"), &e, Sense::Ge, cdt - eps, "supply_phase");
            let mut e = LinExpr::var(lv.supply[ix]);
            e.add_term(ru, c);
            m.model.add_row(format!("sup_cap_{id}_{k}"), &e, Sense::Ge, c, "supply_value");
            let mut e = LinExpr::new();
            e.add_term(lv.supply[ix], dt).add_expr(&y, -1.0);
            m.model.add_row(format!("sup_env_{id}_{k}"), &e, Sense::Le, 0.0, "supply_value");
            let mh = m.bigm(yhi - cdt);
            let mut e = LinExpr::new();
            e.add_term(lv.supply[ix], dt).add_expr(&y, -1.0).add_term(ru, -mh);
            m.model.add_row(format!("sup_ge_{id}_{k}"), &e, Sense::Ge, -mh, "supply_value");
        }
    }

    // boundary links
    for p in net.sources() {
        let id = net.links[p].id;
        for k in 1..=steps {
            let lv = m.links[p].clone();
            let d = demand_at(boundary, id, k);
            let mut e = LinExpr::var(lv.q_in[k - 1]);
            e.add_term(lv.supply[k - 1], -1.0);
            m.model.add_row(format!("src_sup_{id}_{k}"), &e, Sense::Le, 0.0, "source");
            match opts.coupling {
                SourceCoupling::Metered => {
                    m.model.add_row(format!("src_dem_{id}_{k}"), &LinExpr::var(lv.q_in[k - 1]), Sense::Le, d, "source");
                }
                SourceCoupling::Exact => {
                    let fixed = opts.bigm.m;
                    add_min(&mut m.model, &format!("src_{id}_{k}"), lv.q_in[k - 1], vec![LinExpr::constant(d), LinExpr::var(lv.supply[k - 1])], &mut m.mins, fixed);
                }
            }
        }
    }
    for p in net.sinks() {
        let id = net.links[p].id;
        for k in 1..=steps {
            let lv = m.links[p].clone();
            match boundary.supply.get(&id) {
                None => {
                    let mut e = LinExpr::var(lv.q_out[k - 1]);
                    e.add_term(lv.demand[k - 1], -1.0);
                    m.model.add_row(format!("sink_{id}_{k}"), &e, Sense::Eq, 0.0, "sink");
                }
                Some(s) => {
                    let fixed = opts.bigm.m;
                    add_min(&mut m.model, &format!("sink_{id}_{k}"), lv.q_out[k - 1], vec![LinExpr::var(lv.demand[k - 1]), LinExpr::constant(s[k - 1])], &mut m.mins, fixed);
                }
            }
        }
    }

    // junctions
    for j in 0..net.junctions.len() {
        let spec = net.junctions[j].clone();
        let ins = net.incoming_positions(j).to_vec();
        let outs = net.outgoing_positions(j).to_vec();
        let jn = if spec.name.is_empty() { format!("j{j}") } else { spec.name.clone() };
        for k in 1..=steps {
            let mut jv = JunctionVars { u: Vec::new(), zeta: Vec::new() };
            for (ii, &pi) in ins.iter().enumerate() {
                let li = &net.links[pi];
                let c = li.capacity();
                let lid = li.id;
                let ratios: Vec<LinExpr> = outs
                    .iter()
                    .zip(&spec.turning[ii])
                    .filter(|(_, &a)| a > 0.0)
                    .map(|(&po, &a)| LinExpr::var(m.links[po].supply[k - 1]).scaled(1.0 / a))
                    .collect();
                let beta = if ratios.len() == 1 {
                    ratios[0].clone()
                } else {
                    let hi = ratios.iter().map(|r| r.bounds(&m.model).1).fold(f64::INFINITY, f64::min);
                    let b = m.model.add_continuous(format!("beta_{jn}_{lid}_{k}"), 0.0, hi);
                    let fixed = opts.bigm.m;
                    add_min(&mut m.model, &format!("beta_{jn}_{lid}_{k}"), b, ratios, &mut m.mins, fixed);
                    LinExpr::var(b)
                };
                let zhi = c.min(m.model.vars[m.links[pi].demand[k - 1].0].upper).min(beta.bounds(&m.model).1);
                let zeta = m.model.add_continuous(format!("zeta_{jn}_{lid}_{k}"), 0.0, zhi);
                let fixed = opts.bigm.m;
                add_min(&mut m.model, &format!("zeta_{jn}_{lid}_{k}"), zeta, vec![LinExpr::var(m.links[pi].demand[k - 1]), beta], &mut m.mins, fixed);
                let q = m.links[pi].q_out[k - 1];
                if spec.signalized {
                    let u = m.model.add_binary(format!("u_{jn}_{lid}_{k}"));
                    let mut e = LinExpr::var(q);
                    e.add_term(zeta, -1.0);
                    m.model.add_row(format!("gate_le_{jn}_{lid}_{k}"), &e, Sense::Le, 0.0, "signal_gate");
                    let mz = m.bigm(zhi);
                    let mut e = LinExpr::var(q);
                    e.add_term(zeta, -1.0).add_term(u, -mz);
                    m.model.add_row(format!("gate_ge_{jn}_{lid}_{k}"), &e, Sense::Ge, -mz, "signal_gate");
                    let mut e = LinExpr::var(q);
                    e.add_term(u, -m.bigm(zhi));
                    m.model.add_row(format!("gate_off_{jn}_{lid}_{k}"), &e, Sense::Le, 0.0, "signal_gate");
                    jv.u.push(Some(u));
                } else {
                    let mut e = LinExpr::var(q);
                    e.add_term(zeta, -1.0);
                    m.model.add_row(format!("pass_{jn}_{lid}_{k}"), &e, Sense::Eq, 0.0, "signal_gate");
                    jv.u.push(None);
                }
                jv.zeta.push(zeta);
            }
            if spec.signalized {
                let mut e = LinExpr::new();
                for u in jv.u.iter().flatten() {
                    e.add_term(*u, 1.0);
                }
                m.model.add_row(format!("split_{jn}_{k}"), &e, Sense::Eq, 1.0, "signal_split");
            }
            for (oi, &po) in outs.iter().enumerate() {
                let mut e = LinExpr::var(m.links[po].q_in[k - 1]);
                for (ii, &pi) in ins.iter().enumerate() {
                    e.add_term(m.links[pi].q_out[k - 1], -spec.turning[ii][oi]);
                }
                m.model.add_row(format!("turn_{jn}_{}_{k}", net.links[po].id), &e, Sense::Eq, 0.0, "flow_split");
            }
            m.junctions[j].push(jv);
        }
    }

    let mut obj = LinExpr::new();
    for &id in &opts.objective_links {
        let p = net.position(id).unwrap();
        for k in 1..=steps {
            obj.add_term(m.links[p].q_out[k - 1], 1.0 / (1.0 + k as f64));
        }
    }
    m.model.set_objective(&obj, ObjSense::Maximize);
    m.throughput = obj;
    Ok(m)
}

impl SignalMilp {
    /// Signal plan read from the control binaries of a solution.
    pub fn plan_from(&self, x: &[f64]) -> SignalPlan {
        let green = self
            .junctions
            .iter()
            .map(|steps| {
                steps
                    .iter()
                    .map(|jv| {
                        jv.u.iter().enumerate().filter_map(|(i, u)| u.map(|u| (i, x[u.0]))).max_by(|a, b| a.1.total_cmp(&b.1)).map_or(0, |(i, _)| i)
                    })
                    .collect()
            })
            .collect();
        SignalPlan { green }
    }

    /// Boundary whose source demand is the realised inflow of a solution;
    /// replaying it reproduces metered inflows exactly.
    pub fn realized_boundary(&self, x: &[f64]) -> Boundary {
        let mut b = self.boundary.clone();
        for p in self.net.sources() {
            let id = self.net.links[p].id;
            b.demand.insert(id, self.links[p].q_in.iter().map(|v| x[v.0].max(0.0)).collect());
        }
        b
    }

    /// Branching priorities: signal controls first, then piece selectors of
    /// robust rows; regime and min-selection binaries follow from those.
    pub fn branching_priority(&self) -> Vec<u32> {
        let mut p = vec![0; self.model.num_vars()];
        for steps in &self.junctions {
            for jv in steps {
                for u in jv.u.iter().flatten() {
                    p[u.0] = 2;
                }
            }
        }
        for b in &self.robust {
            for z in b.pieces.iter().filter_map(|pc| pc.z) {
                p[z.0] = 1;
            }
        }
        p
    }

    /// Feasible completion of a relaxation whose signal controls are all
    /// integral: simulate that plan (with the relaxation's source inflows
    /// when metering) and read every variable off the trace.
    pub fn complete_relaxation(&self, x: &[f64]) -> Option<Vec<f64>> {
        let integral = self.junctions.iter().flatten().flat_map(|jv| jv.u.iter().flatten()).all(|u| (x[u.0] - x[u.0].round()).abs() <= 1e-6);
        if !integral {
            return None;
        }
        let plan = self.plan_from(x);
        let b = match self.opts.coupling {
            SourceCoupling::Exact => self.boundary.clone(),
            SourceCoupling::Metered => self.realized_boundary(x),
        };
        let tr = ltm_simulate(&self.net, &plan, &b, self.steps).ok()?;
        self.start_from_trace(&tr).ok()
    }

    /// Branch-and-bound with signal-first branching and the simulation
    /// completion as node heuristic.
    pub fn solve(&self, cfg: &BnbConfig, start: Option<&[f64]>) -> Result<MilpSolution> {
        let cfg = BnbConfig { priority: Some(self.branching_priority()), ..cfg.clone() };
        let mut h = |x: &[f64]| self.complete_relaxation(x);
        Ok(solve_milp_with_heuristic(&self.model, &cfg, start, Some(&mut h))?)
    }

    /// Entering and exiting flows of a solution, per link and step.
    pub fn flows(&self, x: &[f64]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let get = |vs: &Vec<VarId>| vs.iter().map(|v| x[v.0]).collect::<Vec<f64>>();
        (self.links.iter().map(|l| get(&l.q_in)).collect(), self.links.iter().map(|l| get(&l.q_out)).collect())
    }

    /// Occupancies N_up − N_down at steps 1..=N for the signed link terms.
    pub fn occupancy_values(&self, occ_terms: &[(usize, f64)], x: &[f64]) -> Vec<f64> {
        (1..=self.steps)
            .map(|k| {
                occ_terms
                    .iter()
                    .map(|&(p, s)| s * (x[self.links[p].n_up[k - 1].0] - x[self.links[p].n_down[k - 1].0]))
                    .sum()
            })
            .collect()
    }

    /// Complete variable vector from a simulation trace (typically the
    /// replay of a candidate plan with realised source inflows). Robust
    /// duals are filled by their closed-form optimum.
    pub fn start_from_trace(&self, tr: &SimulationTrace) -> Result<Vec<f64>> {
        if tr.steps != self.steps || tr.link_ids != self.net.link_ids() {
            return Err(Error::Config("trace does not match the model".into()));
        }
        let mut x = vec![0.0; self.model.num_vars()];
        for (p, lv) in self.links.iter().enumerate() {
            for k in 1..=self.steps {
                let ix = k - 1;
                x[lv.q_in[ix].0] = tr.inflow[p][ix];
                x[lv.q_out[ix].0] = tr.outflow[p][ix];
                x[lv.n_up[ix].0] = tr.curves[p].n_up[k];
                x[lv.n_down[ix].0] = tr.curves[p].n_down[k];
                x[lv.demand[ix].0] = tr.demand[p][ix];
                x[lv.supply[ix].0] = tr.supply[p][ix];
                x[lv.r_down[ix].0] = tr.r_down[p][ix] as u8 as f64;
                x[lv.r_up[ix].0] = tr.r_up[p][ix] as u8 as f64;
            }
        }
        for (j, steps) in self.junctions.iter().enumerate() {
            for (ix, jv) in steps.iter().enumerate() {
                for (i, u) in jv.u.iter().enumerate() {
                    if let Some(u) = u {
                        x[u.0] = if tr.plan.green[j][ix] == i { 1.0 } else { 0.0 };
                    }
                }
            }
        }
        // min blocks in creation order: β before ζ
        for mb in &self.mins {
            let vals: Vec<f64> = mb.options.iter().map(|o| o.eval(&x)).collect();
            let (arg, &best) = vals.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).unwrap();
            x[mb.target.0] = best;
            match &mb.selector {
                Selector::Single(b) => x[b.0] = arg as f64,
                Selector::OneHot(s) => {
                    for (m, v) in s.iter().enumerate() {
                        x[v.0] = (m == arg) as u8 as f64;
                    }
                }
            }
        }
        // re-impose the trace flows (min blocks on sources recompute q̄)
        for (p, lv) in self.links.iter().enumerate() {
            for ix in 0..self.steps {
                x[lv.q_in[ix].0] = tr.inflow[p][ix];
            }
        }
        crate::robust::fill_duals(self, &mut x);
        Ok(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fd::TriangularFD;
    use crate::network::{JunctionSpec, Link};

    fn one_link() -> Network {
        Network::single_link(Link::new(1, 400.0, TriangularFD::urban(), 10.0).unwrap())
    }

    #[test]
    fn empty_horizon_is_rejected() {
        let opts = MilpOptions { bigm: BigMConfig::default(), coupling: SourceCoupling::Exact, objective_links: vec![1] };
        assert!(build_signal_milp(&one_link(), &Boundary::default(), 0, &opts).is_err());
    }

    #[test]
    fn count_bounds_follow_demand() {
        let net = one_link();
        let b = Boundary::constant(&[(1, 0.5)], 6);
        let (up, down) = count_upper_bounds(&net, &b, 6);
        assert_eq!(up[0], vec![0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0]);
        assert_eq!(down[0], vec![0.0, 0.0, 0.0, 0.0, 5.0, 10.0, 15.0]);
    }

    #[test]
    fn junction_census() {
        let fd = TriangularFD::urban();
        let links = (1..=4).map(|id| Link::new(id, 400.0, fd, 10.0).unwrap()).collect();
        let j = JunctionSpec { name: "a".into(), incoming: vec![1, 2], outgoing: vec![3, 4], turning: vec![vec![0.5, 0.5], vec![0.3, 0.7]], signalized: true };
        let net = Network::new(10.0, links, vec![j]).unwrap();
        let b = Boundary::constant(&[(1, 0.5), (2, 0.5)], 3);
        let opts = MilpOptions { bigm: BigMConfig::default(), coupling: SourceCoupling::Exact, objective_links: vec![3, 4] };
        let m = build_signal_milp(&net, &b, 3, &opts).unwrap();
        // per link-step 8 variables; per source-step one selector; per
        // incoming-step β, its selector, ζ, its selector and u
        let n = 3;
        assert_eq!(m.model.num_vars(), 4 * n * 8 + 2 * n + 2 * n * 5);
        // per link-step 2 count + 5 demand + 5 supply rows; per source-step
        // supply bound + 2 min rows ×2; per sink-step 1; per incoming-step
        // β (4) + ζ (4) + gates (3); per junction-step split + 2 turning
        assert_eq!(m.model.num_rows(), 4 * n * 12 + 2 * n * 5 + 2 * n + 2 * n * 11 + n * 3);
    }
}
