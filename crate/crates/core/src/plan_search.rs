//! Simulation-based search for good signal plans (and source metering) used
//! to seed branch-and-bound on instances too large to solve outright.
//!
//! Every candidate is evaluated by simulating it and reading a complete
//! MILP solution off the trace, so any candidate with zero violation is a
//! feasible MIP start.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::ltm::{ltm_simulate, SignalPlan};
use crate::network::Boundary;
use crate::robust::CapRhs;
use crate::signal_milp::{SignalMilp, SourceCoupling};

#[derive(Debug, Clone)]
pub struct SearchConfig {
    /// local-search sweeps
    pub max_rounds: usize,
    /// metering factor decrement
    pub meter_step: f64,
    /// steps per metering block
    pub meter_block: usize,
    /// score penalty per unit of cap violation
    pub penalty: f64,
    pub time_limit: Duration,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig { max_rounds: 20, meter_step: 0.25, meter_block: 3, penalty: 10.0, time_limit: Duration::from_secs(120) }
    }
}

#[derive(Debug, Clone)]
pub struct Candidate {
    pub plan: SignalPlan,
    /// per source link id, per step: fraction of boundary demand admitted
    pub meter: BTreeMap<usize, Vec<f64>>,
    pub objective: f64,
    /// total excess of robust worst cases over their caps
    pub violation: f64,
    pub x: Vec<f64>,
}

impl Candidate {
    pub fn score(&self, penalty: f64) -> f64 {
        self.objective - penalty * self.violation
    }

    pub fn feasible(&self) -> bool {
        self.violation <= 0.0
    }
}

fn full_meter(m: &SignalMilp) -> BTreeMap<usize, Vec<f64>> {
    m.net.sources().into_iter().map(|p| (m.net.links[p].id, vec![1.0; m.steps])).collect()
}

fn metered_boundary(m: &SignalMilp, meter: &BTreeMap<usize, Vec<f64>>) -> Boundary {
    let mut b = m.boundary.clone();
    for (id, d) in b.demand.iter_mut() {
        if let Some(f) = meter.get(id) {
            for (x, g) in d.iter_mut().zip(f) {
                *x *= g;
            }
        }
    }
    b
}

/// Total amount by which robust worst cases exceed their caps. Caps are
/// shaved by a relative 1e-9 so that zero violation survives feasibility
/// tolerances.
pub fn violation(m: &SignalMilp, x: &[f64]) -> f64 {
    m.robust
        .iter()
        .map(|b| match b.rhs {
            CapRhs::Fixed(cap) => (b.worst_case(x) - cap * (1.0 - 1e-9)).max(0.0),
            CapRhs::Epigraph(_) => 0.0,
        })
        .sum()
}

/// Simulate a plan (with metering) and score it against the model.
pub fn evaluate(m: &SignalMilp, plan: &SignalPlan, meter: &BTreeMap<usize, Vec<f64>>) -> Result<Candidate> {
    let b = metered_boundary(m, meter);
    let tr = ltm_simulate(&m.net, plan, &b, m.steps)?;
    let x = m.start_from_trace(&tr)?;
    Ok(Candidate { plan: plan.clone(), meter: meter.clone(), objective: m.model.objective_value(&x), violation: violation(m, &x), x })
}

/// Myopic plan: each signalized junction serves, step by step, the approach
/// that can discharge the most.
pub fn greedy_plan(m: &SignalMilp) -> Result<SignalPlan> {
    let mut plan = SignalPlan::fixed_cycle(&m.net, m.steps, 1);
    let sig = m.net.signalized();
    for k in 1..=m.steps {
        let tr = ltm_simulate(&m.net, &plan, &m.boundary, k)?;
        for &j in &sig {
            let z = &tr.zeta[j][k - 1];
            let best = (0..z.len()).max_by(|&a, &b| z[a].total_cmp(&z[b]).then(b.cmp(&a))).unwrap_or(0);
            plan.green[j][k - 1] = best;
        }
    }
    Ok(plan)
}

/// Plan from a previous model (possibly with a different horizon):
/// truncated, or extended with the last green.
pub fn adapt_plan(plan: &SignalPlan, steps: usize) -> SignalPlan {
    SignalPlan {
        green: plan
            .green
            .iter()
            .map(|row| {
                let mut r: Vec<usize> = row.iter().copied().take(steps).collect();
                let last = r.last().copied().unwrap_or(0);
                r.resize(steps, last);
                r
            })
            .collect(),
    }
}

struct Search<'a> {
    m: &'a SignalMilp,
    cfg: &'a SearchConfig,
    t0: Instant,
    evals: usize,
}

impl Search<'_> {
    fn out_of_time(&self) -> bool {
        self.t0.elapsed() >= self.cfg.time_limit
    }

    fn eval(&mut self, plan: &SignalPlan, meter: &BTreeMap<usize, Vec<f64>>) -> Result<Candidate> {
        self.evals += 1;
        evaluate(self.m, plan, meter)
    }

    fn better(&self, a: &Candidate, b: &Candidate) -> bool {
        let p = self.cfg.penalty;
        a.score(p) > b.score(p) + 1e-12
    }

    /// First-improvement sweep over single-step and short-segment green
    /// changes.
    fn flip_sweep(&mut self, cur: &mut Candidate) -> Result<bool> {
        let mut improved = false;
        let sig = self.m.net.signalized();
        for len in [1usize, 2, 3] {
            for &j in &sig {
                let phases = self.m.net.junctions[j].incoming.len();
                for k in 0..self.m.steps.saturating_sub(len - 1) {
                    if self.out_of_time() {
                        return Ok(improved);
                    }
                    for g in 0..phases {
                        if (k..k + len).all(|s| cur.plan.green[j][s] == g) {
                            continue;
                        }
                        let mut plan = cur.plan.clone();
                        for s in k..k + len {
                            plan.green[j][s] = g;
                        }
                        let c = self.eval(&plan, &cur.meter)?;
                        if self.better(&c, cur) {
                            *cur = c;
                            improved = true;
                        }
                    }
                }
            }
        }
        Ok(improved)
    }

    /// Best single metering change (decrease while infeasible, increase
    /// while feasible); returns whether one was applied.
    fn meter_move(&mut self, cur: &mut Candidate) -> Result<bool> {
        if self.m.opts.coupling != SourceCoupling::Metered {
            return Ok(false);
        }
        let tighten = !cur.feasible();
        let step = if tighten { -self.cfg.meter_step } else { self.cfg.meter_step };
        let block = self.cfg.meter_block.max(1);
        let mut best: Option<Candidate> = None;
        for id in cur.meter.keys().copied().collect::<Vec<_>>() {
            let mut start = 0;
            while start < self.m.steps {
                if self.out_of_time() {
                    break;
                }
                let end = (start + block).min(self.m.steps);
                let mut meter = cur.meter.clone();
                let f = meter.get_mut(&id).unwrap();
                let mut changed = false;
                for v in &mut f[start..end] {
                    let nv = (*v + step).clamp(0.0, 1.0);
                    changed |= nv != *v;
                    *v = nv;
                }
                start = end;
                if !changed {
                    continue;
                }
                let c = self.eval(&cur.plan, &meter)?;
                let pick = match &best {
                    None => true,
                    Some(b) => {
                        if tighten {
                            // most violation removed per unit of objective lost
                            let gain = |x: &Candidate| (cur.violation - x.violation) / ((cur.objective - x.objective).max(0.0) + 1e-3);
                            gain(&c) > gain(b)
                        } else {
                            self.better(&c, b)
                        }
                    }
                };
                if pick {
                    best = Some(c);
                }
            }
        }
        match best {
            Some(b) if (tighten && b.violation < cur.violation - 1e-12) || (!tighten && b.feasible() && self.better(&b, cur)) => {
                *cur = b;
                Ok(true)
            }
            _ => Ok(false),
        }
    }
}

/// Search from the given seed plans (plus built-in fixed cycles and the
/// greedy plan); returns the best candidate found, feasible if any was.
pub fn search_plan(m: &SignalMilp, seeds: &[(SignalPlan, Option<BTreeMap<usize, Vec<f64>>>)], cfg: &SearchConfig) -> Result<Candidate> {
    let mut s = Search { m, cfg, t0: Instant::now(), evals: 0 };
    let full = full_meter(m);
    let mut pool: Vec<Candidate> = Vec::new();
    for (plan, meter) in seeds {
        plan.validate(&m.net, m.steps)?;
        let meter = match (m.opts.coupling, meter) {
            (SourceCoupling::Metered, Some(f)) => f.clone(),
            _ => full.clone(),
        };
        pool.push(s.eval(plan, &meter)?);
    }
    for phase in 1..=6 {
        let plan = SignalPlan::fixed_cycle(&m.net, m.steps, phase);
        pool.push(s.eval(&plan, &full)?);
        let shifted = SignalPlan { green: plan.green.iter().map(|r| r.iter().map(|g| if *g == 0 { 1 } else { 0 }).collect()).collect() };
        if shifted.validate(&m.net, m.steps).is_ok() {
            pool.push(s.eval(&shifted, &full)?);
        }
    }
    pool.push(s.eval(&greedy_plan(m)?, &full)?);
    let p = cfg.penalty;
    let mut cur = pool.into_iter().max_by(|a, b| a.score(p).total_cmp(&b.score(p))).ok_or_else(|| Error::Config("empty search pool".into()))?;

    for _ in 0..cfg.max_rounds {
        if s.out_of_time() {
            break;
        }
        let mut improved = false;
        while !cur.feasible() && s.meter_move(&mut cur)? {
            improved = true;
        }
        improved |= s.flip_sweep(&mut cur)?;
        if cur.feasible() {
            // give back metering where the caps allow it
            let mut n = 0;
            while n < 4 * m.steps && s.meter_move(&mut cur)? {
                improved = true;
                n += 1;
            }
        }
        if !improved {
            break;
        }
    }
    log::info!("plan search: {} evaluations, objective {:.5}, violation {:.4} ({:?})", s.evals, cur.objective, cur.violation, s.t0.elapsed());
    Ok(cur)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fd::TriangularFD;
    use crate::network::{JunctionSpec, Link, Network};
    use crate::signal_milp::{build_signal_milp, BigMConfig, MilpOptions};

    fn merge() -> Network {
        let fd = TriangularFD::urban();
        let links = (1..=3).map(|id| Link::new(id, 400.0, fd, 10.0).unwrap()).collect();
        let j = JunctionSpec { name: "m".into(), incoming: vec![1, 2], outgoing: vec![3], turning: vec![vec![1.0], vec![1.0]], signalized: true };
        Network::new(10.0, links, vec![j]).unwrap()
    }

    #[test]
    fn adapt_extends_with_last_green() {
        let p = SignalPlan { green: vec![vec![0, 1]] };
        assert_eq!(adapt_plan(&p, 4).green[0], vec![0, 1, 1, 1]);
        assert_eq!(adapt_plan(&p, 1).green[0], vec![0]);
    }

    #[test]
    fn greedy_serves_the_only_demand() {
        let net = merge();
        let b = Boundary::constant(&[(1, 0.0), (2, 0.8)], 12);
        let opts = MilpOptions { bigm: BigMConfig::default(), coupling: SourceCoupling::Exact, objective_links: vec![3] };
        let m = build_signal_milp(&net, &b, 12, &opts).unwrap();
        let plan = greedy_plan(&m).unwrap();
        // approach 2 has traffic from step 4 (after the free-flow travel time)
        assert!(plan.green[0][3..].iter().all(|&g| g == 1));
    }

    #[test]
    fn search_result_is_feasible_start() {
        let net = merge();
        let b = Boundary::constant(&[(1, 0.7), (2, 0.6)], 12);
        let opts = MilpOptions { bigm: BigMConfig::default(), coupling: SourceCoupling::Exact, objective_links: vec![3] };
        let m = build_signal_milp(&net, &b, 12, &opts).unwrap();
        let c = search_plan(&m, &[], &SearchConfig::default()).unwrap();
        m.model.check_feasible(&c.x, 1e-6, 1e-9).unwrap();
        let cyc = evaluate(&m, &SignalPlan::fixed_cycle(&net, 12, 3), &full_meter(&m)).unwrap();
        assert!(c.objective >= cyc.objective - 1e-12);
    }
}
