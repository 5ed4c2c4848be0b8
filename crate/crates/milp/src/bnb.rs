//! Best-first branch-and-bound over LP relaxations.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::{Duration, Instant};

use crate::error::MilpError;
use crate::lp::{from_microlp, sparse_problem, LpEngine, LpSolution, LpStatus};
use crate::model::{MilpModel, ObjSense, VarKind};
use crate::simplex::solve_dense;

#[derive(Debug, Clone)]
pub struct BnbConfig {
    /// Relative optimality gap at which the search stops.
    pub gap: f64,
    pub node_limit: usize,
    pub time_limit: Option<Duration>,
    pub engine: LpEngine,
    pub int_tol: f64,
    pub feas_tol: f64,
    /// Run a fractional dive from the root before branching.
    pub dive: bool,
    /// Optional branching priority per variable (higher first); within a
    /// priority class the most fractional binary is chosen.
    pub priority: Option<Vec<u32>>,
}

impl Default for BnbConfig {
    fn default() -> Self {
        BnbConfig {
            gap: 1e-6,
            node_limit: 1_000_000,
            time_limit: None,
            engine: LpEngine::Auto,
            int_tol: 1e-6,
            feas_tol: 1e-7,
            dive: true,
            priority: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MilpStatus {
    /// Incumbent proven within the gap tolerance.
    Optimal,
    /// Node or time limit hit; the incumbent is the best found.
    LimitReached,
}

#[derive(Debug, Clone)]
pub struct MilpSolution {
    pub status: MilpStatus,
    pub objective: f64,
    pub x: Vec<f64>,
    /// Best bound on the optimum in the model's sense.
    pub best_bound: f64,
    pub gap: f64,
    /// Nodes created by branching (0 when the root relaxation is integral).
    pub nodes: usize,
    pub lp_solves: usize,
}

struct Node {
    id: u64,
    bound: f64,
    fixings: Vec<(usize, f64)>,
}

impl PartialEq for Node {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Node {
    fn cmp(&self, o: &Self) -> Ordering {
        self.bound.total_cmp(&o.bound).then_with(|| o.id.cmp(&self.id))
    }
}

/// LP oracle; the sparse engine re-optimizes from cached solutions with the
/// dual simplex instead of starting cold.
enum Relaxer<'a> {
    Dense { model: &'a MilpModel, lower: Vec<f64>, upper: Vec<f64> },
    Sparse { model: &'a MilpModel, vars: Vec<microlp::Variable>, root: Result<microlp::Solution, microlp::Error>, last: Option<(Vec<(usize, f64)>, microlp::Solution)> },
}

impl<'a> Relaxer<'a> {
    fn new(model: &'a MilpModel, engine: LpEngine) -> Self {
        let lower: Vec<f64> = model.vars.iter().map(|v| v.lower).collect();
        let upper: Vec<f64> = model.vars.iter().map(|v| v.upper).collect();
        match engine.resolve(model) {
            LpEngine::Sparse => {
                let (p, vars) = sparse_problem(model, &lower, &upper);
                let root = p.solve();
                Relaxer::Sparse { model, vars, root, last: None }
            }
            _ => Relaxer::Dense { model, lower, upper },
        }
    }

    fn solve(&mut self, fixings: &[(usize, f64)]) -> LpSolution {
        match self {
            Relaxer::Dense { model, lower, upper } => {
                let mut l = lower.clone();
                let mut u = upper.clone();
                for &(j, v) in fixings {
                    l[j] = v;
                    u[j] = v;
                }
                solve_dense(model, &l, &u)
            }
            Relaxer::Sparse { model, vars, root, last } => {
                let root = match root {
                    Ok(r) => r,
                    Err(e) => return from_microlp(model, Err(e.clone()), vars),
                };
                let (start, rest): (microlp::Solution, &[(usize, f64)]) = match last.take() {
                    Some((fx, sol)) if fx.len() < fixings.len() && fixings.starts_with(&fx) => {
                        let k = fx.len();
                        (sol, &fixings[k..])
                    }
                    _ => (root.clone(), fixings),
                };
                let mut cur = Ok(start);
                for &(j, v) in rest {
                    cur = cur.and_then(|s| s.fix_var(vars[j], v));
                }
                if let Ok(s) = &cur {
                    *last = Some((fixings.to_vec(), s.clone()));
                }
                from_microlp(model, cur, vars)
            }
        }
    }
}

fn branching_var(model: &MilpModel, x: &[f64], int_tol: f64, priority: Option<&[u32]>) -> Option<usize> {
    let mut best: Option<(usize, u32, f64)> = None;
    for (j, v) in model.vars.iter().enumerate() {
        if v.kind != VarKind::Binary {
            continue;
        }
        let f = x[j] - x[j].floor();
        let dist = f.min(1.0 - f);
        if dist <= int_tol {
            continue;
        }
        let p = priority.map_or(0, |p| p[j]);
        let better = match best {
            None => true,
            Some((_, bp, bd)) => p > bp || (p == bp && dist > bd + 1e-12),
        };
        if better {
            best = Some((j, p, dist));
        }
    }
    best.map(|b| b.0)
}

fn rounded(model: &MilpModel, x: &[f64]) -> Vec<f64> {
    x.iter()
        .zip(&model.vars)
        .map(|(&v, var)| if var.kind == VarKind::Binary { v.round() } else { v })
        .collect()
}

/// Solve `model` to the configured gap. Errors on infeasibility,
/// unboundedness, or a limit hit before any feasible point was found.
pub fn solve_milp(model: &MilpModel, cfg: &BnbConfig) -> Result<MilpSolution, MilpError> {
    solve_milp_with_start(model, cfg, None)
}

/// As [`solve_milp`], seeded with a candidate solution. The start is used
/// as the initial incumbent only if it passes the feasibility check.
pub fn solve_milp_with_start(model: &MilpModel, cfg: &BnbConfig, start: Option<&[f64]>) -> Result<MilpSolution, MilpError> {
    solve_milp_with_heuristic(model, cfg, start, None)
}

/// Node heuristic: maps a node's relaxation solution to a candidate
/// solution, which is accepted as incumbent only if feasible and better.
pub type NodeHeuristic<'a> = &'a mut dyn FnMut(&[f64]) -> Option<Vec<f64>>;

/// As [`solve_milp_with_start`], calling `heuristic` on every fractional
/// node relaxation.
pub fn solve_milp_with_heuristic(model: &MilpModel, cfg: &BnbConfig, start: Option<&[f64]>, mut heuristic: Option<NodeHeuristic>) -> Result<MilpSolution, MilpError> {
    model.validate()?;
    if cfg.priority.as_ref().is_some_and(|p| p.len() != model.num_vars()) {
        return Err(MilpError::InvalidModel("branching priority length differs from variable count".into()));
    }
    let prio = cfg.priority.as_deref();
    let t0 = Instant::now();
    let s = if model.sense == ObjSense::Maximize { 1.0 } else { -1.0 };
    let mut incumbent: Option<(f64, Vec<f64>)> = None;
    if let Some(x0) = start {
        if x0.len() == model.num_vars() {
            match model.check_feasible(x0, 1e-6, cfg.int_tol) {
                Ok(()) => {
                    let x = rounded(model, x0);
                    incumbent = Some((s * model.objective_value(&x), x));
                }
                Err(v) => log::warn!("MIP start rejected: {v}"),
            }
        } else {
            log::warn!("MIP start has wrong length ({} vs {})", x0.len(), model.num_vars());
        }
    }

    let mut relax = Relaxer::new(model, cfg.engine);
    let mut lp_solves = 1usize;
    let root = relax.solve(&[]);
    match root.status {
        LpStatus::Optimal => {}
        LpStatus::Infeasible => return Err(MilpError::Infeasible),
        LpStatus::Unbounded => return Err(MilpError::Unbounded),
        LpStatus::IterationLimit => {
            return match incumbent {
                Some((v, x)) => Ok(MilpSolution { status: MilpStatus::LimitReached, objective: s * v, x, best_bound: f64::NAN, gap: f64::INFINITY, nodes: 0, lp_solves }),
                None => Err(MilpError::Numerical("root relaxation failed".into())),
            }
        }
    }

    let abs_gap = |inc: f64| (cfg.gap * inc.abs()).max(1e-9);
    let out_of_time = |t0: Instant| cfg.time_limit.is_some_and(|lim| t0.elapsed() >= lim);

    if cfg.dive && branching_var(model, &root.x, cfg.int_tol, prio).is_some() {
        let mut fixings: Vec<(usize, f64)> = Vec::new();
        let mut sol = root.clone();
        let mut backtracked = false;
        for _ in 0..(4 * model.num_binaries() + 10) {
            if out_of_time(t0) {
                break;
            }
            if let Some((v, _)) = &incumbent {
                if s * sol.objective <= *v + abs_gap(*v) {
                    break;
                }
            }
            // least fractional variable first: cheap to round
            let mut pick: Option<(usize, f64)> = None;
            for (j, var) in model.vars.iter().enumerate() {
                if var.kind != VarKind::Binary {
                    continue;
                }
                let f = sol.x[j] - sol.x[j].floor();
                let dist = f.min(1.0 - f);
                if dist > cfg.int_tol && pick.map_or(true, |(_, d)| dist < d - 1e-12) {
                    pick = Some((j, dist));
                }
            }
            let Some((j, _)) = pick else {
                let x = rounded(model, &sol.x);
                let v = s * model.objective_value(&x);
                if incumbent.as_ref().map_or(true, |(iv, _)| v > *iv) {
                    incumbent = Some((v, x));
                }
                break;
            };
            let target = sol.x[j].round();
            fixings.push((j, target));
            let mut next = relax.solve(&fixings);
            lp_solves += 1;
            if !next.is_optimal() {
                if backtracked {
                    break;
                }
                backtracked = true;
                fixings.last_mut().unwrap().1 = 1.0 - target;
                next = relax.solve(&fixings);
                lp_solves += 1;
                if !next.is_optimal() {
                    break;
                }
            }
            sol = next;
        }
    }

    let mut heap = BinaryHeap::new();
    let mut next_id = 1u64;
    let mut nodes = 0usize;
    heap.push(Node { id: 0, bound: s * root.objective, fixings: Vec::new() });
    let mut pending_root = Some(root);
    let mut limit_hit = false;

    while let Some(node) = heap.pop() {
        if let Some((v, _)) = &incumbent {
            if node.bound <= *v + abs_gap(*v) {
                continue;
            }
        }
        if nodes >= cfg.node_limit || out_of_time(t0) {
            heap.push(node);
            limit_hit = true;
            break;
        }
        let sol = match pending_root.take() {
            Some(r) if node.id == 0 => r,
            _ => {
                lp_solves += 1;
                relax.solve(&node.fixings)
            }
        };
        match sol.status {
            LpStatus::Optimal => {}
            LpStatus::Infeasible => continue,
            LpStatus::Unbounded => return Err(MilpError::Unbounded),
            LpStatus::IterationLimit => {
                log::warn!("node {} relaxation hit iteration limit; pruned", node.id);
                continue;
            }
        }
        let val = s * sol.objective;
        if let Some((v, _)) = &incumbent {
            if val <= *v + abs_gap(*v) {
                continue;
            }
        }
        let branch = branching_var(model, &sol.x, cfg.int_tol, prio);
        if let (Some(_), Some(h)) = (branch, heuristic.as_mut()) {
            if let Some(cand) = h(&sol.x) {
                if cand.len() == model.num_vars() && model.check_feasible(&cand, 1e-6, cfg.int_tol).is_ok() {
                    let cand = rounded(model, &cand);
                    let cv = s * model.objective_value(&cand);
                    if incumbent.as_ref().map_or(true, |(iv, _)| cv > *iv) {
                        incumbent = Some((cv, cand));
                    }
                    if let Some((v, _)) = &incumbent {
                        if val <= *v + abs_gap(*v) {
                            continue;
                        }
                    }
                }
            }
        }
        match branch {
            None => {
                let x = rounded(model, &sol.x);
                incumbent = Some((s * model.objective_value(&x), x));
            }
            Some(j) => {
                let bound = val.min(node.bound);
                for side in [0.0, 1.0] {
                    let mut fx = node.fixings.clone();
                    fx.push((j, side));
                    heap.push(Node { id: next_id, bound, fixings: fx });
                    next_id += 1;
                    nodes += 1;
                }
            }
        }
    }

    let Some((v, x)) = incumbent else {
        return if limit_hit { Err(MilpError::LimitReached) } else { Err(MilpError::Infeasible) };
    };
    let open_bound = heap.iter().map(|n| n.bound).fold(f64::NEG_INFINITY, f64::max);
    let bound = if limit_hit { open_bound.max(v) } else { v };
    let gap = (bound - v) / v.abs().max(1e-10);
    let status = if !limit_hit || bound <= v + abs_gap(v) { MilpStatus::Optimal } else { MilpStatus::LimitReached };
    Ok(MilpSolution { status, objective: s * v, x, best_bound: s * bound, gap, nodes, lp_solves })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{LinExpr, Sense};

    #[test]
    fn single_binary() {
        let mut m = MilpModel::new("b", ObjSense::Maximize);
        let x = m.add_binary("x");
        m.add_row("c", &LinExpr::var(x).scaled(2.0), Sense::Le, 3.0, "");
        m.set_objective(&LinExpr::var(x), ObjSense::Maximize);
        let s = solve_milp(&m, &BnbConfig::default()).unwrap();
        assert_eq!(s.objective, 1.0);
        assert_eq!(s.nodes, 0);
    }

    #[test]
    fn rejects_infeasible_start() {
        let mut m = MilpModel::new("b", ObjSense::Maximize);
        let x = m.add_binary("x");
        let y = m.add_binary("y");
        let mut e = LinExpr::var(x);
        e.add_term(y, 1.0);
        m.add_row("c", &e, Sense::Le, 1.0, "");
        m.set_objective(&e, ObjSense::Maximize);
        let s = solve_milp_with_start(&m, &BnbConfig::default(), Some(&[1.0, 1.0])).unwrap();
        assert_eq!(s.objective, 1.0);
    }

    #[test]
    fn infeasible_binary_program() {
        let mut m = MilpModel::new("inf", ObjSense::Minimize);
        let x = m.add_binary("x");
        m.add_row("lo", &LinExpr::var(x), Sense::Ge, 0.3, "");
        m.add_row("hi", &LinExpr::var(x), Sense::Le, 0.7, "");
        assert!(matches!(solve_milp(&m, &BnbConfig::default()), Err(MilpError::Infeasible)));
    }
}
