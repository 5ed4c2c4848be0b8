//! Robust emission constraints.
//!
//! The semi-infinite constraint "emission ≤ cap for every coefficient vector
//! in the budget uncertainty set" is replaced by the dual of its inner
//! maximisation: per step k and order l, duals β, γ ≥ 0 and one θ ≥ 0 with
//!
//!   Σ U_l β_{l,k} − Σ L_l γ_{l,k} + B θ + N U₀ w ≤ E
//!   θ + β_{l,k} − γ_{l,k} = w · occ_k^l
//!
//! where B is the total first-order budget and w converts the rate units of
//! the coefficients into those of the cap (δt/3600 for g/h against grams).
//! Only order 1 is linear in the model variables; higher orders are exported
//! symbolically and can be evaluated for fixed occupancies.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use greenwave_milp::{solve_lp, LinExpr, LpEngine, LpStatus, MilpModel, ObjSense, Sense, VarId};

use crate::error::{Error, Result};
use crate::macro_relation::UncertaintySet;
use crate::signal_milp::SignalMilp;

/// Right-hand side of a robust row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CapRhs {
    Fixed(f64),
    /// epigraph variable standing in for the cap
    Epigraph(VarId),
}

/// Dual variables of one (piece of a) robust row.
#[derive(Debug, Clone)]
pub struct DualPiece {
    pub lower: [f64; 2],
    pub upper: [f64; 2],
    /// θ coefficient: first-order budget available to this piece
    pub budget: f64,
    pub beta: Vec<VarId>,
    pub gamma: Vec<VarId>,
    pub theta: VarId,
    /// piece selector (concave relations only)
    pub z: Option<VarId>,
    pub budget_row: usize,
}

#[derive(Debug, Clone)]
pub struct RobustBlock {
    pub name: String,
    /// occupancy per step 1..=N
    pub occ: Vec<LinExpr>,
    pub weight: f64,
    pub rhs: CapRhs,
    pub pieces: Vec<DualPiece>,
    pub concave: bool,
}

/// Per-piece bounds for a convex (max-of-pieces) relation with a budget
/// shared by the first-order coefficients of all pieces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexPwaSet {
    /// (lower [L0, L1], upper [U0, U1]) per piece
    pub pieces: Vec<([f64; 2], [f64; 2])>,
    pub sigma: f64,
}

impl ConvexPwaSet {
    pub fn validate(&self) -> Result<()> {
        if self.pieces.is_empty() {
            return Err(Error::Uncertainty("no pieces".into()));
        }
        for (m, (lo, up)) in self.pieces.iter().enumerate() {
            for l in 0..2 {
                if !(lo[l].is_finite() && up[l].is_finite()) || lo[l] > up[l] {
                    return Err(Error::Uncertainty(format!("piece {m} coefficient {l}: need finite L ≤ U")));
                }
            }
        }
        let sl: f64 = self.pieces.iter().map(|p| p.0[0] + p.0[1]).sum();
        let su: f64 = self.pieces.iter().map(|p| p.1[0] + p.1[1]).sum();
        let smax = if sl > 0.0 { su / sl } else { f64::INFINITY };
        if !(self.sigma >= 1.0) || self.sigma > smax * (1.0 + 1e-12) {
            return Err(Error::Uncertainty(format!("sigma {} outside [1, {smax}]", self.sigma)));
        }
        Ok(())
    }

    /// θ coefficient of piece `m` over `n` steps: the shared budget less what
    /// the other pieces' first-order coefficients need at their lower bounds.
    pub fn piece_budget(&self, m: usize, n: usize) -> f64 {
        let total = n as f64 * self.pieces.iter().map(|p| p.1[1]).sum::<f64>() / self.sigma;
        let others: f64 = self.pieces.iter().enumerate().filter(|(i, _)| *i != m).map(|(_, p)| p.0[1]).sum();
        total - n as f64 * others
    }

    /// Worst case over the set of max_m Σ_k (a_{0,m,k} + a_{1,m,k}·c_k)·w.
    pub fn worst_case(&self, occ: &[f64], w: f64) -> Option<f64> {
        let n = occ.len();
        (0..self.pieces.len())
            .filter_map(|m| {
                let (lo, up) = self.pieces[m];
                greedy_dual(&occ.iter().map(|c| c * w).collect::<Vec<_>>(), lo[1], up[1], self.piece_budget(m, n)).map(|d| d.value + n as f64 * up[0] * w)
            })
            .max_by(f64::total_cmp)
    }
}

/// Closed-form optimum of max Σ a_k c_k s.t. L ≤ a_k ≤ U, Σ a_k ≤ B and the
/// matching dual (β, γ, θ).
#[derive(Debug, Clone, PartialEq)]
pub struct GreedyDual {
    pub value: f64,
    pub theta: f64,
    pub beta: Vec<f64>,
    pub gamma: Vec<f64>,
}

/// `None` when the budget cannot hold every coefficient at its lower bound
/// (empty set; the dual is unbounded below).
pub fn greedy_dual(c: &[f64], lower: f64, upper: f64, budget: f64) -> Option<GreedyDual> {
    let n = c.len();
    let mut rem = budget - n as f64 * lower;
    if rem < -1e-9 * budget.abs().max(1.0) {
        return None;
    }
    rem = rem.max(0.0);
    let room = upper - lower;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| c[b].total_cmp(&c[a]).then(a.cmp(&b)));
    let mut value: f64 = c.iter().map(|ck| ck * lower).sum();
    let mut theta = 0.0;
    for &k in &order {
        if c[k] <= 0.0 {
            break;
        }
        if rem >= room {
            value += room * c[k];
            rem -= room;
        } else {
            value += rem * c[k];
            theta = c[k];
            break;
        }
    }
    Some(GreedyDual {
        value,
        theta,
        beta: c.iter().map(|ck| (ck - theta).max(0.0)).collect(),
        gamma: c.iter().map(|ck| (theta - ck).max(0.0)).collect(),
    })
}

/// Append the first-order dual rows for one piece. With `relax = Some((z, M))`
/// the budget row is loosened by M(1 − z).
#[allow(clippy::too_many_arguments)]
fn add_piece(
    model: &mut MilpModel,
    name: &str,
    occ: &[LinExpr],
    lower: [f64; 2],
    upper: [f64; 2],
    budget: f64,
    weight: f64,
    rhs: CapRhs,
    relax: Option<(VarId, f64)>,
) -> DualPiece {
    let n = occ.len();
    let theta = model.add_continuous(format!("theta_{name}"), 0.0, f64::INFINITY);
    let mut beta = Vec::with_capacity(n);
    let mut gamma = Vec::with_capacity(n);
    for k in 1..=n {
        beta.push(model.add_continuous(format!("beta_{name}_{k}"), 0.0, f64::INFINITY));
        gamma.push(model.add_continuous(format!("gamma_{name}_{k}"), 0.0, f64::INFINITY));
    }
    let mut row = LinExpr::new();
    for k in 0..n {
        row.add_term(beta[k], upper[1]).add_term(gamma[k], -lower[1]);
    }
    row.add_term(theta, budget);
    row.add_constant(n as f64 * upper[0] * weight);
    let mut cap = 0.0;
    match rhs {
        CapRhs::Fixed(e) => cap = e,
        CapRhs::Epigraph(z) => {
            row.add_term(z, -1.0);
        }
    }
    if let Some((z, big)) = relax {
        row.add_term(z, big);
        cap += big;
    }
    let budget_row = model.add_row(format!("rb_{name}"), &row, Sense::Le, cap, "robust_budget");
    for k in 0..n {
        let mut e = LinExpr::var(theta);
        e.add_term(beta[k], 1.0).add_term(gamma[k], -1.0).add_expr(&occ[k], -weight);
        model.add_row(format!("rc_{name}_{}", k + 1), &e, Sense::Eq, 0.0, "robust_coupling");
    }
    DualPiece { lower, upper, budget, beta, gamma, theta, z: relax.map(|r| r.0), budget_row }
}

fn affine_bounds(uset: &UncertaintySet) -> Result<([f64; 2], [f64; 2])> {
    uset.validate()?;
    if uset.degree() != 1 {
        return Err(Error::Uncertainty(format!("expected a first-order set, got degree {}", uset.degree())));
    }
    Ok(([uset.lower[0], uset.lower[1]], [uset.upper[0], uset.upper[1]]))
}

/// Robust counterpart of Σ_k (a₀ + a₁·occ_k)·w ≤ cap over an affine set.
pub fn robust_affine_constraints(model: &mut MilpModel, name: &str, occ: &[LinExpr], uset: &UncertaintySet, weight: f64, rhs: CapRhs) -> Result<RobustBlock> {
    let (lo, up) = affine_bounds(uset)?;
    check_rhs(rhs)?;
    let budget = occ.len() as f64 * uset.budget_per_step();
    let piece = add_piece(model, name, occ, lo, up, budget, weight, rhs, None);
    Ok(RobustBlock { name: name.into(), occ: occ.to_vec(), weight, rhs, pieces: vec![piece], concave: false })
}

fn check_rhs(rhs: CapRhs) -> Result<()> {
    match rhs {
        CapRhs::Fixed(e) if !(e > 0.0) && e != 0.0 => Err(Error::Config(format!("emission cap must be nonnegative, got {e}"))),
        _ => Ok(()),
    }
}

/// Convex (max-of-pieces) relation: every piece's robust row must hold.
pub fn robust_convex_pwa_constraints(model: &mut MilpModel, name: &str, occ: &[LinExpr], set: &ConvexPwaSet, weight: f64, rhs: CapRhs) -> Result<RobustBlock> {
    set.validate()?;
    check_rhs(rhs)?;
    let n = occ.len();
    let pieces = set
        .pieces
        .iter()
        .enumerate()
        .map(|(m, &(lo, up))| add_piece(model, &format!("{name}_p{}", m + 1), occ, lo, up, set.piece_budget(m, n), weight, rhs, None))
        .collect();
    Ok(RobustBlock { name: name.into(), occ: occ.to_vec(), weight, rhs, pieces, concave: false })
}

/// Concave (min-of-pieces) relation with independent per-piece sets: one
/// piece, chosen by binaries z_m with Σ z_m = 1, must satisfy its robust row.
pub fn robust_concave_pwa_constraints(model: &mut MilpModel, name: &str, occ: &[LinExpr], sets: &[UncertaintySet], weight: f64, cap: f64) -> Result<RobustBlock> {
    if sets.is_empty() {
        return Err(Error::Uncertainty("no pieces".into()));
    }
    check_rhs(CapRhs::Fixed(cap))?;
    let n = occ.len();
    let ranges: Vec<(f64, f64)> = occ.iter().map(|e| e.bounds(model)).collect();
    let mut pieces = Vec::with_capacity(sets.len());
    let mut one = LinExpr::new();
    for (m, s) in sets.iter().enumerate() {
        let (lo, up) = affine_bounds(s)?;
        let budget = n as f64 * s.budget_per_step();
        let big = (worst_case_bound(&ranges, lo, up, budget, weight) - cap).max(0.0);
        let z = model.add_binary(format!("z_{name}_p{}", m + 1));
        one.add_term(z, 1.0);
        pieces.push(add_piece(model, &format!("{name}_p{}", m + 1), occ, lo, up, budget, weight, CapRhs::Fixed(cap), Some((z, big))));
    }
    model.add_row(format!("rz_{name}"), &one, Sense::Eq, 1.0, "robust_piece_choice");
    Ok(RobustBlock { name: name.into(), occ: occ.to_vec(), weight, rhs: CapRhs::Fixed(cap), pieces, concave: true })
}

/// Upper bound on the optimal dual objective over all occupancies in the
/// given ranges (the relaxation constant of a concave piece).
fn worst_case_bound(ranges: &[(f64, f64)], lo: [f64; 2], up: [f64; 2], budget: f64, w: f64) -> f64 {
    let n = ranges.len() as f64;
    let monotone = lo[1] >= 0.0 && ranges.iter().all(|r| r.0 >= 0.0);
    if monotone {
        let c: Vec<f64> = ranges.iter().map(|r| r.1 * w).collect();
        if let Some(d) = greedy_dual(&c, lo[1], up[1], budget) {
            return d.value + n * up[0] * w;
        }
        return 0.0;
    }
    let a1 = lo[1].abs().max(up[1].abs());
    ranges.iter().map(|r| a1 * r.0.abs().max(r.1.abs()) * w).sum::<f64>() + n * lo[0].abs().max(up[0].abs()) * w
}

/// Equity: the worst-case emission difference of `occ_i − occ_j` is bounded.
pub fn equity_constraints(model: &mut MilpModel, name: &str, occ_i: &[LinExpr], occ_j: &[LinExpr], uset: &UncertaintySet, weight: f64, cap: f64) -> Result<RobustBlock> {
    if occ_i.len() != occ_j.len() {
        return Err(Error::Config("occupancy series differ in length".into()));
    }
    let diff: Vec<LinExpr> = occ_i
        .iter()
        .zip(occ_j)
        .map(|(a, b)| {
            let mut e = a.clone();
            e.add_expr(b, -1.0);
            e.normalized()
        })
        .collect();
    robust_affine_constraints(model, name, &diff, uset, weight, CapRhs::Fixed(cap))
}

/// Epigraph form: a free variable z replaces the cap and the objective
/// becomes max `throughput_weight`·throughput − z.
pub fn epigraph_min_emission(model: &mut MilpModel, name: &str, occ: &[LinExpr], uset: &UncertaintySet, weight: f64, throughput: &LinExpr, throughput_weight: f64) -> Result<(VarId, RobustBlock)> {
    let z = model.add_continuous(format!("z_{name}"), f64::NEG_INFINITY, f64::INFINITY);
    let block = robust_affine_constraints(model, name, occ, uset, weight, CapRhs::Epigraph(z))?;
    let mut obj = throughput.scaled(throughput_weight);
    obj.add_term(z, -1.0);
    model.set_objective(&obj, ObjSense::Maximize);
    Ok((z, block))
}

/// Robust rows for an arbitrary-order relation Σ_l a_l·occ^l.
#[derive(Debug, Clone)]
pub enum PolynomialRobust {
    /// first order: rows were appended to the model
    Appended(RobustBlock),
    /// higher order: symbolic rows only
    Symbolic(SymbolicRobust),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SymbolicRobust {
    pub name: String,
    pub uset: UncertaintySet,
    pub weight: f64,
    pub cap: f64,
    /// textual occupancy expression per step
    pub occ: Vec<String>,
}

pub fn general_polynomial_robust(model: &mut MilpModel, name: &str, occ: &[LinExpr], uset: &UncertaintySet, weight: f64, cap: f64) -> Result<PolynomialRobust> {
    if uset.degree() < 1 {
        return Err(Error::Uncertainty("relation order must be at least 1".into()));
    }
    if uset.degree() == 1 {
        return robust_affine_constraints(model, name, occ, uset, weight, CapRhs::Fixed(cap)).map(PolynomialRobust::Appended);
    }
    uset.validate()?;
    let occ = occ.iter().map(|e| expr_text(model, e)).collect();
    Ok(PolynomialRobust::Symbolic(SymbolicRobust { name: name.into(), uset: uset.clone(), weight, cap, occ }))
}

fn expr_text(model: &MilpModel, e: &LinExpr) -> String {
    let e = e.normalized();
    let mut s = String::new();
    for (i, &(v, c)) in e.terms.iter().enumerate() {
        let sign = if c < 0.0 { "-" } else if i > 0 { "+" } else { "" };
        let sep = if i > 0 { " " } else { "" };
        if c.abs() == 1.0 {
            let _ = write!(s, "{sep}{sign}{}{}", if i > 0 { " " } else { "" }, model.vars[v.0].name);
        } else {
            let _ = write!(s, "{sep}{sign}{}{} {}", if i > 0 { " " } else { "" }, c.abs(), model.vars[v.0].name);
        }
    }
    if e.constant != 0.0 || s.is_empty() {
        let _ = write!(s, "{}{}", if s.is_empty() { "" } else { " + " }, e.constant);
    }
    s
}

impl SymbolicRobust {
    fn steps(&self) -> usize {
        self.occ.len()
    }

    fn budget(&self) -> f64 {
        self.steps() as f64 * self.uset.budget_per_step()
    }

    /// Plain-text rows, one per line.
    pub fn to_text(&self) -> String {
        let n = self.steps();
        let deg = self.uset.degree();
        let mut s = String::new();
        let _ = writeln!(s, "\\ robust rows {} (order {deg}, weight {})", self.name, self.weight);
        let mut row = String::new();
        for l in 1..=deg {
            for k in 1..=n {
                let _ = write!(row, " + {} beta_{}_{l}_{k} - {} gamma_{}_{l}_{k}", self.uset.upper[l], self.name, self.uset.lower[l], self.name);
            }
        }
        let konst = n as f64 * self.uset.upper[0] * self.weight;
        let _ = writeln!(s, "rb_{}:{row} + {} theta_{} <= {}", self.name, self.budget(), self.name, self.cap - konst);
        for l in 1..=deg {
            for (k, o) in self.occ.iter().enumerate() {
                let k = k + 1;
                let _ = writeln!(s, "rc_{n}_{l}_{k}: theta_{n} + beta_{n}_{l}_{k} - gamma_{n}_{l}_{k} = {w} * ({o})^{l}", n = self.name, w = self.weight);
            }
        }
        s
    }

    /// Smallest left-hand side of the budget row (constant included) for
    /// fixed occupancy values, by solving the dual LP. `None` when the set is
    /// empty and the rows hold for any cap.
    pub fn evaluate(&self, occ: &[f64]) -> Result<Option<f64>> {
        if occ.len() != self.steps() {
            return Err(Error::Config("occupancy length differs from the horizon".into()));
        }
        let deg = self.uset.degree();
        let mut m = MilpModel::new("dual", ObjSense::Minimize);
        let theta = m.add_continuous("theta", 0.0, f64::INFINITY);
        let mut obj = LinExpr::var(theta).scaled(self.budget());
        for l in 1..=deg {
            for (k, &c) in occ.iter().enumerate() {
                let b = m.add_continuous(format!("b{l}_{k}"), 0.0, f64::INFINITY);
                let g = m.add_continuous(format!("g{l}_{k}"), 0.0, f64::INFINITY);
                obj.add_term(b, self.uset.upper[l]).add_term(g, -self.uset.lower[l]);
                let mut e = LinExpr::var(theta);
                e.add_term(b, 1.0).add_term(g, -1.0);
                m.add_row(format!("c{l}_{k}"), &e, Sense::Eq, c.powi(l as i32) * self.weight, "robust_coupling");
            }
        }
        m.set_objective(&obj, ObjSense::Minimize);
        let sol = solve_lp(&m, LpEngine::Dense);
        match sol.status {
            LpStatus::Optimal => Ok(Some(sol.objective + self.steps() as f64 * self.uset.upper[0] * self.weight)),
            LpStatus::Unbounded => Ok(None),
            s => Err(Error::Solver(greenwave_milp::MilpError::Numerical(format!("dual LP ended with {s:?}")))),
        }
    }

    pub fn satisfied(&self, occ: &[f64]) -> Result<bool> {
        Ok(self.evaluate(occ)?.is_none_or(|v| v <= self.cap + 1e-9 * self.cap.abs().max(1.0)))
    }
}

impl RobustBlock {
    /// Set the dual (and selector / epigraph) variables of `x` to their
    /// optimal values for the occupancies already in `x`.
    pub fn fill(&self, x: &mut [f64]) {
        let c: Vec<f64> = self.occ.iter().map(|e| e.eval(x) * self.weight).collect();
        let n = c.len() as f64;
        let mut lhs = Vec::with_capacity(self.pieces.len());
        for p in &self.pieces {
            let v = match greedy_dual(&c, p.lower[1], p.upper[1], p.budget) {
                Some(d) => {
                    x[p.theta.0] = d.theta;
                    for k in 0..c.len() {
                        x[p.beta[k].0] = d.beta[k];
                        x[p.gamma[k].0] = d.gamma[k];
                    }
                    d.value + n * p.upper[0] * self.weight
                }
                None => {
                    // empty set: raise θ until the row holds at any cap ≥ 0
                    let cmax = c.iter().cloned().fold(0.0, f64::max);
                    let sum_l = n * p.lower[1];
                    let base: f64 = c.iter().map(|ck| ck * p.lower[1]).sum::<f64>() + n * p.upper[0] * self.weight;
                    let theta = cmax.max(base / (sum_l - p.budget));
                    x[p.theta.0] = theta;
                    for k in 0..c.len() {
                        x[p.beta[k].0] = 0.0;
                        x[p.gamma[k].0] = theta - c[k];
                    }
                    (p.budget - sum_l) * theta + base
                }
            };
            lhs.push(v);
        }
        if self.concave {
            let best = lhs.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).map_or(0, |(m, _)| m);
            for (m, p) in self.pieces.iter().enumerate() {
                if let Some(z) = p.z {
                    x[z.0] = (m == best) as u8 as f64;
                }
            }
        }
        if let CapRhs::Epigraph(z) = self.rhs {
            x[z.0] = lhs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        }
    }

    /// Worst-case emission of the block at the occupancies in `x`.
    pub fn worst_case(&self, x: &[f64]) -> f64 {
        let vals = self.pieces.iter().map(|p| {
            let c: Vec<f64> = self.occ.iter().map(|e| e.eval(x) * self.weight).collect();
            greedy_dual(&c, p.lower[1], p.upper[1], p.budget).map_or(f64::NEG_INFINITY, |d| d.value + c.len() as f64 * p.upper[0] * self.weight)
        });
        if self.concave {
            vals.fold(f64::INFINITY, f64::min)
        } else {
            vals.fold(f64::NEG_INFINITY, f64::max)
        }
    }
}

/// Fill every robust block's duals in a MIP start.
pub fn fill_duals(m: &SignalMilp, x: &mut [f64]) {
    for b in &m.robust {
        b.fill(x);
    }
}

/// Seconds-to-hours factor for a g/h relation against gram caps.
pub fn gram_weight(dt: f64) -> f64 {
    dt / 3600.0
}

impl SignalMilp {
    fn occ_series(&self, p: usize) -> Vec<LinExpr> {
        (1..=self.steps).map(|k| self.occupancy_expr(p, k)).collect()
    }

    /// Robust cap (grams) on the emissions of link `id`.
    pub fn add_robust_affine(&mut self, id: usize, cap: f64, uset: &UncertaintySet) -> Result<()> {
        let p = self.position(id)?;
        let occ = self.occ_series(p);
        let w = gram_weight(self.net.dt);
        let b = robust_affine_constraints(&mut self.model, &format!("l{id}"), &occ, uset, w, CapRhs::Fixed(cap))?;
        self.robust.push(b);
        Ok(())
    }

    pub fn add_robust_convex(&mut self, id: usize, cap: f64, set: &ConvexPwaSet) -> Result<()> {
        let p = self.position(id)?;
        let occ = self.occ_series(p);
        let w = gram_weight(self.net.dt);
        let b = robust_convex_pwa_constraints(&mut self.model, &format!("l{id}"), &occ, set, w, CapRhs::Fixed(cap))?;
        self.robust.push(b);
        Ok(())
    }

    pub fn add_robust_concave(&mut self, id: usize, cap: f64, sets: &[UncertaintySet]) -> Result<()> {
        let p = self.position(id)?;
        let occ = self.occ_series(p);
        let w = gram_weight(self.net.dt);
        let b = robust_concave_pwa_constraints(&mut self.model, &format!("l{id}"), &occ, sets, w, cap)?;
        self.robust.push(b);
        Ok(())
    }

    pub fn add_equity(&mut self, i: usize, j: usize, cap: f64, uset: &UncertaintySet) -> Result<()> {
        let (pi, pj) = (self.position(i)?, self.position(j)?);
        let (oi, oj) = (self.occ_series(pi), self.occ_series(pj));
        let w = gram_weight(self.net.dt);
        let b = equity_constraints(&mut self.model, &format!("eq{i}_{j}"), &oi, &oj, uset, w, cap)?;
        self.robust.push(b);
        Ok(())
    }

    /// Minimise the robust emission bound of link `id`, traded against
    /// throughput with `throughput_weight`.
    pub fn set_epigraph(&mut self, id: usize, uset: &UncertaintySet, throughput_weight: f64) -> Result<VarId> {
        let p = self.position(id)?;
        let occ = self.occ_series(p);
        let w = gram_weight(self.net.dt);
        let tp = self.throughput.clone();
        let (z, b) = epigraph_min_emission(&mut self.model, &format!("l{id}"), &occ, uset, w, &tp, throughput_weight)?;
        self.robust.push(b);
        Ok(z)
    }

    /// Worst-case emissions (grams) of every robust block at a solution.
    pub fn robust_worst_cases(&self, x: &[f64]) -> Vec<(String, f64)> {
        self.robust.iter().map(|b| (b.name.clone(), b.worst_case(x))).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixed(occ: &[f64]) -> Vec<LinExpr> {
        occ.iter().map(|&c| LinExpr::constant(c)).collect()
    }

    /// Feasibility of the dual rows alone, occupancies fixed.
    fn rows_hold(uset: &UncertaintySet, occ: &[f64], cap: f64) -> bool {
        let mut m = MilpModel::new("t", ObjSense::Minimize);
        robust_affine_constraints(&mut m, "x", &fixed(occ), uset, 1.0, CapRhs::Fixed(cap)).unwrap();
        solve_lp(&m, LpEngine::Dense).status == LpStatus::Optimal
    }

    #[test]
    fn single_step_threshold() {
        let u = UncertaintySet::affine(0.0, 1.0, 1.0, 2.0, 1.0).unwrap();
        assert!(rows_hold(&u, &[3.0], 7.0));
        assert!(!rows_hold(&u, &[3.0], 6.99));
    }

    #[test]
    fn budget_pushes_mass_to_larger_occupancy() {
        let u = UncertaintySet { lower: vec![1.0, 0.0], upper: vec![1.0, 2.0], sigma: 2.0 };
        assert_eq!(u.worst_case(&[3.0, 1.0], 1.0), Some(8.0));
        assert!(rows_hold(&u, &[3.0, 1.0], 8.0));
        assert!(!rows_hold(&u, &[3.0, 1.0], 7.99));
    }

    #[test]
    fn greedy_dual_objective_matches_primal() {
        let c = [3.0, -1.0, 2.0, 0.5];
        let d = greedy_dual(&c, 0.5, 2.0, 4.0).unwrap();
        // a = (2, 0.5, 1.0, 0.5): 6 − 0.5 + 2 + 0.25
        assert!((d.value - 7.75).abs() < 1e-12);
        let dual: f64 = d.beta.iter().map(|b| 2.0 * b).sum::<f64>() - d.gamma.iter().map(|g| 0.5 * g).sum::<f64>() + 4.0 * d.theta;
        assert!((dual - d.value).abs() < 1e-12);
        assert!(greedy_dual(&c, 2.0, 3.0, 7.0).is_none());
    }

    #[test]
    fn fill_satisfies_rows() {
        let u = UncertaintySet::affine(0.0, 4.0, 1.0, 3.0, 1.5).unwrap();
        let mut m = MilpModel::new("t", ObjSense::Minimize);
        let v: Vec<VarId> = (0..4).map(|k| m.add_continuous(format!("o{k}"), 0.0, 10.0)).collect();
        let occ: Vec<LinExpr> = v.iter().map(|&x| LinExpr::var(x)).collect();
        let b = robust_affine_constraints(&mut m, "x", &occ, &u, 0.5, CapRhs::Fixed(40.0)).unwrap();
        let mut x = vec![0.0; m.num_vars()];
        for (i, &o) in [4.0, 1.0, 6.0, 2.0].iter().enumerate() {
            x[v[i].0] = o;
        }
        b.fill(&mut x);
        m.check_feasible(&x, 1e-9, 1e-9).unwrap();
        let wc = u.worst_case(&[4.0, 1.0, 6.0, 2.0], 0.5).unwrap();
        assert!((b.worst_case(&x) - wc).abs() < 1e-12);
    }

    #[test]
    fn fill_handles_empty_set() {
        // Σ L₁ exceeds the budget: rows hold for any cap
        let u = UncertaintySet::affine(0.0, 400.0, 53.3, 66.0, 1.3).unwrap();
        assert!(!u.budget_feasible());
        let mut m = MilpModel::new("t", ObjSense::Minimize);
        let b = robust_affine_constraints(&mut m, "x", &fixed(&[20.0, 30.0]), &u, 10.0 / 3600.0, CapRhs::Fixed(1.0)).unwrap();
        let mut x = vec![0.0; m.num_vars()];
        b.fill(&mut x);
        m.check_feasible(&x, 1e-7, 1e-9).unwrap();
    }

    #[test]
    fn polynomial_order_one_is_affine() {
        let u = UncertaintySet::affine(0.0, 1.0, 1.0, 2.0, 1.0).unwrap();
        let mk = |poly: bool| {
            let mut m = MilpModel::new("t", ObjSense::Maximize);
            let x = m.add_continuous("x", 0.0, 5.0);
            let occ = vec![LinExpr::var(x); 3];
            if poly {
                general_polynomial_robust(&mut m, "a", &occ, &u, 0.25, 9.0).unwrap();
            } else {
                robust_affine_constraints(&mut m, "a", &occ, &u, 0.25, CapRhs::Fixed(9.0)).unwrap();
            }
            greenwave_milp::to_lp_string(&m, "")
        };
        assert_eq!(mk(true), mk(false));
    }

    #[test]
    fn polynomial_order_two_text_and_value() {
        let u = UncertaintySet { lower: vec![0.0, 1.0, 0.0], upper: vec![1.0, 2.0, 1.0], sigma: 1.0 };
        let mut m = MilpModel::new("t", ObjSense::Maximize);
        let x = m.add_continuous("x", 0.0, 5.0);
        let PolynomialRobust::Symbolic(s) = general_polynomial_robust(&mut m, "a", &[LinExpr::var(x)], &u, 1.0, 20.0).unwrap() else {
            panic!("expected symbolic rows")
        };
        assert!(s.to_text().contains("rc_a_2_1: theta_a + beta_a_2_1 - gamma_a_2_1 = 1 * (x)^2"));
        // one step, occupancy 3: budget 3 over (a1 ∈ [1,2], a2 ∈ [0,1]);
        // best is a2 = 1 (coef 9), a1 = 2 (coef 3): 9 + 6 + a0 = 1 → 16
        assert!((s.evaluate(&[3.0]).unwrap().unwrap() - 16.0).abs() < 1e-9);
        assert!(s.satisfied(&[3.0]).unwrap());
    }

    #[test]
    fn order_zero_is_rejected() {
        let u = UncertaintySet { lower: vec![0.0], upper: vec![1.0], sigma: 1.0 };
        let mut m = MilpModel::new("t", ObjSense::Maximize);
        assert!(general_polynomial_robust(&mut m, "a", &[], &u, 1.0, 1.0).is_err());
    }
}
