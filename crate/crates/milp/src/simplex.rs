//! Dense bounded-variable primal simplex.
//!
//! Rows are turned into equalities `a_i·x − r_i = 0` with a logical `r_i`
//! carrying the row bounds, so every column is just "a variable with bounds".
//! Rows whose starting activity violates the bounds get an artificial and a
//! phase 1 drives those to zero. Pricing is Dantzig with a switch to Bland's
//! rule after a run of degenerate pivots; the ratio test is Harris two-pass.

use crate::lp::{LpSolution, LpStatus};
use crate::model::{MilpModel, ObjSense, Sense};

const PIVOT_TOL: f64 = 1e-9;
const HARRIS_TOL: f64 = 1e-9;
const OPT_TOL: f64 = 1e-9;
const FEAS_TOL: f64 = 1e-7;
const DEGENERATE_RUN: usize = 25;
const RESIDUAL_TOL: f64 = 1e-6;

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum State {
    Basic,
    Lower,
    Upper,
    Free,
}

struct Tableau {
    m: usize,
    ncol: usize,
    t: Vec<f64>,
    lb: Vec<f64>,
    ub: Vec<f64>,
    x: Vec<f64>,
    state: Vec<State>,
    basis: Vec<usize>,
    d: Vec<f64>,
    cost: Vec<f64>,
}

enum Outcome {
    Optimal,
    Unbounded,
    IterationLimit,
}

impl Tableau {
    fn at(&self, i: usize, j: usize) -> f64 {
        self.t[i * self.ncol + j]
    }

    fn price(&mut self) {
        let mut d = self.cost.clone();
        for i in 0..self.m {
            let cb = self.cost[self.basis[i]];
            if cb != 0.0 {
                let row = &self.t[i * self.ncol..(i + 1) * self.ncol];
                for (dj, &a) in d.iter_mut().zip(row) {
                    *dj -= cb * a;
                }
            }
        }
        for i in 0..self.m {
            d[self.basis[i]] = 0.0;
        }
        self.d = d;
    }

    fn recompute_basics(&mut self) {
        let mut xb = vec![0.0; self.m];
        for j in 0..self.ncol {
            if self.state[j] == State::Basic || self.x[j] == 0.0 {
                continue;
            }
            let xj = self.x[j];
            for (i, v) in xb.iter_mut().enumerate() {
                *v -= self.at(i, j) * xj;
            }
        }
        for i in 0..self.m {
            self.x[self.basis[i]] = xb[i];
        }
    }

    fn pivot(&mut self, r: usize, q: usize) {
        let ncol = self.ncol;
        let piv = self.at(r, q);
        {
            let row = &mut self.t[r * ncol..(r + 1) * ncol];
            for v in row.iter_mut() {
                *v /= piv;
            }
        }
        let (before, rest) = self.t.split_at_mut(r * ncol);
        let (prow, after) = rest.split_at_mut(ncol);
        for chunk in before.chunks_mut(ncol).chain(after.chunks_mut(ncol)) {
            let f = chunk[q];
            if f != 0.0 {
                for (a, &p) in chunk.iter_mut().zip(prow.iter()) {
                    *a -= f * p;
                }
                chunk[q] = 0.0;
            }
        }
        let dq = self.d[q];
        if dq != 0.0 {
            for (dj, &p) in self.d.iter_mut().zip(prow.iter()) {
                *dj -= dq * p;
            }
        }
        self.d[q] = 0.0;
        self.basis[r] = q;
    }

    fn iterate(&mut self, max_iter: usize) -> Outcome {
        let mut degenerate = 0usize;
        let mut bland = false;
        for _ in 0..max_iter {
            // entering column
            let mut enter: Option<(usize, f64)> = None;
            let mut best = 0.0;
            for j in 0..self.ncol {
                let st = self.state[j];
                if st == State::Basic || self.lb[j] == self.ub[j] {
                    continue;
                }
                let dj = self.d[j];
                let dir = match st {
                    State::Lower if dj < -OPT_TOL => 1.0,
                    State::Upper if dj > OPT_TOL => -1.0,
                    State::Free if dj.abs() > OPT_TOL => -dj.signum(),
                    _ => continue,
                };
                if bland {
                    enter = Some((j, dir));
                    break;
                }
                if dj.abs() > best {
                    best = dj.abs();
                    enter = Some((j, dir));
                }
            }
            let Some((q, dir)) = enter else {
                return Outcome::Optimal;
            };

            // ratio test
            let mut theta_max = f64::INFINITY;
            for i in 0..self.m {
                let alpha = dir * self.at(i, q);
                let b = self.basis[i];
                let r = if alpha > PIVOT_TOL {
                    (self.x[b] - self.lb[b] + HARRIS_TOL) / alpha
                } else if alpha < -PIVOT_TOL {
                    (self.ub[b] - self.x[b] + HARRIS_TOL) / -alpha
                } else {
                    continue;
                };
                if r < theta_max {
                    theta_max = r;
                }
            }
            let mut leave: Option<usize> = None;
            let mut leave_ratio = 0.0;
            if theta_max.is_finite() {
                let mut best_alpha = 0.0;
                for i in 0..self.m {
                    let alpha = dir * self.at(i, q);
                    let b = self.basis[i];
                    let r = if alpha > PIVOT_TOL {
                        (self.x[b] - self.lb[b]) / alpha
                    } else if alpha < -PIVOT_TOL {
                        (self.ub[b] - self.x[b]) / -alpha
                    } else {
                        continue;
                    };
                    if r <= theta_max {
                        let better = if bland {
                            match leave {
                                None => true,
                                Some(l) => r < leave_ratio - 1e-12 || (r <= leave_ratio + 1e-12 && b < self.basis[l]),
                            }
                        } else {
                            alpha.abs() > best_alpha
                        };
                        if better {
                            best_alpha = alpha.abs();
                            leave = Some(i);
                            leave_ratio = r;
                        }
                    }
                }
            }
            let range = self.ub[q] - self.lb[q];
            let step;
            match leave {
                Some(r) if leave_ratio.max(0.0) < range => {
                    step = leave_ratio.max(0.0);
                    for i in 0..self.m {
                        let a = self.at(i, q);
                        if a != 0.0 {
                            let b = self.basis[i];
                            self.x[b] -= dir * step * a;
                        }
                    }
                    self.x[q] += dir * step;
                    let b = self.basis[r];
                    let alpha = dir * self.at(r, q);
                    if alpha > 0.0 {
                        self.x[b] = self.lb[b];
                        self.state[b] = State::Lower;
                    } else {
                        self.x[b] = self.ub[b];
                        self.state[b] = State::Upper;
                    }
                    self.state[q] = State::Basic;
                    self.pivot(r, q);
                }
                _ => {
                    if !range.is_finite() {
                        return Outcome::Unbounded;
                    }
                    // bound flip
                    step = range;
                    for i in 0..self.m {
                        let a = self.at(i, q);
                        if a != 0.0 {
                            let b = self.basis[i];
                            self.x[b] -= dir * step * a;
                        }
                    }
                    if dir > 0.0 {
                        self.x[q] = self.ub[q];
                        self.state[q] = State::Upper;
                    } else {
                        self.x[q] = self.lb[q];
                        self.state[q] = State::Lower;
                    }
                }
            }
            if step <= 1e-12 {
                degenerate += 1;
                if degenerate > DEGENERATE_RUN {
                    bland = true;
                }
            } else {
                degenerate = 0;
                bland = false;
            }
        }
        Outcome::IterationLimit
    }
}

fn nonbasic_start(lb: f64, ub: f64) -> (f64, State) {
    if lb.is_finite() {
        (lb, State::Lower)
    } else if ub.is_finite() {
        (ub, State::Upper)
    } else {
        (0.0, State::Free)
    }
}

/// Solve the LP relaxation of `model` with the given variable bounds.
pub(crate) fn solve_dense(model: &MilpModel, lower: &[f64], upper: &[f64]) -> LpSolution {
    let n = model.vars.len();
    let m = model.rows.len();
    let ncol = n + 2 * m;
    let mut lb = vec![0.0; ncol];
    let mut ub = vec![0.0; ncol];
    lb[..n].copy_from_slice(lower);
    ub[..n].copy_from_slice(upper);
    for j in 0..n {
        if lb[j] > ub[j] + FEAS_TOL {
            return LpSolution::status_only(LpStatus::Infeasible, n);
        }
    }
    for (i, row) in model.rows.iter().enumerate() {
        let (l, u) = match row.sense {
            Sense::Le => (f64::NEG_INFINITY, row.rhs),
            Sense::Ge => (row.rhs, f64::INFINITY),
            Sense::Eq => (row.rhs, row.rhs),
        };
        lb[n + i] = l;
        ub[n + i] = u;
    }

    let mut x = vec![0.0; ncol];
    let mut state = vec![State::Lower; ncol];
    for j in 0..n {
        let (v, s) = nonbasic_start(lb[j], ub[j]);
        x[j] = v;
        state[j] = s;
    }

    let mut t = vec![0.0; m * ncol];
    let mut basis = vec![0usize; m];
    let mut phase1 = false;
    for (i, row) in model.rows.iter().enumerate() {
        let act: f64 = row.terms.iter().map(|&(v, c)| c * x[v.0]).sum();
        let (l, u) = (lb[n + i], ub[n + i]);
        let r = n + i;
        let a = n + m + i;
        let base = i * ncol;
        if act >= l - FEAS_TOL && act <= u + FEAS_TOL {
            // logical basic: row / (-1)
            for &(v, c) in &row.terms {
                t[base + v.0] -= c;
            }
            t[base + r] = 1.0;
            basis[i] = r;
            state[r] = State::Basic;
            x[r] = act;
            // unused artificial fixed at 0
            lb[a] = 0.0;
            ub[a] = 0.0;
            state[a] = State::Lower;
        } else {
            let rb = if act < l { l } else { u };
            let sigma = if rb - act >= 0.0 { 1.0 } else { -1.0 };
            x[r] = rb;
            state[r] = if rb == l { State::Lower } else { State::Upper };
            for &(v, c) in &row.terms {
                t[base + v.0] += c / sigma;
            }
            t[base + r] = -1.0 / sigma;
            t[base + a] = 1.0;
            basis[i] = a;
            state[a] = State::Basic;
            lb[a] = 0.0;
            ub[a] = f64::INFINITY;
            x[a] = (rb - act).abs();
            phase1 = true;
        }
    }

    let max_iter = 50 * (m + n) + 5000;
    let mut tab = Tableau { m, ncol, t, lb, ub, x, state, basis, d: vec![0.0; ncol], cost: vec![0.0; ncol] };

    if phase1 {
        for i in 0..m {
            if tab.ub[n + m + i] > 0.0 {
                tab.cost[n + m + i] = 1.0;
            }
        }
        tab.price();
        match tab.iterate(max_iter) {
            Outcome::Optimal => {}
            Outcome::Unbounded | Outcome::IterationLimit => {
                return LpSolution::status_only(LpStatus::IterationLimit, n);
            }
        }
        tab.recompute_basics();
        // per-row test: a single big rhs must not hide a residual on a small row
        if (0..m).any(|i| tab.x[n + m + i] > FEAS_TOL * (1.0 + model.rows[i].rhs.abs())) {
            return LpSolution::status_only(LpStatus::Infeasible, n);
        }
        for i in 0..m {
            let a = n + m + i;
            tab.ub[a] = 0.0;
            tab.cost[a] = 0.0;
            if tab.state[a] != State::Basic {
                tab.x[a] = 0.0;
                tab.state[a] = State::Lower;
            }
        }
        // drive basic artificials out where possible
        for r in 0..m {
            let b = tab.basis[r];
            if b < n + m {
                continue;
            }
            let mut best = (0.0, usize::MAX);
            for j in 0..n + m {
                if tab.state[j] == State::Basic {
                    continue;
                }
                let a = tab.at(r, j).abs();
                if a > 1e-7 && a > best.0 {
                    best = (a, j);
                }
            }
            if best.1 != usize::MAX {
                let q = best.1;
                tab.state[q] = State::Basic;
                tab.state[b] = State::Lower;
                tab.x[b] = 0.0;
                tab.pivot(r, q);
            }
        }
        tab.recompute_basics();
    }

    let sign = match model.sense {
        ObjSense::Minimize => 1.0,
        ObjSense::Maximize => -1.0,
    };
    for &(v, c) in &model.objective {
        tab.cost[v.0] += sign * c;
    }
    tab.price();
    match tab.iterate(max_iter) {
        Outcome::Optimal => {}
        Outcome::Unbounded => return LpSolution::status_only(LpStatus::Unbounded, n),
        Outcome::IterationLimit => return LpSolution::status_only(LpStatus::IterationLimit, n),
    }
    tab.recompute_basics();
    tab.price();

    let xs: Vec<f64> = tab.x[..n].to_vec();
    if model.check_feasible(&xs, RESIDUAL_TOL, f64::INFINITY).is_err() {
        // drift the tableau could not see; let the LU engine decide
        return crate::lp::solve_sparse(model, lower, upper);
    }
    let objective = model.objective_value(&xs);
    let row_duals: Vec<f64> = (0..m).map(|i| sign * tab.d[n + i]).collect();
    let reduced: Vec<f64> = (0..n).map(|j| sign * tab.d[j]).collect();
    LpSolution { status: LpStatus::Optimal, objective, x: xs, row_duals: Some(row_duals), reduced_costs: Some(reduced) }
}
