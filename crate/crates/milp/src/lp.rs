//! LP relaxation front end: engine selection and the shared solution type.

use crate::model::{MilpModel, ObjSense, Sense};
use crate::simplex::solve_dense;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    pub objective: f64,
    pub x: Vec<f64>,
    /// Row shadow prices in the model's own objective sense. Only the dense
    /// engine reports them.
    pub row_duals: Option<Vec<f64>>,
    pub reduced_costs: Option<Vec<f64>>,
}

impl LpSolution {
    pub(crate) fn status_only(status: LpStatus, n: usize) -> Self {
        LpSolution { status, objective: f64::NAN, x: vec![0.0; n], row_duals: None, reduced_costs: None }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LpEngine {
    /// Dense tableau for small models, sparse LU otherwise.
    #[default]
    Auto,
    Dense,
    Sparse,
}

/// Above this many tableau entries the dense engine stops paying off.
const DENSE_LIMIT: usize = 400_000;

impl LpEngine {
    pub(crate) fn resolve(self, model: &MilpModel) -> LpEngine {
        match self {
            LpEngine::Auto => {
                let m = model.num_rows();
                let n = model.num_vars();
                if m * (n + 2 * m) <= DENSE_LIMIT {
                    LpEngine::Dense
                } else {
                    LpEngine::Sparse
                }
            }
            e => e,
        }
    }
}

/// Solve the continuous relaxation of `model` (binaries relaxed to [0, 1]).
pub fn solve_lp(model: &MilpModel, engine: LpEngine) -> LpSolution {
    let lower: Vec<f64> = model.vars.iter().map(|v| v.lower).collect();
    let upper: Vec<f64> = model.vars.iter().map(|v| v.upper).collect();
    solve_lp_bounded(model, &lower, &upper, engine)
}

/// Relaxation with overridden variable bounds.
pub fn solve_lp_bounded(model: &MilpModel, lower: &[f64], upper: &[f64], engine: LpEngine) -> LpSolution {
    match engine.resolve(model) {
        LpEngine::Sparse => solve_sparse(model, lower, upper),
        _ => solve_dense(model, lower, upper),
    }
}

pub(crate) fn sparse_problem(model: &MilpModel, lower: &[f64], upper: &[f64]) -> (microlp::Problem, Vec<microlp::Variable>) {
    let dir = match model.sense {
        ObjSense::Minimize => microlp::OptimizationDirection::Minimize,
        ObjSense::Maximize => microlp::OptimizationDirection::Maximize,
    };
    let mut p = microlp::Problem::new(dir);
    let c = model.objective_dense();
    let vars: Vec<microlp::Variable> = (0..model.num_vars()).map(|j| p.add_var(c[j], (lower[j], upper[j]))).collect();
    for row in &model.rows {
        let mut e = microlp::LinearExpr::empty();
        for &(v, a) in &row.terms {
            e.add(vars[v.0], a);
        }
        let op = match row.sense {
            Sense::Le => microlp::ComparisonOp::Le,
            Sense::Ge => microlp::ComparisonOp::Ge,
            Sense::Eq => microlp::ComparisonOp::Eq,
        };
        p.add_constraint(e, op, row.rhs);
    }
    (p, vars)
}

pub(crate) fn from_microlp(model: &MilpModel, res: Result<microlp::Solution, microlp::Error>, vars: &[microlp::Variable]) -> LpSolution {
    let n = model.num_vars();
    match res {
        Ok(sol) => {
            let x: Vec<f64> = vars.iter().map(|&v| *sol.var_value(v)).collect();
            let objective = model.objective_value(&x);
            LpSolution { status: LpStatus::Optimal, objective, x, row_duals: None, reduced_costs: None }
        }
        Err(microlp::Error::Infeasible) => LpSolution::status_only(LpStatus::Infeasible, n),
        Err(microlp::Error::Unbounded) => LpSolution::status_only(LpStatus::Unbounded, n),
        Err(microlp::Error::InternalError(msg)) => {
            log::warn!("sparse LP engine failed: {msg}");
            LpSolution::status_only(LpStatus::IterationLimit, n)
        }
    }
}

pub(crate) fn solve_sparse(model: &MilpModel, lower: &[f64], upper: &[f64]) -> LpSolution {
    if lower.iter().zip(upper).any(|(l, u)| l > u) {
        return LpSolution::status_only(LpStatus::Infeasible, model.num_vars());
    }
    let (p, vars) = sparse_problem(model, lower, upper);
    from_microlp(model, p.solve(), &vars)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::LinExpr;

    fn tiny() -> MilpModel {
        let mut m = MilpModel::new("tiny", ObjSense::Maximize);
        let x = m.add_continuous("x", 0.0, f64::INFINITY);
        let y = m.add_continuous("y", 0.0, f64::INFINITY);
        m.add_row("c1", &LinExpr::var(x), Sense::Le, 1.0, "");
        m.add_row("c2", &LinExpr::var(y), Sense::Le, 2.0, "");
        let mut obj = LinExpr::var(x);
        obj.add_term(y, 1.0);
        m.set_objective(&obj, ObjSense::Maximize);
        m
    }

    #[test]
    fn both_engines_agree_on_tiny_lp() {
        let m = tiny();
        for eng in [LpEngine::Dense, LpEngine::Sparse] {
            let s = solve_lp(&m, eng);
            assert_eq!(s.status, LpStatus::Optimal);
            assert!((s.objective - 3.0).abs() < 1e-9);
            assert!((s.x[0] - 1.0).abs() < 1e-9 && (s.x[1] - 2.0).abs() < 1e-9);
        }
    }

    #[test]
    fn dense_reports_shadow_prices() {
        let s = solve_lp(&tiny(), LpEngine::Dense);
        let y = s.row_duals.unwrap();
        assert!((y[0] - 1.0).abs() < 1e-9 && (y[1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn crossed_bounds_are_infeasible() {
        let m = tiny();
        let s = solve_lp_bounded(&m, &[2.0, 0.0], &[1.0, 5.0], LpEngine::Sparse);
        assert_eq!(s.status, LpStatus::Infeasible);
    }
}
