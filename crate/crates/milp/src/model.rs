//! Optimization IR: variables, linear rows, objective.

use std::fmt;

use crate::error::MilpError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarId(pub usize);

impl VarId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    Continuous,
    Binary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub kind: VarKind,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

impl Sense {
    pub fn symbol(self) -> &'static str {
        match self {
            Sense::Le => "<=",
            Sense::Eq => "=",
            Sense::Ge => ">=",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObjSense {
    Minimize,
    Maximize,
}

/// Linear expression `Σ coeff·var + constant`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinExpr {
    pub terms: Vec<(VarId, f64)>,
    pub constant: f64,
}

impl LinExpr {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        LinExpr { terms: Vec::new(), constant: c }
    }

    pub fn var(v: VarId) -> Self {
        LinExpr { terms: vec![(v, 1.0)], constant: 0.0 }
    }

    pub fn add_term(&mut self, v: VarId, c: f64) -> &mut Self {
        if c != 0.0 {
            self.terms.push((v, c));
        }
        self
    }

    pub fn add_constant(&mut self, c: f64) -> &mut Self {
        self.constant += c;
        self
    }

    pub fn add_expr(&mut self, other: &LinExpr, scale: f64) -> &mut Self {
        for &(v, c) in &other.terms {
            self.add_term(v, c * scale);
        }
        self.constant += other.constant * scale;
        self
    }

    pub fn scaled(&self, s: f64) -> LinExpr {
        let mut e = LinExpr::new();
        e.add_expr(self, s);
        e
    }

    /// Merge duplicate variables and drop zero coefficients; terms end up
    /// sorted by variable index.
    pub fn normalized(&self) -> LinExpr {
        let mut terms = self.terms.clone();
        terms.sort_by_key(|t| t.0);
        let mut out: Vec<(VarId, f64)> = Vec::with_capacity(terms.len());
        for (v, c) in terms {
            match out.last_mut() {
                Some(last) if last.0 == v => last.1 += c,
                _ => out.push((v, c)),
            }
        }
        out.retain(|t| t.1 != 0.0);
        LinExpr { terms: out, constant: self.constant }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|&(v, c)| c * x[v.0]).sum::<f64>() + self.constant
    }

    /// Interval of values the expression can take given variable bounds.
    pub fn bounds(&self, model: &MilpModel) -> (f64, f64) {
        let mut lo = self.constant;
        let mut hi = self.constant;
        for &(v, c) in &self.terms {
            let var = &model.vars[v.0];
            if c > 0.0 {
                lo += c * var.lower;
                hi += c * var.upper;
            } else {
                lo += c * var.upper;
                hi += c * var.lower;
            }
        }
        (lo, hi)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub name: String,
    pub terms: Vec<(VarId, f64)>,
    pub sense: Sense,
    pub rhs: f64,
    /// Which formulation family emitted the row (audit trail).
    pub tag: String,
}

impl Constraint {
    pub fn activity(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|&(v, c)| c * x[v.0]).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MilpModel {
    pub name: String,
    pub vars: Vec<Variable>,
    pub rows: Vec<Constraint>,
    pub objective: Vec<(VarId, f64)>,
    pub sense: ObjSense,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    Bound { var: usize, value: f64 },
    Integrality { var: usize, value: f64 },
    Row { row: usize, activity: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Bound { var, value } => write!(f, "variable {var} out of bounds ({value})"),
            Violation::Integrality { var, value } => write!(f, "variable {var} not integral ({value})"),
            Violation::Row { row, activity } => write!(f, "row {row} violated (activity {activity})"),
        }
    }
}

impl MilpModel {
    pub fn new(name: impl Into<String>, sense: ObjSense) -> Self {
        MilpModel { name: name.into(), vars: Vec::new(), rows: Vec::new(), objective: Vec::new(), sense }
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn num_binaries(&self) -> usize {
        self.vars.iter().filter(|v| v.kind == VarKind::Binary).count()
    }

    pub fn num_nonzeros(&self) -> usize {
        self.rows.iter().map(|r| r.terms.len()).sum()
    }

    pub fn add_var(&mut self, name: impl Into<String>, kind: VarKind, lower: f64, upper: f64) -> VarId {
        let (lower, upper) = match kind {
            VarKind::Binary => (lower.max(0.0), upper.min(1.0)),
            VarKind::Continuous => (lower, upper),
        };
        self.vars.push(Variable { name: name.into(), kind, lower, upper });
        VarId(self.vars.len() - 1)
    }

    pub fn add_continuous(&mut self, name: impl Into<String>, lower: f64, upper: f64) -> VarId {
        self.add_var(name, VarKind::Continuous, lower, upper)
    }

    pub fn add_binary(&mut self, name: impl Into<String>) -> VarId {
        self.add_var(name, VarKind::Binary, 0.0, 1.0)
    }

    /// Add `expr sense rhs`; the expression's constant moves to the right-hand side.
    pub fn add_row(&mut self, name: impl Into<String>, expr: &LinExpr, sense: Sense, rhs: f64, tag: &str) -> usize {
        let e = expr.normalized();
        self.rows.push(Constraint { name: name.into(), terms: e.terms, sense, rhs: rhs - e.constant, tag: tag.to_string() });
        self.rows.len() - 1
    }

    pub fn set_objective(&mut self, expr: &LinExpr, sense: ObjSense) {
        self.objective = expr.normalized().terms;
        self.sense = sense;
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().map(|&(v, c)| c * x[v.0]).sum()
    }

    pub fn objective_dense(&self) -> Vec<f64> {
        let mut c = vec![0.0; self.vars.len()];
        for &(v, a) in &self.objective {
            c[v.0] += a;
        }
        c
    }

    pub fn var_by_name(&self, name: &str) -> Option<VarId> {
        self.vars.iter().position(|v| v.name == name).map(VarId)
    }

    /// Structural checks: references in range, bounds ordered, binaries within [0, 1].
    pub fn validate(&self) -> Result<(), MilpError> {
        let n = self.vars.len();
        for (j, v) in self.vars.iter().enumerate() {
            if v.lower.is_nan() || v.upper.is_nan() || v.lower > v.upper {
                return Err(MilpError::InvalidModel(format!("variable {} ({}) has bounds [{}, {}]", j, v.name, v.lower, v.upper)));
            }
            if v.kind == VarKind::Binary && (v.lower < 0.0 || v.upper > 1.0) {
                return Err(MilpError::InvalidModel(format!("binary {} not within [0,1]", v.name)));
            }
        }
        for (i, r) in self.rows.iter().enumerate() {
            if !r.rhs.is_finite() {
                return Err(MilpError::InvalidModel(format!("row {} ({}) has non-finite rhs", i, r.name)));
            }
            for &(v, c) in &r.terms {
                if v.0 >= n || !c.is_finite() {
                    return Err(MilpError::InvalidModel(format!("row {} ({}) references bad term", i, r.name)));
                }
            }
        }
        for &(v, c) in &self.objective {
            if v.0 >= n || !c.is_finite() {
                return Err(MilpError::InvalidModel("objective references bad term".into()));
            }
        }
        Ok(())
    }

    /// First violated bound/integrality/row under absolute tolerance `tol`
    /// (scaled by the row's rhs magnitude).
    pub fn check_feasible(&self, x: &[f64], tol: f64, int_tol: f64) -> Result<(), Violation> {
        for (j, v) in self.vars.iter().enumerate() {
            let xj = x[j];
            if xj < v.lower - tol || xj > v.upper + tol || xj.is_nan() {
                return Err(Violation::Bound { var: j, value: xj });
            }
            if v.kind == VarKind::Binary && (xj - xj.round()).abs() > int_tol {
                return Err(Violation::Integrality { var: j, value: xj });
            }
        }
        for (i, r) in self.rows.iter().enumerate() {
            let a = r.activity(x);
            let t = tol * (1.0 + r.rhs.abs());
            let ok = match r.sense {
                Sense::Le => a <= r.rhs + t,
                Sense::Ge => a >= r.rhs - t,
                Sense::Eq => (a - r.rhs).abs() <= t,
            };
            if !ok {
                return Err(Violation::Row { row: i, activity: a });
            }
        }
        Ok(())
    }
}
