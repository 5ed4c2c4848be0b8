//! Mixed-integer linear programming toolkit: a small model IR, a dense
//! bounded simplex (with duals), a sparse LP fallback, best-first
//! branch-and-bound, and MPS / LP text I/O.

pub mod bnb;
pub mod error;
pub mod lp;
pub mod lpfile;
pub mod model;
pub mod mps;
mod simplex;

pub use bnb::{solve_milp, solve_milp_with_heuristic, solve_milp_with_start, BnbConfig, MilpSolution, MilpStatus, NodeHeuristic};
pub use error::MilpError;
pub use lp::{solve_lp, solve_lp_bounded, LpEngine, LpSolution, LpStatus};
pub use lpfile::{export_lp, to_lp_string};
pub use model::{Constraint, LinExpr, MilpModel, ObjSense, Sense, VarId, VarKind, Variable, Violation};
pub use mps::{export_mps, import_mps, parse_mps, provenance_csv, to_mps_string};
