//! Traffic dynamics, emission modelling and robust signal-control
//! formulations.

pub mod curves;
pub mod emissions;
pub mod error;
pub mod fd;
pub mod ltm;
pub mod macro_relation;
pub mod moskowitz;
pub mod network;
pub mod plan_search;
pub mod robust;
pub mod scenario;
pub mod signal_milp;
pub mod stops;

pub use error::{Error, Result};
