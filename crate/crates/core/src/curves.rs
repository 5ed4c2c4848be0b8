//! Cumulative count curves at link boundaries, phase indicators, and the
//! sending/receiving flows derived from them.
//!
//! Counts are indexed by step: index `j` is the count at time `j·δt`, so a
//! horizon of N steps has N + 1 entries and index 0 is the (empty) initial
//! state. Indices before 0 read as 0.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::Link;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CumulativeCurves {
    pub n_up: Vec<f64>,
    pub n_down: Vec<f64>,
}

impl CumulativeCurves {
    pub fn empty(steps: usize) -> Self {
        CumulativeCurves { n_up: vec![0.0; steps + 1], n_down: vec![0.0; steps + 1] }
    }

    /// Curves from per-step inflow / outflow rates (veh/s).
    pub fn from_flows(inflow: &[f64], outflow: &[f64], dt: f64) -> Self {
        let acc = |q: &[f64]| {
            let mut v = Vec::with_capacity(q.len() + 1);
            v.push(0.0);
            for &x in q {
                v.push(v.last().unwrap() + x * dt);
            }
            v
        };
        CumulativeCurves { n_up: acc(inflow), n_down: acc(outflow) }
    }

    pub fn steps(&self) -> usize {
        self.n_up.len().saturating_sub(1)
    }

    pub fn up(&self, j: isize) -> f64 {
        if j < 0 {
            0.0
        } else {
            self.n_up[j as usize]
        }
    }

    pub fn down(&self, j: isize) -> f64 {
        if j < 0 {
            0.0
        } else {
            self.n_down[j as usize]
        }
    }

    pub fn occupancy(&self, j: usize) -> f64 {
        self.n_up[j] - self.n_down[j]
    }

    /// Entering flow during step `j` (1-based), veh/s; 0 outside the horizon.
    pub fn inflow(&self, j: isize, dt: f64) -> f64 {
        if j < 1 {
            0.0
        } else {
            (self.up(j) - self.up(j - 1)) / dt
        }
    }

    pub fn outflow(&self, j: isize, dt: f64) -> f64 {
        if j < 1 {
            0.0
        } else {
            (self.down(j) - self.down(j - 1)) / dt
        }
    }

    /// Check monotonicity, occupancy bounds, causality and the spillback
    /// bound with absolute tolerance `tol` (veh).
    pub fn validate(&self, link: &Link, tol: f64) -> Result<()> {
        if self.n_up.len() != self.n_down.len() || self.n_up.is_empty() {
            return Err(Error::Domain("curves must have equal, nonzero length".into()));
        }
        if self.n_up[0].abs() > tol || self.n_down[0].abs() > tol {
            return Err(Error::Domain("curves must start at 0".into()));
        }
        let cap = link.storage();
        for j in 0..self.n_up.len() {
            if j > 0 && (self.n_up[j] < self.n_up[j - 1] - tol || self.n_down[j] < self.n_down[j - 1] - tol) {
                return Err(Error::Domain(format!("link {}: counts decrease at step {j}", link.id)));
            }
            let occ = self.occupancy(j);
            if occ < -tol || occ > cap + tol {
                return Err(Error::Domain(format!("link {}: occupancy {occ} out of [0, {cap}] at step {j}", link.id)));
            }
            let ji = j as isize;
            if self.down(ji) > self.up(ji - link.delta_f as isize) + tol {
                return Err(Error::Domain(format!("link {}: causality violated at step {j}", link.id)));
            }
            if self.up(ji) > self.down(ji - link.delta_b as isize) + cap + tol {
                return Err(Error::Domain(format!("link {}: spillback bound violated at step {j}", link.id)));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PhaseIndicators {
    /// entrance congested (r̄), indexed like the curves
    pub r_up: Vec<bool>,
    /// exit congested (r̂)
    pub r_down: Vec<bool>,
}

/// State classification of the curves: the entrance is congested when the
/// upstream count sits on the spillback bound, the exit when vehicles that
/// have completed the free-flow traversal are still queued.
pub fn phase_indicators(link: &Link, curves: &CumulativeCurves, eps: f64) -> PhaseIndicators {
    let cap = link.storage();
    let n = curves.n_up.len();
    let mut r_up = Vec::with_capacity(n);
    let mut r_down = Vec::with_capacity(n);
    for j in 0..n as isize {
        r_up.push(curves.up(j) >= curves.down(j - link.delta_b as isize) + cap - eps);
        r_down.push(curves.up(j - link.delta_f as isize) >= curves.down(j) + eps);
    }
    PhaseIndicators { r_up, r_down }
}

/// Vehicles that could leave during step `j`: arrived at the exit by the
/// start of the step minus those already gone.
pub fn exit_backlog(link: &Link, curves: &CumulativeCurves, j: usize) -> f64 {
    let j = j as isize;
    (curves.up(j - link.delta_f as isize) - curves.down(j - 1)).max(0.0)
}

/// Space available at the entrance during step `j`.
pub fn entry_space(link: &Link, curves: &CumulativeCurves, j: usize) -> f64 {
    let j = j as isize;
    (curves.down(j - link.delta_b as isize) + link.storage() - curves.up(j - 1)).max(0.0)
}

/// Demand of step `j` (1-based): capacity when the exit is congested,
/// otherwise the discharge of vehicles that have reached the exit — the
/// inflow of Δᶠ steps ago plus any residual queue.
pub fn link_demand(link: &Link, curves: &CumulativeCurves, r_down: &[bool], j: usize) -> f64 {
    if r_down.get(j).copied().unwrap_or(false) {
        link.capacity()
    } else {
        exit_backlog(link, curves, j) / link.dt()
    }
}

/// Supply of step `j`: capacity when the entrance is free, otherwise the
/// space freed by the outflow of Δᵇ steps ago plus any residual space.
pub fn link_supply(link: &Link, curves: &CumulativeCurves, r_up: &[bool], j: usize) -> f64 {
    if r_up.get(j).copied().unwrap_or(false) {
        entry_space(link, curves, j) / link.dt()
    } else {
        link.capacity()
    }
}

/// Demand and its regime from the curves alone: capacity-limited (r̂ = 1)
/// when the backlog covers a full step of capacity.
pub fn sending_flow(link: &Link, curves: &CumulativeCurves, j: usize) -> (f64, bool) {
    let x = exit_backlog(link, curves, j);
    let full = link.capacity() * link.dt();
    if x >= full {
        (link.capacity(), true)
    } else {
        (x / link.dt(), false)
    }
}

/// Supply and its regime: space-limited (r̄ = 1) when less than a full step
/// of capacity fits.
pub fn receiving_flow(link: &Link, curves: &CumulativeCurves, j: usize) -> (f64, bool) {
    let y = entry_space(link, curves, j);
    let full = link.capacity() * link.dt();
    if y <= full {
        (y / link.dt(), true)
    } else {
        (link.capacity(), false)
    }
}
