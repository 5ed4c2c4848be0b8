//! Triangular fundamental diagram.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TriangularFD {
    /// free-flow speed (m/s)
    pub k: f64,
    /// backward wave speed (m/s)
    pub w: f64,
    /// jam density (veh/m)
    pub rho_jam: f64,
    /// critical density (veh/m)
    pub rho_crit: f64,
    /// capacity (veh/s)
    pub capacity: f64,
}

impl TriangularFD {
    /// Diagram from free-flow speed, jam density and critical density;
    /// capacity and the wave speed follow.
    pub fn new(k: f64, rho_jam: f64, rho_crit: f64) -> Result<Self> {
        if !(k > 0.0 && rho_crit > 0.0 && rho_crit < rho_jam) {
            return Err(Error::Config(format!("invalid diagram k={k}, rho_crit={rho_crit}, rho_jam={rho_jam}")));
        }
        let capacity = k * rho_crit;
        let w = capacity / (rho_jam - rho_crit);
        Ok(TriangularFD { k, w, rho_jam, rho_crit, capacity })
    }

    /// 400 m urban link used throughout the experiments:
    /// k = 40/3 m/s, ρ_jam = 0.4, ρ* = 0.1, C = 4/3, w = 40/9.
    pub fn urban() -> Self {
        TriangularFD::new(40.0 / 3.0, 0.4, 0.1).unwrap()
    }

    pub fn validate(&self) -> Result<()> {
        let rel = |a: f64, b: f64| (a - b).abs() <= 1e-9 * a.abs().max(b.abs());
        if !(self.k > 0.0 && self.w > 0.0 && self.rho_crit > 0.0 && self.rho_crit < self.rho_jam) {
            return Err(Error::Config("diagram parameters out of range".into()));
        }
        if !rel(self.capacity, self.k * self.rho_crit) || !rel(self.capacity, self.w * (self.rho_jam - self.rho_crit)) {
            return Err(Error::Config("diagram is not consistent: C must equal k·ρ* and w·(ρ_jam − ρ*)".into()));
        }
        Ok(())
    }

    fn check(&self, rho: f64) -> Result<()> {
        if !(0.0..=self.rho_jam).contains(&rho) {
            return Err(Error::Domain(format!("density {rho} outside [0, {}]", self.rho_jam)));
        }
        Ok(())
    }

    /// Flow at density `rho` without the domain check (callers clamp).
    pub fn flow_unchecked(&self, rho: f64) -> f64 {
        if rho <= self.rho_crit {
            self.k * rho
        } else {
            self.w * (self.rho_jam - rho)
        }
    }

    pub fn velocity_unchecked(&self, rho: f64) -> f64 {
        if rho <= self.rho_crit {
            self.k
        } else {
            self.flow_unchecked(rho) / rho
        }
    }
}

pub fn fd_flow(fd: &TriangularFD, rho: f64) -> Result<f64> {
    fd.check(rho)?;
    Ok(fd.flow_unchecked(rho))
}

pub fn fd_velocity(fd: &TriangularFD, rho: f64) -> Result<f64> {
    fd.check(rho)?;
    Ok(fd.velocity_unchecked(rho))
}
