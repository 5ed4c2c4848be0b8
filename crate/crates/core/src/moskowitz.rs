//! Variational (Lax-Hopf) reconstruction of the Moskowitz surface N(t, x)
//! inside a link from its boundary count traces, and the density, speed and
//! acceleration fields derived from it.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::curves::CumulativeCurves;
use crate::error::{Error, Result};
use crate::fd::TriangularFD;
use crate::network::Link;

/// N(t_i, x_j) on a uniform grid; `values[i][j]`, t_i = i·dt, x_j = j·dx.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MoskowitzGrid {
    pub dt: f64,
    pub dx: f64,
    pub values: Vec<Vec<f64>>,
}

impl MoskowitzGrid {
    pub fn nt(&self) -> usize {
        self.values.len()
    }

    pub fn nx(&self) -> usize {
        self.values.first().map_or(0, Vec::len)
    }

    pub fn length(&self) -> f64 {
        (self.nx().saturating_sub(1)) as f64 * self.dx
    }

    /// Largest violation of the monotonicity invariants (0 when they hold).
    pub fn monotonicity_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.nt() {
            for j in 0..self.nx() {
                let v = self.values[i][j];
                if j + 1 < self.nx() {
                    worst = worst.max(self.values[i][j + 1] - v);
                }
                if i + 1 < self.nt() {
                    worst = worst.max(v - self.values[i + 1][j]);
                }
            }
        }
        worst
    }

    /// CSV with columns t, x, N.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "x", "N"])?;
        for (i, row) in self.values.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                w.write_record([(i as f64 * self.dt).to_string(), (j as f64 * self.dx).to_string(), v.to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Inverse of [`write_csv`]; rows may come in any order.
    pub fn read_csv<R: std::io::Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let mut pts = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let f = |i: usize| -> Result<f64> { rec.get(i).and_then(|s| s.trim().parse().ok()).ok_or_else(|| Error::Config(format!("grid csv: bad field {i} in {:?}", rec))) };
            pts.push((f(0)?, f(1)?, f(2)?));
        }
        let mut ts: Vec<f64> = pts.iter().map(|p| p.0).collect();
        let mut xs: Vec<f64> = pts.iter().map(|p| p.1).collect();
        for v in [&mut ts, &mut xs] {
            v.sort_by(f64::total_cmp);
            v.dedup();
        }
        if ts.len() < 2 || xs.len() < 2 || ts.len() * xs.len() != pts.len() {
            return Err(Error::Config("grid csv is not a full rectangular grid".into()));
        }
        let dt = ts[1] - ts[0];
        let dx = xs[1] - xs[0];
        let mut values = vec![vec![0.0; xs.len()]; ts.len()];
        for (t, x, n) in pts {
            values[(t / dt).round() as usize][(x / dx).round() as usize] = n;
        }
        Ok(MoskowitzGrid { dt, dx, values })
    }
}

/// Count trace value at time `tau` (s): linear between steps, 0 before the
/// horizon, held after it.
fn interp(trace: &[f64], dt: f64, tau: f64) -> f64 {
    if tau <= 0.0 {
        return 0.0;
    }
    let s = tau / dt;
    let i = s.floor() as usize;
    if i + 1 >= trace.len() {
        return *trace.last().unwrap();
    }
    let f = s - i as f64;
    trace[i] + f * (trace[i + 1] - trace[i])
}

/// Evaluate the Lax-Hopf formula with spatial step `dx` and `substeps`
/// grid rows per simulation step.
pub fn lax_hopf_moskowitz(link: &Link, curves: &CumulativeCurves, dx: f64, substeps: usize) -> Result<MoskowitzGrid> {
    let cells = link.length / dx;
    if !(dx > 0.0) || (cells - cells.round()).abs() > 1e-9 * cells.max(1.0) || cells.round() < 1.0 {
        return Err(Error::Config(format!("dx = {dx} does not divide link length {}", link.length)));
    }
    if substeps == 0 {
        return Err(Error::Config("substeps must be at least 1".into()));
    }
    let nx = cells.round() as usize + 1;
    let step = link.dt();
    let gdt = step / substeps as f64;
    let nt = curves.steps() * substeps + 1;
    let fd = &link.fd;
    let l = link.length;
    let values = (0..nt)
        .map(|i| {
            let t = i as f64 * gdt;
            (0..nx)
                .map(|j| {
                    let x = j as f64 * dx;
                    let up = interp(&curves.n_up, step, t - x / fd.k);
                    let down = interp(&curves.n_down, step, t - (l - x) / fd.w) + fd.rho_jam * (l - x);
                    up.min(down)
                })
                .collect()
        })
        .collect();
    Ok(MoskowitzGrid { dt: gdt, dx, values })
}

/// Derivative along one axis of a row-major field: central inside,
/// one-sided first order at the edges.
fn diff(get: impl Fn(usize) -> f64, n: usize, i: usize, h: f64) -> f64 {
    if n < 2 {
        0.0
    } else if i == 0 {
        (get(1) - get(0)) / h
    } else if i == n - 1 {
        (get(n - 1) - get(n - 2)) / h
    } else {
        (get(i + 1) - get(i - 1)) / (2.0 * h)
    }
}

/// Density ρ = −∂N/∂x (clamped to [0, ρ_jam]) and speed v = V(ρ).
pub fn density_velocity_fields(grid: &MoskowitzGrid, fd: &TriangularFD) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let nx = grid.nx();
    let rho: Vec<Vec<f64>> = grid
        .values
        .iter()
        .map(|row| (0..nx).map(|j| (-diff(|q| row[q], nx, j, grid.dx)).clamp(0.0, fd.rho_jam)).collect())
        .collect();
    let v = rho.iter().map(|row| row.iter().map(|&r| fd.velocity_unchecked(r)).collect()).collect();
    (rho, v)
}

/// Material acceleration a = ∂v/∂t + v·∂v/∂x.
pub fn acceleration_field(v: &[Vec<f64>], dt: f64, dx: f64) -> Vec<Vec<f64>> {
    let nt = v.len();
    let nx = v.first().map_or(0, Vec::len);
    (0..nt)
        .map(|i| {
            (0..nx)
                .map(|j| {
                    let dvdt = diff(|q| v[q][j], nt, i, dt);
                    let dvdx = diff(|q| v[i][q], nx, j, dx);
                    dvdt + v[i][j] * dvdx
                })
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn link() -> Link {
        Link::new(1, 400.0, TriangularFD::urban(), 10.0).unwrap()
    }

    #[test]
    fn empty_boundaries_give_zero_surface() {
        let g = lax_hopf_moskowitz(&link(), &CumulativeCurves::empty(10), 10.0, 2).unwrap();
        assert!(g.values.iter().flatten().all(|&v| v == 0.0));
        assert_eq!(g.nx(), 41);
        assert_eq!(g.nt(), 21);
    }

    #[test]
    fn dx_must_divide_length() {
        assert!(lax_hopf_moskowitz(&link(), &CumulativeCurves::empty(3), 7.0, 1).is_err());
    }

    #[test]
    fn constant_inflow_characteristics() {
        let l = link();
        let q = 0.5;
        let n = 30;
        let inflow = vec![q; n];
        let mut outflow = vec![0.0; n];
        for o in outflow.iter_mut().skip(l.delta_f) {
            *o = q;
        }
        let c = CumulativeCurves::from_flows(&inflow, &outflow, 10.0);
        let g = lax_hopf_moskowitz(&l, &c, 10.0, 1).unwrap();
        for i in 0..g.nt() {
            for j in 1..g.nx() - 1 {
                let (t, x) = (i as f64 * g.dt, j as f64 * g.dx);
                let want = (q * (t - x / l.fd.k)).max(0.0);
                assert!((g.values[i][j] - want).abs() < 1e-9, "t={t} x={x}");
            }
        }
    }

    #[test]
    fn affine_surface_density() {
        let fd = TriangularFD::urban();
        let rho0 = 0.25;
        let values = (0..5).map(|i| (0..9).map(|j| -rho0 * j as f64 * 5.0 + fd.flow_unchecked(rho0) * i as f64).collect()).collect();
        let g = MoskowitzGrid { dt: 1.0, dx: 5.0, values };
        let (rho, _) = density_velocity_fields(&g, &fd);
        assert!(rho.iter().flatten().all(|&r| (r - rho0).abs() < 1e-12));
    }

    #[test]
    fn acceleration_examples() {
        let c = 0.3;
        let v: Vec<Vec<f64>> = (0..6).map(|i| vec![c * i as f64; 4]).collect();
        assert!(acceleration_field(&v, 1.0, 1.0).iter().flatten().all(|&a| (a - c).abs() < 1e-12));
        let v: Vec<Vec<f64>> = (0..3).map(|_| (0..6).map(|j| c * j as f64 * 2.0).collect()).collect();
        let a = acceleration_field(&v, 1.0, 2.0);
        for row in &a {
            for (j, &x) in row.iter().enumerate() {
                assert!((x - c * 2.0 * j as f64 * c).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn csv_roundtrip() {
        let g = MoskowitzGrid { dt: 0.5, dx: 10.0, values: vec![vec![2.0, 1.0, 0.0], vec![3.0, 1.5, 0.25]] };
        let mut buf = Vec::new();
        g.write_csv(&mut buf).unwrap();
        assert_eq!(MoskowitzGrid::read_csv(&buf[..]).unwrap(), g);
    }
}
