//! Link transmission model: forward time stepping of cumulative counts on a
//! network of links joined by (possibly signalized) junctions.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::curves::{receiving_flow, sending_flow, CumulativeCurves};
use crate::error::{Error, Result};
use crate::network::{Boundary, Network};

/// Green approach per junction per step. `green[j][k]` is the index (into
/// the junction's incoming list) that has green during step k + 1.
/// Entries for unsignalized junctions are ignored.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SignalPlan {
    pub green: Vec<Vec<usize>>,
}

impl SignalPlan {
    /// Every signalized junction alternates its approaches, holding each
    /// for `phase_steps` steps.
    pub fn fixed_cycle(net: &Network, steps: usize, phase_steps: usize) -> Self {
        let phase_steps = phase_steps.max(1);
        let green = net
            .junctions
            .iter()
            .map(|j| (0..steps).map(|k| if j.signalized { (k / phase_steps) % j.incoming.len() } else { 0 }).collect())
            .collect();
        SignalPlan { green }
    }

    /// Controls u_i for junction `j` during step `k` (1-based).
    pub fn controls(&self, net: &Network, j: usize, k: usize) -> Vec<f64> {
        let spec = &net.junctions[j];
        if !spec.signalized {
            return vec![1.0; spec.incoming.len()];
        }
        let g = self.green[j][k - 1];
        (0..spec.incoming.len()).map(|i| if i == g { 1.0 } else { 0.0 }).collect()
    }

    pub fn validate(&self, net: &Network, steps: usize) -> Result<()> {
        if self.green.len() != net.junctions.len() {
            return Err(Error::Config(format!("signal plan covers {} junctions, network has {}", self.green.len(), net.junctions.len())));
        }
        for (j, row) in self.green.iter().enumerate() {
            let spec = &net.junctions[j];
            if !spec.signalized {
                continue;
            }
            if row.len() < steps {
                return Err(Error::Config(format!("signal plan for junction {} has {} steps, need {steps}", spec.name, row.len())));
            }
            if let Some(&g) = row.iter().find(|&&g| g >= spec.incoming.len()) {
                return Err(Error::Config(format!("junction {}: green index {g} out of range", spec.name)));
            }
        }
        Ok(())
    }
}

/// Junction flows: each incoming link discharges min(D_i, min_o S_o/α_io)
/// gated by its control; outgoing links receive their turning shares.
/// Returns (q̂ per incoming, q̄ per outgoing, ζ per incoming).
pub fn junction_flows(demands: &[f64], supplies: &[f64], turning: &[Vec<f64>], controls: &[f64]) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    if turning.len() != demands.len() || controls.len() != demands.len() {
        return Err(Error::Config("junction inputs have mismatched lengths".into()));
    }
    let mut zeta = Vec::with_capacity(demands.len());
    for (i, row) in turning.iter().enumerate() {
        if row.len() != supplies.len() {
            return Err(Error::Config("turning row length differs from outgoing count".into()));
        }
        if row.iter().all(|&a| a == 0.0) {
            return Err(Error::Config(format!("incoming {i} has an all-zero turning row")));
        }
        let mut z = demands[i];
        for (o, &a) in row.iter().enumerate() {
            if a > 0.0 {
                z = z.min(supplies[o] / a);
            }
        }
        zeta.push(z);
    }
    let exit: Vec<f64> = zeta.iter().zip(controls).map(|(z, u)| z * u).collect();
    let entry = (0..supplies.len()).map(|o| exit.iter().zip(turning).map(|(q, row)| row[o] * q).sum()).collect();
    Ok((exit, entry, zeta))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationTrace {
    pub dt: f64,
    pub steps: usize,
    pub link_ids: Vec<usize>,
    pub curves: Vec<CumulativeCurves>,
    /// per link, per step (index k − 1): entering flow q̄ (veh/s)
    pub inflow: Vec<Vec<f64>>,
    /// exiting flow q̂
    pub outflow: Vec<Vec<f64>>,
    pub demand: Vec<Vec<f64>>,
    pub supply: Vec<Vec<f64>>,
    /// exit capacity-limited (r̂)
    pub r_down: Vec<Vec<bool>>,
    /// entrance space-limited (r̄)
    pub r_up: Vec<Vec<bool>>,
    /// per junction, per step, per incoming: ζ
    pub zeta: Vec<Vec<Vec<f64>>>,
    pub plan: SignalPlan,
}

impl SimulationTrace {
    pub fn position(&self, id: usize) -> Option<usize> {
        self.link_ids.iter().position(|&l| l == id)
    }

    pub fn occupancy(&self, p: usize) -> Vec<f64> {
        (0..=self.steps).map(|j| self.curves[p].occupancy(j)).collect()
    }

    /// Per-link CSV: step, link, inflow, outflow, occupancy.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_trace(self, std::fs::File::create(path)?)
    }
}

/// Simulate `steps` steps. Sources take min(demand, supply); sinks
/// discharge min(demand, boundary supply) with unrestricted supply when the
/// boundary gives none.
pub fn ltm_simulate(net: &Network, plan: &SignalPlan, boundary: &Boundary, steps: usize) -> Result<SimulationTrace> {
    plan.validate(net, steps)?;
    let nl = net.links.len();
    let dt = net.dt;
    for (&id, d) in &boundary.demand {
        let p = net.position(id).ok_or_else(|| Error::Config(format!("demand given for unknown link {id}")))?;
        if !net.sources().contains(&p) {
            return Err(Error::Config(format!("demand given for link {id}, which is not a source")));
        }
        if d.len() < steps {
            return Err(Error::Config(format!("demand profile of link {id} has {} steps, need {steps}", d.len())));
        }
        if d.iter().any(|&x| !(x >= 0.0)) {
            return Err(Error::Config(format!("demand profile of link {id} has negative entries")));
        }
    }
    for (&id, s) in &boundary.supply {
        if net.position(id).is_none() || s.len() < steps {
            return Err(Error::Config(format!("bad boundary supply for link {id}")));
        }
    }

    let mut curves: Vec<CumulativeCurves> = (0..nl).map(|_| CumulativeCurves::empty(steps)).collect();
    let mut tr = SimulationTrace {
        dt,
        steps,
        link_ids: net.link_ids(),
        curves: Vec::new(),
        inflow: vec![Vec::with_capacity(steps); nl],
        outflow: vec![Vec::with_capacity(steps); nl],
        demand: vec![Vec::with_capacity(steps); nl],
        supply: vec![Vec::with_capacity(steps); nl],
        r_down: vec![Vec::with_capacity(steps); nl],
        r_up: vec![Vec::with_capacity(steps); nl],
        zeta: vec![Vec::with_capacity(steps); net.junctions.len()],
        plan: plan.clone(),
    };
    let sources = net.sources();
    let sinks = net.sinks();

    for k in 1..=steps {
        let mut d = vec![0.0; nl];
        let mut s = vec![0.0; nl];
        for p in 0..nl {
            let l = &net.links[p];
            let (dv, rd) = sending_flow(l, &curves[p], k);
            let (sv, ru) = receiving_flow(l, &curves[p], k);
            d[p] = dv;
            s[p] = sv;
            tr.demand[p].push(dv);
            tr.supply[p].push(sv);
            tr.r_down[p].push(rd);
            tr.r_up[p].push(ru);
        }
        let mut qin = vec![0.0; nl];
        let mut qout = vec![0.0; nl];
        for &p in &sources {
            let dem = boundary.demand.get(&net.links[p].id).map_or(0.0, |v| v[k - 1]);
            qin[p] = dem.min(s[p]);
        }
        for &p in &sinks {
            let sup = boundary.supply.get(&net.links[p].id).map_or(f64::INFINITY, |v| v[k - 1]);
            qout[p] = d[p].min(sup);
        }
        for j in 0..net.junctions.len() {
            let ins = net.incoming_positions(j);
            let outs = net.outgoing_positions(j);
            let dem: Vec<f64> = ins.iter().map(|&p| d[p]).collect();
            let sup: Vec<f64> = outs.iter().map(|&p| s[p]).collect();
            let u = plan.controls(net, j, k);
            let (exit, entry, zeta) = junction_flows(&dem, &sup, &net.junctions[j].turning, &u)?;
            for (&p, q) in ins.iter().zip(exit) {
                qout[p] = q;
            }
            for (&p, q) in outs.iter().zip(entry) {
                qin[p] = q;
            }
            tr.zeta[j].push(zeta);
        }
        for p in 0..nl {
            let c = &mut curves[p];
            c.n_up[k] = c.n_up[k - 1] + qin[p] * dt;
            c.n_down[k] = c.n_down[k - 1] + qout[p] * dt;
            tr.inflow[p].push(qin[p]);
            tr.outflow[p].push(qout[p]);
        }
    }
    tr.curves = curves;
    Ok(tr)
}

/// Write the trace CSV to any writer (used by the CLI for stdout).
pub fn write_trace<W: Write>(tr: &SimulationTrace, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["step", "link", "inflow", "outflow", "occupancy"])?;
    for k in 1..=tr.steps {
        for (p, id) in tr.link_ids.iter().enumerate() {
            w.write_record([k.to_string(), id.to_string(), tr.inflow[p][k - 1].to_string(), tr.outflow[p][k - 1].to_string(), tr.curves[p].occupancy(k).to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fd::TriangularFD;
    use crate::network::{JunctionSpec, Link};

    #[test]
    fn red_blocks_and_split_by_turning() {
        let (q, _, _) = junction_flows(&[1.0, 1.0], &[2.0, 1.0], &[vec![0.5, 0.5], vec![0.5, 0.5]], &[0.0, 1.0]).unwrap();
        assert_eq!(q[0], 0.0);
        let (q, _, _) = junction_flows(&[1.0], &[2.0, 1.0], &[vec![0.5, 0.5]], &[1.0]).unwrap();
        assert_eq!(q[0], 1.0);
        let (_, e, _) = junction_flows(&[1.0, 0.0], &[5.0, 5.0], &[vec![0.5, 0.5], vec![0.3, 0.7]], &[1.0, 0.0]).unwrap();
        assert_eq!(e[0], 0.5);
    }

    #[test]
    fn zero_turning_row_is_rejected() {
        assert!(junction_flows(&[1.0], &[1.0], &[vec![0.0]], &[1.0]).is_err());
    }

    #[test]
    fn supply_limits_through_turning_share() {
        let (q, e, _) = junction_flows(&[1.2], &[0.2, 5.0], &[vec![0.25, 0.75]], &[1.0]).unwrap();
        assert!((q[0] - 0.8).abs() < 1e-12);
        assert!((e[0] - 0.2).abs() < 1e-12);
    }

    #[test]
    fn fixed_cycle_alternates() {
        let fd = TriangularFD::urban();
        let links = (1..=3).map(|id| Link::new(id, 400.0, fd, 10.0).unwrap()).collect();
        let j = JunctionSpec { name: "a".into(), incoming: vec![1, 2], outgoing: vec![3], turning: vec![vec![1.0], vec![1.0]], signalized: true };
        let net = Network::new(10.0, links, vec![j]).unwrap();
        let p = SignalPlan::fixed_cycle(&net, 6, 2);
        assert_eq!(p.green[0], vec![0, 0, 1, 1, 0, 0]);
        assert_eq!(p.controls(&net, 0, 3), vec![0.0, 1.0]);
    }

    proptest::proptest! {
        #[test]
        fn junction_conserves_and_respects_supply(
            d in proptest::collection::vec(0.0f64..2.0, 2),
            s in proptest::collection::vec(0.0f64..2.0, 2),
            a0 in 0.05f64..0.95,
            a1 in 0.05f64..0.95,
            u in proptest::collection::vec(0.0f64..=1.0, 2),
        ) {
            let turning = vec![vec![a0, 1.0 - a0], vec![a1, 1.0 - a1]];
            let (exit, entry, zeta) = junction_flows(&d, &s, &turning, &u).unwrap();
            let tol = 1e-12;
            proptest::prop_assert!((exit.iter().sum::<f64>() - entry.iter().sum::<f64>()).abs() < tol);
            for i in 0..2 {
                proptest::prop_assert!(exit[i] <= d[i] + tol && zeta[i] <= d[i] + tol);
                // each incoming alone never overfills an outgoing link
                for o in 0..2 {
                    proptest::prop_assert!(turning[i][o] * zeta[i] <= s[o] + tol);
                }
            }
        }
    }
}
