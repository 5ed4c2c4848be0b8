//! Links, junctions and the network they form.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fd::TriangularFD;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Link {
    pub id: usize,
    /// length (m)
    pub length: f64,
    pub fd: TriangularFD,
    /// free-flow traversal time in steps
    pub delta_f: usize,
    /// backward-wave traversal time in steps
    pub delta_b: usize,
}

fn steps_exact(t: f64, dt: f64, what: &str, id: usize) -> Result<usize> {
    let r = t / dt;
    let n = r.round();
    if n < 1.0 || (r - n).abs() > 1e-9 * r.max(1.0) {
        return Err(Error::Config(format!("link {id}: {what} time {t} s is not a positive multiple of dt = {dt} s")));
    }
    Ok(n as usize)
}

impl Link {
    /// Link with offsets derived from `dt`; fails unless L/k and L/w are
    /// whole multiples of `dt`.
    pub fn new(id: usize, length: f64, fd: TriangularFD, dt: f64) -> Result<Self> {
        fd.validate()?;
        if !(length > 0.0 && dt > 0.0) {
            return Err(Error::Config(format!("link {id}: length and dt must be positive")));
        }
        let delta_f = steps_exact(length / fd.k, dt, "free-flow", id)?;
        let delta_b = steps_exact(length / fd.w, dt, "backward-wave", id)?;
        Ok(Link { id, length, fd, delta_f, delta_b })
    }

    /// Time step implied by the offsets.
    pub fn dt(&self) -> f64 {
        self.length / (self.fd.k * self.delta_f as f64)
    }

    pub fn capacity(&self) -> f64 {
        self.fd.capacity
    }

    /// Jam storage ρ_jam·L (veh).
    pub fn storage(&self) -> f64 {
        self.fd.rho_jam * self.length
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JunctionSpec {
    #[serde(default)]
    pub name: String,
    pub incoming: Vec<usize>,
    pub outgoing: Vec<usize>,
    /// α[i][j]: share of incoming i turning into outgoing j
    pub turning: Vec<Vec<f64>>,
    pub signalized: bool,
}

impl JunctionSpec {
    pub fn validate(&self) -> Result<()> {
        let name = &self.name;
        if self.incoming.is_empty() || self.outgoing.is_empty() {
            return Err(Error::Config(format!("junction {name}: needs incoming and outgoing links")));
        }
        if self.turning.len() != self.incoming.len() {
            return Err(Error::Config(format!("junction {name}: turning matrix has {} rows for {} incoming links", self.turning.len(), self.incoming.len())));
        }
        for (i, row) in self.turning.iter().enumerate() {
            if row.len() != self.outgoing.len() {
                return Err(Error::Config(format!("junction {name}: turning row {i} has wrong length")));
            }
            if row.iter().any(|&a| !(0.0..=1.0).contains(&a)) {
                return Err(Error::Config(format!("junction {name}: turning ratios must lie in [0, 1]")));
            }
            let s: f64 = row.iter().sum();
            if s == 0.0 {
                return Err(Error::Config(format!("junction {name}: incoming link {} has an all-zero turning row", self.incoming[i])));
            }
            if (s - 1.0).abs() > 1e-9 {
                return Err(Error::Config(format!("junction {name}: turning row {i} sums to {s}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FdConfig {
    pub k: f64,
    pub rho_jam: f64,
    pub rho_crit: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LinkConfig {
    pub id: usize,
    pub length: f64,
    pub fd: FdConfig,
}

/// On-disk network description (JSON).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub dt: f64,
    pub links: Vec<LinkConfig>,
    pub junctions: Vec<JunctionSpec>,
}

#[derive(Debug, Clone)]
pub struct Network {
    pub dt: f64,
    pub links: Vec<Link>,
    pub junctions: Vec<JunctionSpec>,
    pos: HashMap<usize, usize>,
    /// per junction: incoming / outgoing link positions
    pub(crate) j_in: Vec<Vec<usize>>,
    pub(crate) j_out: Vec<Vec<usize>>,
    /// per link position: junction at its downstream / upstream end
    pub(crate) down_junction: Vec<Option<usize>>,
    pub(crate) up_junction: Vec<Option<usize>>,
}

impl Network {
    pub fn new(dt: f64, links: Vec<Link>, junctions: Vec<JunctionSpec>) -> Result<Self> {
        let mut pos = HashMap::new();
        for (p, l) in links.iter().enumerate() {
            if (l.dt() - dt).abs() > 1e-9 * dt {
                return Err(Error::Config(format!("link {} is not grid-admissible for dt = {dt}", l.id)));
            }
            if pos.insert(l.id, p).is_some() {
                return Err(Error::Config(format!("duplicate link id {}", l.id)));
            }
        }
        let lookup = |id: usize, j: &JunctionSpec| pos.get(&id).copied().ok_or_else(|| Error::Config(format!("junction {}: unknown link {id}", j.name)));
        let mut j_in = Vec::new();
        let mut j_out = Vec::new();
        let mut down_junction = vec![None; links.len()];
        let mut up_junction = vec![None; links.len()];
        for (jn, j) in junctions.iter().enumerate() {
            j.validate()?;
            if !j.signalized && j.incoming.len() > 1 {
                return Err(Error::Config(format!("junction {}: unsignalized merges are not supported", j.name)));
            }
            let ins = j.incoming.iter().map(|&id| lookup(id, j)).collect::<Result<Vec<_>>>()?;
            let outs = j.outgoing.iter().map(|&id| lookup(id, j)).collect::<Result<Vec<_>>>()?;
            for &p in &ins {
                if down_junction[p].replace(jn).is_some() {
                    return Err(Error::Config(format!("link {} ends at two junctions", links[p].id)));
                }
            }
            for &p in &outs {
                if up_junction[p].replace(jn).is_some() {
                    return Err(Error::Config(format!("link {} starts at two junctions", links[p].id)));
                }
            }
            j_in.push(ins);
            j_out.push(outs);
        }
        Ok(Network { dt, links, junctions, pos, j_in, j_out, down_junction, up_junction })
    }

    pub fn from_config(cfg: &NetworkConfig) -> Result<Self> {
        let links = cfg
            .links
            .iter()
            .map(|l| {
                let fd = TriangularFD::new(l.fd.k, l.fd.rho_jam, l.fd.rho_crit).map_err(|e| Error::Config(format!("links[id={}].fd: {e}", l.id)))?;
                Link::new(l.id, l.length, fd, cfg.dt)
            })
            .collect::<Result<Vec<_>>>()?;
        Network::new(cfg.dt, links, cfg.junctions.clone())
    }

    pub fn to_config(&self) -> NetworkConfig {
        NetworkConfig {
            dt: self.dt,
            links: self
                .links
                .iter()
                .map(|l| LinkConfig { id: l.id, length: l.length, fd: FdConfig { k: l.fd.k, rho_jam: l.fd.rho_jam, rho_crit: l.fd.rho_crit } })
                .collect(),
            junctions: self.junctions.clone(),
        }
    }

    /// Single link feeding nothing and fed by nothing.
    pub fn single_link(link: Link) -> Self {
        let dt = link.dt();
        Network::new(dt, vec![link], Vec::new()).expect("single link is always valid")
    }

    pub fn position(&self, id: usize) -> Option<usize> {
        self.pos.get(&id).copied()
    }

    pub fn link(&self, id: usize) -> Option<&Link> {
        self.position(id).map(|p| &self.links[p])
    }

    pub fn link_ids(&self) -> Vec<usize> {
        self.links.iter().map(|l| l.id).collect()
    }

    /// Positions of links with no upstream junction.
    pub fn sources(&self) -> Vec<usize> {
        (0..self.links.len()).filter(|&p| self.up_junction[p].is_none()).collect()
    }

    /// Positions of links with no downstream junction.
    pub fn sinks(&self) -> Vec<usize> {
        (0..self.links.len()).filter(|&p| self.down_junction[p].is_none()).collect()
    }

    pub fn signalized(&self) -> Vec<usize> {
        (0..self.junctions.len()).filter(|&j| self.junctions[j].signalized).collect()
    }

    pub fn incoming_positions(&self, j: usize) -> &[usize] {
        &self.j_in[j]
    }

    pub fn outgoing_positions(&self, j: usize) -> &[usize] {
        &self.j_out[j]
    }

    pub fn max_storage(&self) -> f64 {
        self.links.iter().map(Link::storage).fold(0.0, f64::max)
    }

    pub fn max_capacity(&self) -> f64 {
        self.links.iter().map(Link::capacity).fold(0.0, f64::max)
    }

    pub fn min_capacity(&self) -> f64 {
        self.links.iter().map(Link::capacity).fold(f64::INFINITY, f64::min)
    }
}

/// Boundary conditions: per-step demand at source links and optional
/// per-step receiving capacity at sink links (unrestricted when absent).
/// Keys are link ids.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Boundary {
    pub demand: BTreeMap<usize, Vec<f64>>,
    #[serde(default)]
    pub supply: BTreeMap<usize, Vec<f64>>,
}

impl Boundary {
    pub fn constant(demands: &[(usize, f64)], n: usize) -> Self {
        Boundary { demand: demands.iter().map(|&(id, d)| (id, vec![d; n])).collect(), supply: BTreeMap::new() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn urban_link_offsets() {
        let l = Link::new(1, 400.0, TriangularFD::urban(), 10.0).unwrap();
        assert_eq!((l.delta_f, l.delta_b), (3, 9));
        assert!((l.dt() - 10.0).abs() < 1e-12);
        let l = Link::new(1, 400.0, TriangularFD::urban(), 1.0).unwrap();
        assert_eq!((l.delta_f, l.delta_b), (30, 90));
    }

    #[test]
    fn inadmissible_step_is_rejected() {
        assert!(Link::new(1, 400.0, TriangularFD::urban(), 7.0).is_err());
    }

    #[test]
    fn turning_rows_must_be_stochastic() {
        let j = JunctionSpec { name: "x".into(), incoming: vec![1], outgoing: vec![2, 3], turning: vec![vec![0.5, 0.4]], signalized: true };
        assert!(j.validate().is_err());
        let j = JunctionSpec { turning: vec![vec![0.0, 0.0]], ..j };
        assert!(j.validate().is_err());
    }

    #[test]
    fn sources_and_sinks() {
        let fd = TriangularFD::urban();
        let links: Vec<Link> = (1..=3).map(|id| Link::new(id, 400.0, fd, 10.0).unwrap()).collect();
        let j = JunctionSpec { name: "d".into(), incoming: vec![1], outgoing: vec![2, 3], turning: vec![vec![0.5, 0.5]], signalized: false };
        let net = Network::new(10.0, links, vec![j]).unwrap();
        assert_eq!(net.sources(), vec![0]);
        assert_eq!(net.sinks(), vec![1, 2]);
    }
}
