//! Monte-Carlo sampling of (occupancy, aggregate emission rate) pairs on a
//! single link, regression fits of the macroscopic relation, and budget
//! uncertainty sets around it.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::emissions::{link_aer, EmissionModel};
use crate::error::{Error, Result};
use crate::ltm::{ltm_simulate, SignalPlan};
use crate::moskowitz::{acceleration_field, density_velocity_fields, lax_hopf_moskowitz};
use crate::network::{Boundary, Link, Network};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmissionSample {
    /// occupancy (veh)
    pub lo: f64,
    /// aggregate emission rate (g/h)
    pub aer: f64,
}

/// Forced state of a boundary gate; `Random` alternates red and green.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Gate {
    #[default]
    Random,
    Green,
    Red,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingConfig {
    pub runs: usize,
    pub samples_per_run: usize,
    /// simulated warm-up before sampling (s)
    pub burn_in_s: f64,
    pub dt: f64,
    pub dx: f64,
    /// red/green durations (s)
    pub phase_range: (f64, f64),
    /// durations of constant boundary levels (s)
    pub level_range: (f64, f64),
    pub upstream_gate: Gate,
    pub downstream_gate: Gate,
    /// replace the random upstream level by a constant (veh/s)
    pub demand_override: Option<f64>,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        SamplingConfig {
            runs: 100,
            samples_per_run: 400,
            burn_in_s: 60.0,
            dt: 1.0,
            dx: 10.0,
            phase_range: (10.0, 40.0),
            level_range: (10.0, 40.0),
            upstream_gate: Gate::Random,
            downstream_gate: Gate::Random,
            demand_override: None,
        }
    }
}

impl SamplingConfig {
    pub fn burn_in_steps(&self) -> usize {
        (self.burn_in_s / self.dt).round() as usize
    }

    pub fn steps_per_run(&self) -> usize {
        self.burn_in_steps() + self.samples_per_run
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryScenario {
    /// upstream demand per step (veh/s)
    pub demand: Vec<f64>,
    /// downstream supply per step (veh/s)
    pub supply: Vec<f64>,
}

fn uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.gen_range(lo..hi)
    } else {
        lo
    }
}

fn levels(rng: &mut ChaCha8Rng, steps: usize, dt: f64, cap: f64, durations: (f64, f64)) -> Vec<f64> {
    let mut out = Vec::with_capacity(steps);
    while out.len() < steps {
        let level = rng.gen_range(0.0..=cap);
        let n = ((uniform(rng, durations) / dt).round() as usize).max(1);
        out.extend(std::iter::repeat(level).take(n));
    }
    out.truncate(steps);
    out
}

fn gate(rng: &mut ChaCha8Rng, steps: usize, dt: f64, phases: (f64, f64), mode: Gate) -> Vec<f64> {
    match mode {
        Gate::Green => return vec![1.0; steps],
        Gate::Red => return vec![0.0; steps],
        Gate::Random => {}
    }
    let mut green = rng.gen_bool(0.5);
    // random offset into the first phase
    let mut remaining = uniform(rng, phases) * rng.gen::<f64>();
    let mut out = Vec::with_capacity(steps);
    for _ in 0..steps {
        while remaining <= 0.0 {
            green = !green;
            remaining += uniform(rng, phases);
        }
        out.push(if green { 1.0 } else { 0.0 });
        remaining -= dt;
    }
    out
}

/// Piecewise-constant boundary levels on [0, C] gated by independent
/// red/green signals at each end. Deterministic in `seed`.
pub fn random_boundary_scenario(seed: u64, link: &Link, steps: usize, cfg: &SamplingConfig) -> BoundaryScenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cap = link.capacity();
    let dt = link.dt();
    let up = match cfg.demand_override {
        Some(d) => vec![d; steps],
        None => levels(&mut rng, steps, dt, cap, cfg.level_range),
    };
    let down = levels(&mut rng, steps, dt, cap, cfg.level_range);
    let gu = gate(&mut rng, steps, dt, cfg.phase_range, cfg.upstream_gate);
    let gd = gate(&mut rng, steps, dt, cfg.phase_range, cfg.downstream_gate);
    BoundaryScenario { demand: up.iter().zip(&gu).map(|(a, b)| a * b).collect(), supply: down.iter().zip(&gd).map(|(a, b)| a * b).collect() }
}

/// Seed of run `i` derived from the master seed.
pub fn run_seed(master: u64, i: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(i as u64 + 1);
    rng.gen()
}

/// One run: simulate, reconstruct the fields, and emit one sample per step
/// after the burn-in.
pub fn simulate_run(seed: u64, link: &Link, model: &EmissionModel, cfg: &SamplingConfig) -> Result<Vec<EmissionSample>> {
    let steps = cfg.steps_per_run();
    let sc = random_boundary_scenario(seed, link, steps, cfg);
    let net = Network::single_link(link.clone());
    let mut b = Boundary::default();
    b.demand.insert(link.id, sc.demand);
    b.supply.insert(link.id, sc.supply);
    let tr = ltm_simulate(&net, &SignalPlan { green: Vec::new() }, &b, steps)?;
    let grid = lax_hopf_moskowitz(link, &tr.curves[0], cfg.dx, 1)?;
    let (rho, v) = density_velocity_fields(&grid, &link.fd);
    let a = acceleration_field(&v, grid.dt, grid.dx);
    let s = link_aer(&rho, &v, &a, model, grid.dx)?;
    Ok((cfg.burn_in_steps() + 1..=steps).map(|i| EmissionSample { lo: s.occupancy[i], aer: s.aer[i] }).collect())
}

/// All runs in parallel, concatenated in run order.
pub fn simulate_samples(link: &Link, model: &EmissionModel, seed: u64, cfg: &SamplingConfig) -> Result<Vec<EmissionSample>> {
    if cfg.runs == 0 {
        return Err(Error::Config("runs must be positive".into()));
    }
    if (link.dt() - cfg.dt).abs() > 1e-9 * cfg.dt {
        return Err(Error::Config(format!("link step {} differs from sampling dt {}", link.dt(), cfg.dt)));
    }
    let runs: Vec<Vec<EmissionSample>> = (0..cfg.runs).into_par_iter().map(|i| simulate_run(run_seed(seed, i), link, model, cfg)).collect::<Result<_>>()?;
    Ok(runs.into_iter().flatten().collect())
}

pub fn write_samples(samples: &[EmissionSample], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for s in samples {
        w.serialize(s)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_samples(path: &Path) -> Result<Vec<EmissionSample>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineRelation {
    pub a1: f64,
    pub a0: f64,
    pub r2: f64,
}

impl AffineRelation {
    pub fn eval(&self, lo: f64) -> f64 {
        self.a1 * lo + self.a0
    }
}

/// Ordinary least squares with centred sums.
pub fn fit_affine(samples: &[EmissionSample]) -> Result<AffineRelation> {
    let n = samples.len() as f64;
    if samples.len() < 2 {
        return Err(Error::Fit("need at least two samples".into()));
    }
    let mx = samples.iter().map(|s| s.lo).sum::<f64>() / n;
    let my = samples.iter().map(|s| s.aer).sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for s in samples {
        let (dx, dy) = (s.lo - mx, s.aer - my);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if sxx <= 1e-12 * (1.0 + mx * mx) * n {
        return Err(Error::Fit("occupancies are all equal; slope is undetermined".into()));
    }
    let a1 = sxy / sxx;
    let a0 = my - a1 * mx;
    let ss_res: f64 = samples.iter().map(|s| (s.aer - a1 * s.lo - a0).powi(2)).sum();
    let r2 = if syy > 0.0 { (1.0 - ss_res / syy).clamp(0.0, 1.0) } else { 1.0 };
    Ok(AffineRelation { a1, a0, r2 })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PwaShape {
    /// max over pieces
    Convex,
    /// min over pieces
    Concave,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseAffineRelation {
    /// (slope, intercept)
    pub pieces: Vec<(f64, f64)>,
    pub shape: PwaShape,
}

impl PiecewiseAffineRelation {
    pub fn eval(&self, lo: f64) -> f64 {
        let vals = self.pieces.iter().map(|(b1, b0)| b1 * lo + b0);
        match self.shape {
            PwaShape::Convex => vals.fold(f64::NEG_INFINITY, f64::max),
            PwaShape::Concave => vals.fold(f64::INFINITY, f64::min),
        }
    }
}

/// Equal-width occupancy intervals, one OLS fit each, then pieces that never
/// attain the envelope on the sampled range are dropped.
pub fn fit_piecewise(samples: &[EmissionSample], n_pieces: usize, shape: PwaShape) -> Result<PiecewiseAffineRelation> {
    if n_pieces == 0 {
        return Err(Error::Fit("need at least one piece".into()));
    }
    if samples.is_empty() {
        return Err(Error::Fit("no samples".into()));
    }
    let lo = samples.iter().map(|s| s.lo).fold(f64::INFINITY, f64::min);
    let hi = samples.iter().map(|s| s.lo).fold(f64::NEG_INFINITY, f64::max);
    let width = (hi - lo) / n_pieces as f64;
    let mut buckets = vec![Vec::new(); n_pieces];
    for s in samples {
        let b = if width > 0.0 { (((s.lo - lo) / width) as usize).min(n_pieces - 1) } else { 0 };
        buckets[b].push(*s);
    }
    let mut pieces = Vec::with_capacity(n_pieces);
    for (m, b) in buckets.iter().enumerate() {
        let f = fit_affine(b).map_err(|e| Error::Fit(format!("interval {m}: {e}")))?;
        pieces.push((f.a1, f.a0));
    }
    // envelope repair: keep pieces active somewhere on [lo, hi]
    let probe: Vec<f64> = (0..=400).map(|i| lo + (hi - lo) * i as f64 / 400.0).collect();
    let active: Vec<bool> = (0..pieces.len())
        .map(|m| {
            probe.iter().any(|&x| {
                let v = pieces[m].0 * x + pieces[m].1;
                pieces.iter().enumerate().all(|(o, p)| {
                    let w = p.0 * x + p.1;
                    match shape {
                        PwaShape::Convex => v >= w - 1e-9 * (1.0 + w.abs()) || o == m,
                        PwaShape::Concave => v <= w + 1e-9 * (1.0 + w.abs()) || o == m,
                    }
                })
            })
        })
        .collect();
    let kept: Vec<(f64, f64)> = pieces.iter().zip(&active).filter(|(_, &a)| a).map(|(p, _)| *p).collect();
    Ok(PiecewiseAffineRelation { pieces: if kept.is_empty() { pieces } else { kept }, shape })
}

/// Budget uncertainty set over polynomial coefficients a_l, l = 0..=degree:
/// box bounds per coefficient plus Σ_k Σ_{l≥1} a_{l,k} ≤ N·Σ_{l≥1} U_l / σ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UncertaintySet {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub sigma: f64,
}

impl UncertaintySet {
    pub fn affine(l0: f64, u0: f64, l1: f64, u1: f64, sigma: f64) -> Result<Self> {
        let s = UncertaintySet { lower: vec![l0, l1], upper: vec![u0, u1], sigma };
        s.validate()?;
        Ok(s)
    }

    pub fn degree(&self) -> usize {
        self.lower.len().saturating_sub(1)
    }

    /// Upper end of the admissible σ range, ΣU/ΣL over all coefficients.
    pub fn sigma_max(&self) -> f64 {
        let sl: f64 = self.lower.iter().sum();
        if sl > 0.0 {
            self.upper.iter().sum::<f64>() / sl
        } else {
            f64::INFINITY
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.lower.len() != self.upper.len() || self.lower.len() < 2 {
            return Err(Error::Uncertainty("bounds must cover a0 and at least a1".into()));
        }
        for (l, (lo, up)) in self.lower.iter().zip(&self.upper).enumerate() {
            if !(lo.is_finite() && up.is_finite()) || lo > up {
                return Err(Error::Uncertainty(format!("coefficient {l}: need finite L ≤ U, got [{lo}, {up}]")));
            }
        }
        let smax = self.sigma_max();
        if !(self.sigma >= 1.0) || self.sigma > smax * (1.0 + 1e-12) {
            return Err(Error::Uncertainty(format!("sigma {} outside [1, {smax}]", self.sigma)));
        }
        Ok(())
    }

    /// Per-step budget Σ_{l≥1} U_l / σ.
    pub fn budget_per_step(&self) -> f64 {
        self.upper[1..].iter().sum::<f64>() / self.sigma
    }

    /// Whether the budget row leaves any coefficients inside the box
    /// (Σ_{l≥1} L_l ≤ budget). When it does not, the set is empty and every
    /// robust row over it holds vacuously.
    pub fn budget_feasible(&self) -> bool {
        self.lower[1..].iter().sum::<f64>() <= self.budget_per_step() * (1.0 + 1e-12)
    }

    /// Worst-case Σ_k Σ_l a_{l,k}·c_k^l·w for fixed occupancies `c`, by the
    /// greedy solution of the inner LP (None when the set is empty).
    pub fn worst_case(&self, occ: &[f64], w: f64) -> Option<f64> {
        if !self.budget_feasible() {
            return None;
        }
        let n = occ.len();
        let mut total = n as f64 * self.upper[0] * w;
        let mut items = Vec::new();
        let mut budget = n as f64 * self.budget_per_step();
        for &c in occ {
            for l in 1..=self.degree() {
                let coef = c.powi(l as i32) * w;
                total += self.lower[l] * coef;
                budget -= self.lower[l];
                items.push((coef, self.upper[l] - self.lower[l]));
            }
        }
        items.sort_by(|a, b| b.0.total_cmp(&a.0));
        for (coef, room) in items {
            if coef <= 0.0 || budget <= 0.0 {
                break;
            }
            let take = room.min(budget);
            total += take * coef;
            budget -= take;
        }
        Some(total)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub coverage: f64,
    pub below: usize,
    pub above: usize,
    pub total: usize,
}

/// Fraction of samples inside [L1·lo + L0, U1·lo + U0]; samples outside
/// are counted, not discarded.
pub fn calibrate_uncertainty(samples: &[EmissionSample], l0: f64, u0: f64, l1: f64, u1: f64, sigma: f64) -> Result<(UncertaintySet, CalibrationReport)> {
    let set = UncertaintySet::affine(l0, u0, l1, u1, sigma)?;
    let mut below = 0;
    let mut above = 0;
    for s in samples {
        if s.aer < l1 * s.lo + l0 {
            below += 1;
        } else if s.aer > u1 * s.lo + u0 {
            above += 1;
        }
    }
    let total = samples.len();
    let coverage = if total == 0 { 1.0 } else { (total - below - above) as f64 / total as f64 };
    if coverage < 0.9 {
        log::warn!("uncertainty band covers only {:.2}% of samples", coverage * 100.0);
    }
    Ok((set, CalibrationReport { coverage, below, above, total }))
}

/// On-disk relation file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "lowercase")]
pub enum RelationFile {
    Affine {
        relation: AffineRelation,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        uncertainty: Option<UncertaintySet>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        coverage: Option<f64>,
    },
    Convex { pieces: Vec<(f64, f64)> },
    Concave { pieces: Vec<(f64, f64)> },
}

impl RelationFile {
    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}
