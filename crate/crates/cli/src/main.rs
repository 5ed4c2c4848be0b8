use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};

use greenwave_core::emissions::EmissionConfig;
use greenwave_core::error::Error as CoreError;
use greenwave_core::fd::TriangularFD;
use greenwave_core::macro_relation::{
    calibrate_uncertainty, fit_affine, fit_piecewise, read_samples, simulate_samples, write_samples, PwaShape, RelationFile, SamplingConfig,
};
use greenwave_core::moskowitz::MoskowitzGrid;
use greenwave_core::network::Link;
use greenwave_core::scenario::{emit_reports, load_scenario, preset, run_base, run_pair, Scenario};
use greenwave_core::stops::count_stops;
use greenwave_milp::{import_mps, solve_milp, BnbConfig, MilpError, MilpStatus};

const EXIT_INFEASIBLE: u8 = 2;
const EXIT_LIMIT: u8 = 3;

#[derive(Parser)]
#[command(name = "greenwave", version, about = "Signal timing with robust emission constraints")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    Speed,
    Modal,
}

#[derive(Clone, Copy, ValueEnum)]
enum ShapeArg {
    Affine,
    Convex,
    Concave,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Base,
    Lwre,
}

#[derive(Subcommand)]
enum Cmd {
    /// Sample (occupancy, emission rate) pairs on a single 400 m link.
    SimulateEmissions {
        #[arg(long, value_enum, default_value = "modal")]
        model: ModelArg,
        #[arg(long, default_value_t = 100)]
        runs: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 400)]
        samples_per_run: usize,
        #[arg(long, default_value_t = 1200.0)]
        mass_kg: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit an emission/occupancy relation and, for affine fits, calibrate
    /// the uncertainty set.
    Fit {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = 1)]
        pieces: usize,
        #[arg(long, value_enum, default_value = "affine")]
        shape: ShapeArg,
        #[arg(long)]
        l0: Option<f64>,
        #[arg(long)]
        u0: Option<f64>,
        #[arg(long)]
        l1: Option<f64>,
        #[arg(long)]
        u1: Option<f64>,
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve an MPS model with the built-in branch-and-bound.
    Solve {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = 1e-6)]
        gap: f64,
        /// seconds
        #[arg(long)]
        time_limit: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the four-intersection experiment (or a scenario file).
    RunScenario {
        #[arg(long, conflicts_with = "scenario")]
        preset: Option<String>,
        /// scenario JSON instead of a preset
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "base")]
        mode: ModeArg,
        /// JSON object link id → grams (null leaves a link uncapped)
        #[arg(long)]
        caps: Option<PathBuf>,
        /// relation file carrying the calibrated uncertainty set
        #[arg(long)]
        relation: Option<PathBuf>,
        #[arg(long)]
        search_time: Option<f64>,
        #[arg(long)]
        bnb_time: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Average stops per vehicle on a Moskowitz grid CSV.
    AnalyzeStops {
        #[arg(long)]
        grid: PathBuf,
        #[arg(long, default_value_t = 50)]
        levels: usize,
        #[arg(long, default_value_t = 0.1)]
        v_stop: f64,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if let Some(c) = cause.downcast_ref::<CoreError>() {
            match c {
                CoreError::Infeasible(_) | CoreError::Solver(MilpError::Infeasible) => return EXIT_INFEASIBLE,
                CoreError::SolverLimit(_) | CoreError::Solver(MilpError::LimitReached) => return EXIT_LIMIT,
                _ => {}
            }
        }
        if let Some(m) = cause.downcast_ref::<MilpError>() {
            match m {
                MilpError::Infeasible => return EXIT_INFEASIBLE,
                MilpError::LimitReached => return EXIT_LIMIT,
                _ => {}
            }
        }
    }
    1
}

fn run(cmd: Cmd) -> anyhow::Result<()> {
    match cmd {
        Cmd::SimulateEmissions { model, runs, seed, samples_per_run, mass_kg, out } => {
            let ecfg = EmissionConfig {
                model: match model {
                    ModelArg::Speed => "speed",
                    ModelArg::Modal => "modal",
                }
                .into(),
                mass_kg,
                ..Default::default()
            };
            let model = ecfg.build()?;
            let cfg = SamplingConfig { runs, samples_per_run, ..Default::default() };
            let link = Link::new(1, 400.0, TriangularFD::urban(), cfg.dt)?;
            let samples = simulate_samples(&link, &model, seed, &cfg)?;
            write_samples(&samples, &out)?;
            let f = fit_affine(&samples)?;
            println!("{} samples; AER = {:.4}·LO + {:.4} (R² = {:.4})", samples.len(), f.a1, f.a0, f.r2);
        }
        Cmd::Fit { input, pieces, shape, l0, u0, l1, u1, sigma, out } => {
            let samples = read_samples(&input).with_context(|| format!("reading {}", input.display()))?;
            let file = match shape {
                ShapeArg::Affine => {
                    if pieces != 1 {
                        bail!("--shape affine takes --pieces 1");
                    }
                    let relation = fit_affine(&samples)?;
                    println!("AER = {:.4}·LO + {:.4} (R² = {:.4})", relation.a1, relation.a0, relation.r2);
                    match (l0, u0, l1, u1) {
                        (Some(l0), Some(u0), Some(l1), Some(u1)) => {
                            let (set, rep) = calibrate_uncertainty(&samples, l0, u0, l1, u1, sigma)?;
                            println!("coverage {:.2}% ({} below, {} above of {})", rep.coverage * 100.0, rep.below, rep.above, rep.total);
                            RelationFile::Affine { relation, uncertainty: Some(set), coverage: Some(rep.coverage) }
                        }
                        (None, None, None, None) => RelationFile::Affine { relation, uncertainty: None, coverage: None },
                        _ => bail!("calibration needs all of --l0 --u0 --l1 --u1"),
                    }
                }
                ShapeArg::Convex | ShapeArg::Concave => {
                    let s = if matches!(shape, ShapeArg::Convex) { PwaShape::Convex } else { PwaShape::Concave };
                    let r = fit_piecewise(&samples, pieces, s)?;
                    for (b1, b0) in &r.pieces {
                        println!("piece: {b1:.4}·LO + {b0:.4}");
                    }
                    match s {
                        PwaShape::Convex => RelationFile::Convex { pieces: r.pieces },
                        PwaShape::Concave => RelationFile::Concave { pieces: r.pieces },
                    }
                }
            };
            file.save(&out)?;
        }
        Cmd::Solve { input, gap, time_limit, out } => {
            let model = import_mps(&input).with_context(|| format!("reading {}", input.display()))?;
            let cfg = BnbConfig { gap, time_limit: time_limit.map(Duration::from_secs_f64), ..Default::default() };
            let sol = solve_milp(&model, &cfg)?;
            let mut s = String::from("variable,value\n");
            for (v, x) in model.vars.iter().zip(&sol.x) {
                s.push_str(&format!("{},{x}\n", v.name));
            }
            std::fs::write(&out, s)?;
            let status = match sol.status {
                MilpStatus::Optimal => "optimal",
                MilpStatus::LimitReached => "limit",
            };
            println!("status {status}; objective {}; bound {}; nodes {}", sol.objective, sol.best_bound, sol.nodes);
        }
        Cmd::RunScenario { preset: p, scenario, mode, caps, relation, search_time, bnb_time, out } => {
            let mut sc = match (p, scenario) {
                (Some(p), None) => preset(&p)?,
                (None, Some(path)) => load_scenario(&path)?,
                _ => bail!("give exactly one of --preset or --scenario"),
            };
            apply_overrides(&mut sc, caps.as_deref(), relation.as_deref(), search_time, bnb_time)?;
            let reports = match mode {
                ModeArg::Base => vec![run_base(&sc, &[])?.report],
                ModeArg::Lwre => {
                    let (base, lwre) = run_pair(&sc)?;
                    vec![base.report, lwre.report]
                }
            };
            emit_reports(&reports, &out, sc.replay.stop_levels)?;
            for r in &reports {
                println!("{} {}: objective {:.4} ({}), emission {:.1} g", r.scenario, r.mode.name(), r.objective, r.status, r.total_emission);
            }
        }
        Cmd::AnalyzeStops { grid, levels, v_stop } => {
            if !(v_stop > 0.0) {
                bail!("--v-stop must be positive");
            }
            let f = std::fs::File::open(&grid).with_context(|| format!("opening {}", grid.display()))?;
            let g = MoskowitzGrid::read_csv(f)?;
            println!("{:.6}", count_stops(&g, levels, v_stop));
        }
    }
    Ok(())
}

fn apply_overrides(sc: &mut Scenario, caps: Option<&Path>, relation: Option<&Path>, search_time: Option<f64>, bnb_time: Option<f64>) -> anyhow::Result<()> {
    if let Some(path) = caps {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let map: BTreeMap<usize, Option<f64>> = serde_json::from_str(&text).with_context(|| format!("parsing caps in {}", path.display()))?;
        sc.caps = map;
    }
    if let Some(path) = relation {
        match RelationFile::load(path)? {
            RelationFile::Affine { uncertainty: Some(u), .. } => sc.uncertainty = u,
            RelationFile::Affine { uncertainty: None, .. } => bail!("{}: relation has no calibrated uncertainty set (fit with --l0 --u0 --l1 --u1)", path.display()),
            _ => bail!("{}: scenario runs take an affine relation", path.display()),
        }
    }
    if let Some(t) = search_time {
        sc.solver.search_time_s = t;
    }
    if let Some(t) = bnb_time {
        sc.solver.bnb_time_s = t;
    }
    sc.validate()?;
    Ok(())
}
