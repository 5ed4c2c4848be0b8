use greenwave_core::fd::TriangularFD;
use greenwave_core::ltm::ltm_simulate;
use greenwave_core::network::{Boundary, JunctionSpec, Link, Network};
use greenwave_core::signal_milp::{build_signal_milp, BigMConfig, MilpOptions, SourceCoupling};
use greenwave_core::ltm::SignalPlan;
use greenwave_milp::BnbConfig;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn junction() -> Network {
    let fd = TriangularFD::urban();
    let links = (1..=4).map(|id| Link::new(id, 400.0, fd, 10.0).unwrap()).collect();
    let j = JunctionSpec { name: "a".into(), incoming: vec![1, 2], outgoing: vec![3, 4], turning: vec![vec![0.5, 0.5], vec![0.3, 0.7]], signalized: true };
    Network::new(10.0, links, vec![j]).unwrap()
}

#[test]
fn optimum_replays_exactly() {
    let net = junction();
    let n: usize = std::env::var("FID_N").ok().and_then(|s| s.parse().ok()).unwrap_or(10);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut b = Boundary::default();
    for id in [1, 2] {
        b.demand.insert(id, (0..n).map(|_| rng.gen_range(0.2..1.2)).collect());
    }
    let opts = MilpOptions { bigm: BigMConfig::default(), coupling: SourceCoupling::Exact, objective_links: vec![3, 4] };
    let m = build_signal_milp(&net, &b, n, &opts).unwrap();
    let t = std::time::Instant::now();
    let start_tr = ltm_simulate(&net, &SignalPlan::fixed_cycle(&net, n, 3), &b, n).unwrap();
    let start = m.start_from_trace(&start_tr).unwrap();
    m.model.check_feasible(&start, 1e-6, 1e-9).unwrap();
    let sol = m.solve(&BnbConfig { time_limit: Some(std::time::Duration::from_secs(60)), ..Default::default() }, Some(&start)).unwrap();
    eprintln!("n={n} bound={} vars={} bins={} rows={} obj={} nodes={} t={:?} status={:?}", sol.best_bound, m.model.num_vars(), m.model.num_binaries(), m.model.num_rows(), sol.objective, sol.nodes, t.elapsed(), sol.status);
    let plan = m.plan_from(&sol.x);
    let tr = ltm_simulate(&net, &plan, &b, n).unwrap();
    let (qin, qout) = m.flows(&sol.x);
    for p in 0..4 {
        for k in 0..n {
            assert!((qin[p][k] - tr.inflow[p][k]).abs() < 1e-4, "in p={p} k={k} {} {}", qin[p][k], tr.inflow[p][k]);
            assert!((qout[p][k] - tr.outflow[p][k]).abs() < 1e-4, "out p={p} k={k} {} {}", qout[p][k], tr.outflow[p][k]);
        }
    }
}
