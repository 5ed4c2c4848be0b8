//! Vehicle trajectories as contour lines of the Moskowitz surface, and stop
//! counting along them.

use crate::moskowitz::MoskowitzGrid;

/// Position of the vehicle with label `c` in one grid row, or `None` before
/// it has entered (N(t,0) < c) or after it has left (N(t,L) ≥ c).
fn position(row: &[f64], dx: f64, c: f64) -> Option<f64> {
    let n = row.len();
    if n == 0 || row[0] < c || row[n - 1] >= c {
        return None;
    }
    for j in 0..n - 1 {
        if row[j] >= c && row[j + 1] < c {
            let f = (row[j] - c) / (row[j] - row[j + 1]);
            return Some((j as f64 + f) * dx);
        }
    }
    None
}

/// Labels of `n` trajectories spread evenly over the vehicles that entered.
pub fn contour_levels(grid: &MoskowitzGrid, n: usize) -> Vec<f64> {
    let total = grid.values.last().and_then(|r| r.first()).copied().unwrap_or(0.0);
    if total <= 0.0 {
        return Vec::new();
    }
    (1..=n).map(|i| total * i as f64 / (n + 1) as f64).collect()
}

/// Trajectory (t, x) of the vehicle labelled `c` while it is on the link.
pub fn trajectory(grid: &MoskowitzGrid, c: f64) -> Vec<(f64, f64)> {
    grid.values
        .iter()
        .enumerate()
        .filter_map(|(i, row)| position(row, grid.dx, c).map(|x| (i as f64 * grid.dt, x)))
        .collect()
}

/// Stops along one trajectory: maximal runs of consecutive grid steps
/// with speed below `v_stop`.
pub fn trajectory_stops(traj: &[(f64, f64)], v_stop: f64) -> usize {
    let mut stops = 0;
    let mut stopped = false;
    for w in traj.windows(2) {
        let (t0, x0) = w[0];
        let (t1, x1) = w[1];
        let v = (x1 - x0) / (t1 - t0);
        if v < v_stop {
            if !stopped {
                stops += 1;
            }
            stopped = true;
        } else {
            stopped = false;
        }
    }
    stops
}

/// Average stops per vehicle over `n_trajectories` evenly spaced contour
/// lines; 0 when no vehicle entered.
pub fn count_stops(grid: &MoskowitzGrid, n_trajectories: usize, v_stop: f64) -> f64 {
    let levels = contour_levels(grid, n_trajectories);
    if levels.is_empty() {
        return 0.0;
    }
    let total: usize = levels.iter().map(|&c| trajectory_stops(&trajectory(grid, c), v_stop)).sum();
    total as f64 / levels.len() as f64
}
