//! Parallel, order-preserving execution of trajectory ensembles.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::evolution::{Simulation, Trajectory};
use crate::stats::ClickRecord;

/// Environment variable that sets the default worker count.
pub const WORKERS_ENV: &str = "QTRACK_WORKERS";

/// Worker count: the explicit value if given, else the environment
/// variable, else the number of available cores.
pub fn resolve_workers(explicit: Option<usize>) -> Result<usize> {
    if let Some(n) = explicit {
        return if n == 0 {
            Err(Error::Config("worker count must be at least 1".into()))
        } else {
            Ok(n)
        };
    }
    match std::env::var(WORKERS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(Error::Config(format!("{WORKERS_ENV} must be a positive integer (got {v:?})"))),
        },
        Err(_) => Ok(std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)),
    }
}

/// Runs trajectories `0..n_traj` on `workers` threads. The result is in
/// index order and does not depend on the worker count.
pub fn run_ensemble(sim: &Simulation, workers: usize) -> Result<Vec<Trajectory>> {
    let n = sim.config().n_traj as u64;
    run_indices(sim, workers, 0..n)
}

pub fn run_indices(sim: &Simulation, workers: usize, indices: std::ops::Range<u64>) -> Result<Vec<Trajectory>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    pool.install(|| indices.into_par_iter().map(|i| sim.run_trajectory(i)).collect())
}

/// Clicks of all trajectories that were not flagged, in trajectory order.
pub fn ensemble_clicks(trajectories: &[Trajectory]) -> Vec<ClickRecord> {
    trajectories
        .iter()
        .filter(|t| !t.flagged())
        .flat_map(|t| {
            t.clicks.iter().map(move |c| ClickRecord {
                traj_index: t.index,
                t: c.t,
                j: c.j,
                k: c.k,
                x: c.x,
                p: c.p,
            })
        })
        .collect()
}
