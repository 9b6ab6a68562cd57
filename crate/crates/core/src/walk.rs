//! Simple random walk `M_n` on an oriented lattice and direct Monte Carlo
//! statistics of returns and horizontal speed.
//!
//! Every step picks one of the three out-neighbours uniformly; the choice is
//! an exact three-way draw from [`RngStream::trit`]. Estimators give sample
//! `i` of environment `e` the stream `stream_id(tag, e, i)`, and reduce
//! integer moments, so their output is a function of the master seed alone.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimate::Estimate;
use crate::lattice::{EnvironmentSpec, EpsilonTable, Vertex};
use crate::parallel;
use crate::rng::{stream_id, tags, Move, RngStream};

/// Rows cached around the origin for long walks.
const TABLE_RADIUS: u64 = 1 << 16;

/// One step of the walk from `v`.
pub fn step(env: &EnvironmentSpec, v: Vertex, rng: &mut RngStream) -> Result<Vertex> {
    match rng.choose_move() {
        Move::Up => v.offset(0, 1),
        Move::Down => v.offset(0, -1),
        Move::Horizontal => v.offset(env.epsilon(v.y).as_i64(), 0),
    }
}

/// A finite path `M_0 = start, M_1, ..., M_n`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trajectory {
    pub start: Vertex,
    /// Positions `M_1..M_n`.
    pub steps: Vec<Vertex>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// `M_k`, with `M_0 = start`.
    pub fn position(&self, k: usize) -> Vertex {
        if k == 0 {
            self.start
        } else {
            self.steps[k - 1]
        }
    }

    pub fn end(&self) -> Vertex {
        self.steps.last().copied().unwrap_or(self.start)
    }

    /// Checks `M_{k+1}` is an out-neighbour of `M_k` for every `k`.
    pub fn is_adjacent(&self, env: &EnvironmentSpec) -> bool {
        let mut prev = self.start;
        for &next in &self.steps {
            let vertical = next.x == prev.x && prev.y.checked_sub(next.y).is_some_and(|d| d.abs() == 1);
            let horizontal = next.y == prev.y && prev.x.checked_add(env.epsilon(prev.y).as_i64()) == Some(next.x);
            if !(vertical || horizontal) {
                return false;
            }
            prev = next;
        }
        true
    }
}

/// `n` steps from `start`.
pub fn simulate(env: &EnvironmentSpec, start: Vertex, n: u64, rng: &mut RngStream) -> Result<Trajectory> {
    if n == 0 {
        return Err(Error::InvalidArgument("trajectory length must be at least 1".into()));
    }
    let mut steps = Vec::with_capacity(n as usize);
    let mut v = start;
    if fits_without_overflow(start, n) {
        let table = env.table(n.min(TABLE_RADIUS));
        for _ in 0..n {
            v = match rng.choose_move() {
                Move::Up => Vertex::new(v.x, v.y + 1),
                Move::Down => Vertex::new(v.x, v.y - 1),
                Move::Horizontal => Vertex::new(v.x + table.get(v.y), v.y),
            };
            steps.push(v);
        }
    } else {
        for _ in 0..n {
            v = step(env, v, rng)?;
            steps.push(v);
        }
    }
    let traj = Trajectory { start, steps };
    debug_assert!(traj.is_adjacent(env));
    Ok(traj)
}

fn fits_without_overflow(start: Vertex, n: u64) -> bool {
    let n = n.min(i64::MAX as u64) as i64;
    start.x.checked_add(n).is_some()
        && start.x.checked_sub(n).is_some()
        && start.y.checked_add(n).is_some()
        && start.y.checked_sub(n).is_some()
}

/// Per-checkpoint record of one walker started at the origin.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CheckpointRecord {
    /// `#{1 <= k <= t : M_k = origin}`.
    pub returns: u64,
    /// `|x(M_t)|`.
    pub abs_x: u64,
}

/// Runs one walker from the origin, recording at each (increasing) checkpoint.
pub fn run_walker(table: &EpsilonTable<'_>, checkpoints: &[u64], rng: &mut RngStream) -> Vec<CheckpointRecord> {
    let mut out = Vec::with_capacity(checkpoints.len());
    let (mut x, mut y) = (0i64, 0i64);
    let mut returns = 0u64;
    let mut t = 0u64;
    for &cp in checkpoints {
        while t < cp {
            // trit 0: up, 1: down, 2: horizontal; kept branch-free
            let m = rng.trit() as i64;
            let horizontal = (m >> 1) & 1;
            x += horizontal * table.get(y);
            y += (1 - horizontal) * (1 - 2 * m);
            t += 1;
            returns += ((x | y) == 0) as u64;
        }
        out.push(CheckpointRecord { returns, abs_x: x.unsigned_abs() });
    }
    out
}

/// Number of returns to the origin within `horizon` steps of one trajectory.
pub fn count_returns(env: &EnvironmentSpec, horizon: u64, rng: &mut RngStream) -> Result<u64> {
    let table = env.table(horizon.min(TABLE_RADIUS));
    Ok(run_walker(&table, &[horizon], rng)[0].returns)
}

fn validate_checkpoints(checkpoints: &[u64]) -> Result<()> {
    if checkpoints.is_empty() {
        return Err(Error::InvalidArgument("checkpoints must be nonempty".into()));
    }
    if checkpoints.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument("checkpoints must be strictly increasing".into()));
    }
    Ok(())
}

/// Statistics at one checkpoint of an ensemble run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CheckpointStats {
    pub checkpoint: u64,
    /// Mean number of returns to the origin up to the checkpoint.
    pub mean_returns: Estimate,
    /// Fraction of walkers with at least one return.
    pub fraction_returned: Estimate,
    /// Mean of `|x(M_n)| / n`.
    pub speed: Estimate,
}

/// Walkers over one or more environments.
///
/// With several environments the averaging is two-level: each statistic is
/// first averaged over the walkers of one environment, and the reported
/// error is the spread of those per-environment means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleStats {
    pub n_envs: u64,
    pub walkers_per_env: u64,
    pub checkpoints: Vec<CheckpointStats>,
}

pub fn ensemble_stats(
    envs: &[EnvironmentSpec],
    checkpoints: &[u64],
    walkers_per_env: u64,
    master_seed: u64,
) -> Result<EnsembleStats> {
    validate_checkpoints(checkpoints)?;
    if envs.is_empty() || walkers_per_env == 0 {
        return Err(Error::InvalidArgument("need at least one environment and one walker".into()));
    }
    let horizon = *checkpoints.last().unwrap();
    let radius = horizon.min(TABLE_RADIUS);
    let tables: Vec<EpsilonTable<'_>> = envs.iter().map(|e| e.table(radius)).collect();
    let n_cp = checkpoints.len();

    // per environment, per checkpoint: integer moments
    let mut per_env: Vec<Vec<[u128; 5]>> = Vec::with_capacity(envs.len());
    for (e, table) in tables.iter().enumerate() {
        let records = parallel::map_indexed(walkers_per_env, |w| {
            let mut rng = RngStream::new(master_seed, stream_id(tags::WALK, e as u32, w as u32));
            run_walker(table, checkpoints, &mut rng)
        });
        let mut acc = vec![[0u128; 5]; n_cp];
        for rec in &records {
            for (a, r) in acc.iter_mut().zip(rec) {
                a[0] += r.returns as u128;
                a[1] += (r.returns as u128).pow(2);
                a[2] += (r.returns > 0) as u128;
                a[3] += r.abs_x as u128;
                a[4] += (r.abs_x as u128).pow(2);
            }
        }
        per_env.push(acc);
    }

    let walker_estimates = |acc: &[u128; 5], cp: u64| {
        let n = walkers_per_env;
        let speed = Estimate::from_integer_moments(acc[3] as i128, acc[4], n);
        [
            Estimate::from_integer_moments(acc[0] as i128, acc[1], n),
            Estimate::proportion(acc[2] as u64, n),
            Estimate {
                value: speed.value / cp as f64,
                std_error: speed.std_error / cp as f64,
                ..speed
            },
        ]
    };

    let stats = (0..n_cp)
        .map(|c| {
            let cp = checkpoints[c];
            let ests: [Estimate; 3] = if envs.len() == 1 {
                walker_estimates(&per_env[0][c], cp)
            } else {
                let means: Vec<[Estimate; 3]> = per_env.iter().map(|acc| walker_estimates(&acc[c], cp)).collect();
                let total = envs.len() as u64 * walkers_per_env;
                std::array::from_fn(|k| {
                    let xs: Vec<f64> = means.iter().map(|m| m[k].value).collect();
                    Estimate { n_samples: total, ..Estimate::from_samples(&xs) }
                })
            };
            CheckpointStats {
                checkpoint: cp,
                mean_returns: ests[0],
                fraction_returned: ests[1],
                speed: ests[2],
            }
        })
        .collect();
    Ok(EnsembleStats {
        n_envs: envs.len() as u64,
        walkers_per_env,
        checkpoints: stats,
    })
}

/// Mean number of returns and fraction of walkers with at least one return.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReturnStats {
    pub mean_returns: Estimate,
    pub fraction_returned: Estimate,
}

pub fn estimate_return_stats(
    env: &EnvironmentSpec,
    horizon: u64,
    n_samples: u64,
    master_seed: u64,
) -> Result<ReturnStats> {
    if n_samples < 2 {
        return Err(Error::InvalidArgument("need at least two samples".into()));
    }
    if horizon == 0 {
        let zero = Estimate { value: 0.0, std_error: 0.0, n_samples, ci_level: crate::estimate::DEFAULT_CI_LEVEL };
        return Ok(ReturnStats { mean_returns: zero, fraction_returned: zero });
    }
    let s = ensemble_stats(std::slice::from_ref(env), &[horizon], n_samples, master_seed)?;
    let cp = s.checkpoints[0];
    Ok(ReturnStats {
        mean_returns: cp.mean_returns,
        fraction_returned: cp.fraction_returned,
    })
}

/// Mean `|x(M_n)| / n` at each checkpoint, from common trajectories.
pub fn estimate_speed(
    env: &EnvironmentSpec,
    checkpoints: &[u64],
    n_samples: u64,
    master_seed: u64,
) -> Result<Vec<(u64, Estimate)>> {
    let s = ensemble_stats(std::slice::from_ref(env), checkpoints, n_samples, master_seed)?;
    Ok(s.checkpoints.iter().map(|c| (c.checkpoint, c.speed)).collect())
}

/// Counts of `M_n` over `n_samples` walkers from the origin.
pub fn empirical_law(
    env: &EnvironmentSpec,
    n: u64,
    n_samples: u64,
    master_seed: u64,
) -> Result<BTreeMap<Vertex, u64>> {
    let ends = parallel::try_map_indexed(n_samples, |i| {
        let mut rng = RngStream::new(master_seed, stream_id(tags::LAW, 0, i as u32));
        simulate(env, Vertex::ORIGIN, n, &mut rng).map(|t| t.end())
    })?;
    let mut counts = BTreeMap::new();
    for v in ends {
        *counts.entry(v).or_insert(0) += 1;
    }
    Ok(counts)
}
