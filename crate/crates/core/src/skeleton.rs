//! Vertical skeleton decomposition of the walk.
//!
//! The vertical moves of `M` form a simple symmetric walk `Y` (the skeleton).
//! Before its `n`-th vertical move the walk sits at level `Y_{n-1}` and makes
//! a burst of horizontal moves in direction `epsilon_{Y_{n-1}}` whose length
//! is geometric with success probability `2/3`. Indexing the burst at the
//! `i`-th visit of level `y` as `xi_i^{(y)}`:
//!
//! ```text
//! T_n     = n + sum_y sum_{i <= eta_{n-1}(y)} xi_i^{(y)}
//! X_n     = sum_y epsilon_y sum_{i <= eta_{n-1}(y)} xi_i^{(y)}
//! Delta_n = sum_y epsilon_y eta_{n-1}(y)
//! M_{T_n} = (X_n, Y_n)
//! ```
//!
//! where `eta_m(y)` counts `k in [0, m]` with `Y_k = y`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimate::Estimate;
use crate::lattice::{EnvironmentSpec, EpsilonTable, Vertex};
use crate::parallel;
use crate::rng::{stream_id, tags, RngStream};
use crate::walk::Trajectory;

/// `psi_1..psi_n` and the path `Y_0 = 0, ..., Y_n`.
pub fn simulate_skeleton(n: u64, rng: &mut RngStream) -> Result<(Vec<i8>, Vec<i64>)> {
    if n == 0 {
        return Err(Error::InvalidArgument("skeleton length must be at least 1".into()));
    }
    let psi: Vec<i8> = (0..n).map(|_| rng.rademacher() as i8).collect();
    let y = path_from_increments(&psi);
    Ok((psi, y))
}

pub fn path_from_increments(psi: &[i8]) -> Vec<i64> {
    let mut y = Vec::with_capacity(psi.len() + 1);
    y.push(0);
    let mut level = 0i64;
    for &p in psi {
        level += p as i64;
        y.push(level);
    }
    y
}

/// `eta_n(y)` for the whole path `Y_0..Y_n`; total mass `n + 1`.
pub fn occupation_times(path: &[i64]) -> BTreeMap<i64, u64> {
    let mut eta = BTreeMap::new();
    for &level in path {
        *eta.entry(level).or_insert(0) += 1;
    }
    eta
}

/// Successive times `k > 0` with `Y_k = 0`.
pub fn return_times(path: &[i64]) -> Vec<u64> {
    path.iter()
        .enumerate()
        .skip(1)
        .filter(|(_, &y)| y == 0)
        .map(|(k, _)| k as u64)
        .collect()
}

/// Burst lengths `xi_i^{(y)}`, keyed by `(level, visit index)` with visit indices from 1.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct XiDraws {
    #[serde(with = "xi_serde")]
    draws: BTreeMap<(i64, u64), u64>,
}

impl XiDraws {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, level: i64, visit: u64, value: u64) {
        self.draws.insert((level, visit), value);
    }

    pub fn get(&self, level: i64, visit: u64) -> Option<u64> {
        self.draws.get(&(level, visit)).copied()
    }

    /// Memoised draw: repeated requests for the same `(level, visit)` agree.
    pub fn get_or_draw(&mut self, level: i64, visit: u64, rng: &mut RngStream) -> u64 {
        *self.draws.entry((level, visit)).or_insert_with(|| rng.geometric_two_thirds())
    }

    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = ((i64, u64), u64)> + '_ {
        self.draws.iter().map(|(&k, &v)| (k, v))
    }

    /// Draws for every visit of the path `Y_0..Y_{n-1}` (the visits whose
    /// bursts precede the `n`-th vertical move).
    pub fn sample_for_path(path: &[i64], rng: &mut RngStream) -> XiDraws {
        let mut xi = XiDraws::new();
        let mut visits: BTreeMap<i64, u64> = BTreeMap::new();
        for &level in &path[..path.len().saturating_sub(1)] {
            let v = visits.entry(level).or_insert(0);
            *v += 1;
            xi.get_or_draw(level, *v, rng);
        }
        xi
    }
}

mod xi_serde {
    use super::*;
    use serde::{Deserializer, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Entry {
        level: i64,
        visit: u64,
        value: u64,
    }

    pub fn serialize<S: Serializer>(m: &BTreeMap<(i64, u64), u64>, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_seq(m.iter().map(|(&(level, visit), &value)| Entry { level, visit, value }))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<BTreeMap<(i64, u64), u64>, D::Error> {
        let entries = Vec::<Entry>::deserialize(d)?;
        Ok(entries.into_iter().map(|e| ((e.level, e.visit), e.value)).collect())
    }
}

/// `X_n`, `T_n`, `Delta_n` for `n = 0..=len`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Embedding {
    pub x: Vec<i64>,
    pub t: Vec<u64>,
    pub delta: Vec<i64>,
}

/// Embedded horizontal walk for skeleton path `Y_0..Y_n`.
pub fn embed_horizontal(env: &EnvironmentSpec, path: &[i64], xi: &XiDraws) -> Result<Embedding> {
    if path.first() != Some(&0) {
        return Err(Error::Contract("skeleton path must start at 0".into()));
    }
    let n = path.len() - 1;
    let mut out = Embedding {
        x: Vec::with_capacity(n + 1),
        t: Vec::with_capacity(n + 1),
        delta: Vec::with_capacity(n + 1),
    };
    out.x.push(0);
    out.t.push(0);
    out.delta.push(0);
    let mut visits: BTreeMap<i64, u64> = BTreeMap::new();
    let (mut x, mut t, mut delta) = (0i64, 0u64, 0i64);
    // step m adds the visit at time m-1, i.e. eta_{m-1} grows by one entry
    for &level in &path[..n] {
        let visit = visits.entry(level).or_insert(0);
        *visit += 1;
        let burst = xi
            .get(level, *visit)
            .ok_or_else(|| Error::Contract(format!("missing xi draw for level {level}, visit {visit}")))?;
        let eps = env.epsilon(level).as_i64();
        x = checked(x.checked_add(eps * burst as i64))?;
        t = checked(t.checked_add(burst + 1))?;
        delta += eps;
        out.x.push(x);
        out.t.push(t);
        out.delta.push(delta);
    }
    Ok(out)
}

fn checked<T>(v: Option<T>) -> Result<T> {
    v.ok_or(Error::Overflow { x: i64::MAX, y: 0 })
}

/// The full walk whose vertical moves are `psi` and whose bursts are `xi`.
///
/// Satisfies `M_{T_n} = (X_n, Y_n)` for every `n`.
pub fn reconstruct_full_walk(env: &EnvironmentSpec, psi: &[i8], xi: &XiDraws) -> Result<Trajectory> {
    let mut steps = Vec::new();
    let mut v = Vertex::ORIGIN;
    let mut visits: BTreeMap<i64, u64> = BTreeMap::new();
    for &p in psi {
        let visit = visits.entry(v.y).or_insert(0);
        *visit += 1;
        let burst = xi
            .get(v.y, *visit)
            .ok_or_else(|| Error::Contract(format!("missing xi draw for level {}, visit {visit}", v.y)))?;
        let eps = env.epsilon(v.y).as_i64();
        for _ in 0..burst {
            v = v.offset(eps, 0)?;
            steps.push(v);
        }
        v = v.offset(0, p as i64)?;
        steps.push(v);
    }
    Ok(Trajectory { start: Vertex::ORIGIN, steps })
}

/// One skeleton realisation with every derived quantity.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkeletonTrace {
    pub psi: Vec<i8>,
    pub y: Vec<i64>,
    /// `eta_{n-1}`, occupation of `Y_0..Y_{n-1}`.
    pub eta: BTreeMap<i64, u64>,
    pub sigma: Vec<u64>,
    pub xi: XiDraws,
    pub x: Vec<i64>,
    pub t: Vec<u64>,
    pub delta: Vec<i64>,
}

impl SkeletonTrace {
    pub fn sample(env: &EnvironmentSpec, n: u64, rng: &mut RngStream) -> Result<SkeletonTrace> {
        let (psi, y) = simulate_skeleton(n, rng)?;
        let xi = XiDraws::sample_for_path(&y, rng);
        Self::from_parts(env, psi, xi)
    }

    pub fn from_parts(env: &EnvironmentSpec, psi: Vec<i8>, xi: XiDraws) -> Result<SkeletonTrace> {
        let y = path_from_increments(&psi);
        let emb = embed_horizontal(env, &y, &xi)?;
        Ok(SkeletonTrace {
            eta: occupation_times(&y[..y.len() - 1]),
            sigma: return_times(&y),
            psi,
            y,
            xi,
            x: emb.x,
            t: emb.t,
            delta: emb.delta,
        })
    }

    /// Checks `M_{T_n} = (X_n, Y_n)` against the reconstructed walk for every `n`.
    pub fn coupling_holds(&self, env: &EnvironmentSpec) -> Result<bool> {
        let walk = reconstruct_full_walk(env, &self.psi, &self.xi)?;
        if walk.len() as u64 != *self.t.last().unwrap() {
            return Ok(false);
        }
        Ok((0..self.y.len()).all(|n| walk.position(self.t[n] as usize) == Vertex::new(self.x[n], self.y[n])))
    }
}

/// `Delta_{sigma_n} = sum_{k < sigma_n} epsilon_{Y_k}`.
pub fn delta_at_sigma(env: &EnvironmentSpec, path: &[i64], n: usize) -> Result<i64> {
    if n == 0 {
        return Ok(0);
    }
    let sigma = return_times(path);
    let s = *sigma
        .get(n - 1)
        .ok_or_else(|| Error::Contract(format!("path has {} returns, asked for return {n}", sigma.len())))?;
    Ok(path[..s as usize].iter().map(|&y| env.epsilon(y).as_i64()).sum())
}

/// Result of sampling `X` at a return time of the skeleton.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SigmaOutcome {
    Value(i64),
    /// The skeleton made more than `cap` steps before the requested return.
    Censored,
}

/// `X_{sigma_1}, ..., X_{sigma_k}` along one trajectory, stopping early when
/// the skeleton exceeds `cap` steps.
///
/// Runs the full walk move by move: horizontal moves accumulate the burst at
/// the current level and vertical moves advance the skeleton, so `psi` and
/// `xi` come out with exactly their laws and the value read on arrival at
/// level 0 is `X_{sigma_j}`.
pub fn sample_x_at_returns(table: &EpsilonTable<'_>, k: usize, cap: u64, rng: &mut RngStream) -> (Vec<i64>, bool) {
    let mut out = Vec::with_capacity(k);
    let (mut x, mut y) = (0i64, 0i64);
    let mut vertical = 0u64;
    while out.len() < k {
        let m = rng.trit() as i64;
        let horizontal = (m >> 1) & 1;
        x += horizontal * table.get(y);
        y += (1 - horizontal) * (1 - 2 * m);
        vertical += (1 - horizontal) as u64;
        if horizontal == 0 {
            if vertical > cap {
                return (out, true);
            }
            if y == 0 {
                out.push(x);
            }
        }
    }
    (out, false)
}

/// `X_{sigma_k}` for one sampled skeleton, or [`SigmaOutcome::Censored`].
pub fn sample_x_at_sigma(env: &EnvironmentSpec, k: usize, rng: &mut RngStream, cap: u64) -> Result<SigmaOutcome> {
    if k == 0 {
        return Err(Error::InvalidArgument("return index must be at least 1".into()));
    }
    let table = env.table(cap.min(1 << 16));
    let (xs, censored) = sample_x_at_returns(&table, k, cap, rng);
    Ok(if censored { SigmaOutcome::Censored } else { SigmaOutcome::Value(xs[k - 1]) })
}

/// Monte Carlo estimate of `P(X_{sigma_n} = 0)` for `n = 1..=k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmaZeroEstimate {
    /// Index `n - 1` holds the estimate for `X_{sigma_n}`. Censored samples
    /// count as misses, so each value is a lower bound biased by at most
    /// the corresponding censoring rate.
    pub terms: Vec<Estimate>,
    /// Index `N - 1` estimates `sum_{n <= N} P(X_{sigma_n} = 0)`.
    pub partial_sums: Vec<Estimate>,
    pub censored: Vec<u64>,
    pub n_samples: u64,
    pub cap: u64,
}

impl SigmaZeroEstimate {
    pub fn censoring_rate(&self, n: usize) -> f64 {
        self.censored[n - 1] as f64 / self.n_samples as f64
    }
}

pub fn estimate_x_sigma_zero(
    env: &EnvironmentSpec,
    k: usize,
    n_samples: u64,
    cap: u64,
    master_seed: u64,
    group: u32,
) -> Result<SigmaZeroEstimate> {
    if k == 0 || n_samples < 2 {
        return Err(Error::InvalidArgument("need k >= 1 and at least two samples".into()));
    }
    let table = env.table(cap.min(1 << 16));
    let per_sample = parallel::map_indexed(n_samples, |i| {
        let mut rng = RngStream::new(master_seed, stream_id(tags::SIGMA, group, i as u32));
        sample_x_at_returns(&table, k, cap, &mut rng).0
    });
    let mut hits = vec![0u64; k];
    let mut censored = vec![0u64; k];
    let mut cum_sum = vec![0u64; k];
    let mut cum_sq = vec![0u64; k];
    for xs in &per_sample {
        let mut running = 0u64;
        for j in 0..k {
            match xs.get(j) {
                Some(0) => {
                    hits[j] += 1;
                    running += 1;
                }
                Some(_) => {}
                None => censored[j] += 1,
            }
            cum_sum[j] += running;
            cum_sq[j] += running * running;
        }
    }
    Ok(SigmaZeroEstimate {
        terms: hits.iter().map(|&h| Estimate::proportion(h, n_samples)).collect(),
        partial_sums: (0..k)
            .map(|j| Estimate::from_integer_moments(cum_sum[j] as i128, cum_sq[j] as u128, n_samples))
            .collect(),
        censored,
        n_samples,
        cap,
    })
}

/// Empirical frequencies of the complements of `A_{n,1}`, `A_{n,2}` and of `B_n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailFrequencies {
    /// `max_{k <= 2n} |Y_k| >= n^{1/2 + delta1}`.
    pub a1_complement: Estimate,
    /// `max_y eta_{2n-1}(y) >= n^{1/2 + delta2}`.
    pub a2_complement: Estimate,
    /// On `A_n`: `|Delta_{2n}| > n^{1/2 + delta3}`.
    pub b: Estimate,
}

#[derive(Debug, Clone, Copy)]
struct TailSample {
    max_abs_y: u64,
    max_eta: u64,
    delta: i64,
}

fn tail_sample(table: &EpsilonTable<'_>, n: u64, rng: &mut RngStream) -> TailSample {
    let len = 2 * n as usize;
    let mut eta = vec![0u64; 2 * len + 1];
    let mut y = 0i64;
    let mut max_abs_y = 0u64;
    let mut delta = 0i64;
    // k = 0..2n-1 contribute to eta_{2n-1} and Delta_{2n}
    for _ in 0..len {
        eta[(y + len as i64) as usize] += 1;
        delta += table.get(y);
        y += rng.rademacher();
        max_abs_y = max_abs_y.max(y.unsigned_abs());
    }
    TailSample {
        max_abs_y,
        max_eta: eta.iter().copied().max().unwrap_or(0),
        delta,
    }
}

pub fn tail_event_frequencies(
    env: &EnvironmentSpec,
    n: u64,
    deltas: [f64; 3],
    n_samples: u64,
    master_seed: u64,
) -> Result<TailFrequencies> {
    if deltas.iter().any(|&d| d <= 0.0 || !d.is_finite()) {
        return Err(Error::InvalidArgument("tail exponents must be positive".into()));
    }
    if n == 0 || n_samples < 2 {
        return Err(Error::InvalidArgument("need n >= 1 and at least two samples".into()));
    }
    let table = env.table(2 * n);
    let samples = parallel::map_indexed(n_samples, |i| {
        let mut rng = RngStream::new(master_seed, stream_id(tags::TAIL, 0, i as u32));
        tail_sample(&table, n, &mut rng)
    });
    Ok(tail_frequencies_from(&samples, n, deltas))
}

fn tail_frequencies_from(samples: &[TailSample], n: u64, deltas: [f64; 3]) -> TailFrequencies {
    let nf = n as f64;
    let thr = deltas.map(|d| nf.powf(0.5 + d));
    let (mut a1c, mut a2c, mut b) = (0u64, 0u64, 0u64);
    for s in samples {
        let out1 = s.max_abs_y as f64 >= thr[0];
        let out2 = s.max_eta as f64 >= thr[1];
        a1c += out1 as u64;
        a2c += out2 as u64;
        if !out1 && !out2 && s.delta.unsigned_abs() as f64 > thr[2] {
            b += 1;
        }
    }
    let m = samples.len() as u64;
    TailFrequencies {
        a1_complement: Estimate::proportion(a1c, m),
        a2_complement: Estimate::proportion(a2c, m),
        b: Estimate::proportion(b, m),
    }
}

/// `P(Y_{2n} = 0) = C(2n, n) / 4^n`, as the product `prod_{k<=n} (2k-1)/(2k)`.
pub fn exact_y_return_prob(n: u64) -> f64 {
    (1..=n).fold(1.0, |p, k| p * (2 * k - 1) as f64 / (2 * k) as f64)
}

/// Exact `P(Y_{2n} = 0)` as a reduced fraction, for `n <= 60`.
pub fn exact_y_return_prob_ratio(n: u64) -> Option<num_rational::Ratio<u128>> {
    if n > 60 {
        return None;
    }
    let mut binom: u128 = 1;
    for k in 0..n as u128 {
        // C(2n, k+1) = C(2n, k) (2n-k) / (k+1), exact at every stage
        binom = binom * (2 * n as u128 - k) / (k + 1);
    }
    Some(num_rational::Ratio::new(binom, 1u128 << (2 * n)))
}
