//! Exact small-scale computations used to anchor the Monte Carlo estimators.
//!
//! The law of `M_n` is kept as integer path counts over the common
//! denominator `3^n`, so every probability is an exact rational.

use std::collections::BTreeMap;

use num_rational::Ratio;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::{EnvironmentSpec, Vertex};
use crate::rng::{stream_id, tags, RngStream};
use crate::skeleton;

pub const MAX_DP_STEPS: u64 = 30;
pub const MAX_EXCURSION_LEN: usize = 20;

/// Exact law of `M_n` as path counts over `3^n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparseDistribution {
    pub time: u64,
    pub start: Vertex,
    counts: BTreeMap<Vertex, u128>,
}

impl SparseDistribution {
    pub fn denominator(&self) -> u128 {
        3u128.pow(self.time as u32)
    }

    pub fn counts(&self) -> &BTreeMap<Vertex, u128> {
        &self.counts
    }

    pub fn count(&self, v: Vertex) -> u128 {
        self.counts.get(&v).copied().unwrap_or(0)
    }

    pub fn probability(&self, v: Vertex) -> Ratio<u128> {
        Ratio::new(self.count(v), self.denominator())
    }

    pub fn probability_f64(&self, v: Vertex) -> f64 {
        self.count(v) as f64 / self.denominator() as f64
    }

    pub fn support(&self) -> impl Iterator<Item = Vertex> + '_ {
        self.counts.keys().copied()
    }

    /// Sum of all masses; exactly one for a stochastic kernel.
    pub fn total(&self) -> Ratio<u128> {
        Ratio::new(self.counts.values().sum(), self.denominator())
    }

    /// Counts of the vertical coordinate.
    pub fn marginal_y(&self) -> BTreeMap<i64, u128> {
        let mut m = BTreeMap::new();
        for (v, c) in &self.counts {
            *m.entry(v.y).or_insert(0) += c;
        }
        m
    }
}

/// Law of `M_n` from `start` by `n` pushes of the transition kernel.
pub fn exact_distribution(env: &EnvironmentSpec, start: Vertex, n: u64) -> Result<SparseDistribution> {
    if n > MAX_DP_STEPS {
        return Err(Error::Budget { what: "dp steps", requested: n, limit: MAX_DP_STEPS });
    }
    let mut counts = BTreeMap::from([(start, 1u128)]);
    for _ in 0..n {
        let mut next = BTreeMap::new();
        for (&v, &c) in &counts {
            for u in env.out_neighbors(v)? {
                *next.entry(u).or_insert(0) += c;
            }
        }
        counts = next;
    }
    Ok(SparseDistribution { time: n, start, counts })
}

/// `P(M_n = origin)` for `n = 1..=max_n` and the cumulative sum.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnMass {
    pub per_step: Vec<(u64, Ratio<u128>)>,
    pub cumulative: Ratio<u128>,
}

pub fn exact_return_mass(env: &EnvironmentSpec, max_n: u64) -> Result<ReturnMass> {
    if max_n > MAX_DP_STEPS {
        return Err(Error::Budget { what: "dp steps", requested: max_n, limit: MAX_DP_STEPS });
    }
    let mut counts = BTreeMap::from([(Vertex::ORIGIN, 1u128)]);
    let mut per_step = Vec::with_capacity(max_n as usize);
    // common denominator 3^max_n; the sum stays below max_n * 3^max_n
    let mut cumulative_num: u128 = 0;
    for n in 1..=max_n {
        let mut next = BTreeMap::new();
        for (&v, &c) in &counts {
            for u in env.out_neighbors(v)? {
                *next.entry(u).or_insert(0) += c;
            }
        }
        counts = next;
        let at_origin = counts.get(&Vertex::ORIGIN).copied().unwrap_or(0);
        cumulative_num += at_origin * 3u128.pow((max_n - n) as u32);
        per_step.push((n, Ratio::new(at_origin, 3u128.pow(n as u32))));
    }
    Ok(ReturnMass {
        per_step,
        cumulative: Ratio::new(cumulative_num, 3u128.pow(max_n as u32)),
    })
}

/// A skeleton path `0, Y_1, ..., Y_{tau-1}, 0` with no interior zero.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Excursion {
    pub path: Vec<i64>,
}

impl Excursion {
    /// Length `tau`.
    pub fn len(&self) -> usize {
        self.path.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `+1` above the axis, `-1` below.
    pub fn sign(&self) -> i64 {
        self.path[1].signum()
    }

    /// `2^{-tau}`.
    pub fn probability(&self) -> Ratio<u128> {
        Ratio::new(1, 1u128 << self.len())
    }
}

/// All excursions of even length `2 <= tau <= max_len`, positive before negative within each length.
pub fn enumerate_excursions(max_len: usize) -> Result<Vec<Excursion>> {
    if max_len > MAX_EXCURSION_LEN {
        return Err(Error::Budget {
            what: "excursion length",
            requested: max_len as u64,
            limit: MAX_EXCURSION_LEN as u64,
        });
    }
    let mut out = Vec::new();
    for len in (2..=max_len).step_by(2) {
        let mut positive = Vec::new();
        let mut path = vec![0i64, 1];
        extend_positive(&mut path, len, &mut positive);
        let negative: Vec<Excursion> = positive
            .iter()
            .map(|e| Excursion { path: e.path.iter().map(|y| -y).collect() })
            .collect();
        out.extend(positive);
        out.extend(negative);
    }
    Ok(out)
}

fn extend_positive(path: &mut Vec<i64>, len: usize, out: &mut Vec<Excursion>) {
    let steps = path.len() - 1;
    let level = *path.last().unwrap();
    if steps == len {
        if level == 0 {
            out.push(Excursion { path: path.clone() });
        }
        return;
    }
    // must be able to come back down in the remaining steps
    if level as usize > len - steps {
        return;
    }
    for next in [level + 1, level - 1] {
        let last_step = steps + 1 == len;
        if next < 0 || (next == 0 && !last_step) {
            continue;
        }
        path.push(next);
        extend_positive(path, len, out);
        path.pop();
    }
}

/// Concatenation of excursions into a skeleton path.
pub fn concatenate(excursions: &[&Excursion]) -> Vec<i64> {
    let mut path = vec![0];
    for e in excursions {
        path.extend_from_slice(&e.path[1..]);
    }
    path
}

/// A random excursion of length at most `max_len`, by rejection.
pub fn random_excursion(max_len: usize, rng: &mut RngStream) -> Excursion {
    loop {
        let mut path = vec![0i64];
        let mut y = 0i64;
        while path.len() <= max_len {
            y += rng.rademacher();
            path.push(y);
            if y == 0 {
                return Excursion { path };
            }
        }
    }
}

/// Tally of a completed lemma check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct DeltaLemmaReport {
    pub excursions_checked: u64,
    pub pairs_checked: u64,
    pub random_checked: u64,
}

/// Budget of a lemma check: exhaustive single excursions up to `max_len`,
/// all pairs of total length up to `pair_total`, and `random_count` random
/// tuples of one to three excursions of length up to `random_max_len`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LemmaBudget {
    pub max_len: usize,
    pub pair_total: usize,
    pub random_count: u64,
    pub random_max_len: usize,
    pub seed: u64,
}

impl LemmaBudget {
    pub fn exhaustive(max_len: usize) -> Self {
        LemmaBudget {
            max_len,
            pair_total: max_len.min(12),
            random_count: 100_000,
            random_max_len: 200,
            seed: 0,
        }
    }
}

fn check_delta_lemma(
    env: &EnvironmentSpec,
    budget: LemmaBudget,
    expected: impl Fn(&[&Excursion]) -> i64,
) -> Result<DeltaLemmaReport> {
    let excursions = enumerate_excursions(budget.max_len.max(budget.pair_total))?;
    let check = |tuple: &[&Excursion]| -> Result<()> {
        let path = concatenate(tuple);
        let got = skeleton::delta_at_sigma(env, &path, tuple.len())?;
        let want = expected(tuple);
        if got != want {
            return Err(Error::Counterexample(format!(
                "path {path:?}: Delta at return {} is {got}, expected {want}",
                tuple.len()
            )));
        }
        Ok(())
    };
    let mut report = DeltaLemmaReport { excursions_checked: 0, pairs_checked: 0, random_checked: 0 };
    for e in excursions.iter().filter(|e| e.len() <= budget.max_len) {
        check(&[e])?;
        report.excursions_checked += 1;
    }
    for a in &excursions {
        for b in &excursions {
            if a.len() + b.len() <= budget.pair_total {
                check(&[a, b])?;
                report.pairs_checked += 1;
            }
        }
    }
    for i in 0..budget.random_count {
        let mut rng = RngStream::new(budget.seed, stream_id(tags::EXCURSION, 0, i as u32));
        let k = 1 + rng.below(3) as usize;
        let tuple: Vec<Excursion> = (0..k).map(|_| random_excursion(budget.random_max_len, &mut rng)).collect();
        check(&tuple.iter().collect::<Vec<_>>())?;
        report.random_checked += 1;
    }
    Ok(report)
}

/// `Delta_{sigma_n} = 0` on the alternate lattice.
pub fn verify_delta_lemma_alternate(budget: LemmaBudget) -> Result<DeltaLemmaReport> {
    check_delta_lemma(&EnvironmentSpec::Alternate, budget, |_| 0)
}

/// `Delta_{sigma_n} = sum_k rho_k (tau_k - 1) + n` on the half-plane lattice,
/// with `rho_k` the sign and `tau_k` the length of the `k`-th excursion.
pub fn verify_delta_lemma_half_plane(budget: LemmaBudget) -> Result<DeltaLemmaReport> {
    check_delta_lemma(&EnvironmentSpec::HalfPlane, budget, |tuple| {
        tuple.iter().map(|e| e.sign() * (e.len() as i64 - 1)).sum::<i64>() + tuple.len() as i64
    })
}

/// Renders a fraction as `num/den`.
pub fn format_ratio(r: &Ratio<u128>) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn catalan(n: u128) -> u128 {
        // C(2n, n) / (n + 1)
        let mut c: u128 = 1;
        for k in 0..n {
            c = c * (2 * n - k) / (k + 1);
        }
        c / (n + 1)
    }

    #[test]
    fn one_step_law() {
        let d = exact_distribution(&EnvironmentSpec::Alternate, Vertex::ORIGIN, 1).unwrap();
        let third = Ratio::new(1, 3);
        assert_eq!(d.probability(Vertex::new(0, 1)), third);
        assert_eq!(d.probability(Vertex::new(0, -1)), third);
        assert_eq!(d.probability(Vertex::new(1, 0)), third);
        assert_eq!(d.support().count(), 3);
    }

    #[test]
    fn two_step_origin_mass() {
        // of the 9 two-step paths, up-down and down-up return
        let d = exact_distribution(&EnvironmentSpec::Alternate, Vertex::ORIGIN, 2).unwrap();
        assert_eq!(d.probability(Vertex::ORIGIN), Ratio::new(2, 9));
        assert_eq!(format_ratio(&d.probability(Vertex::ORIGIN)), "2/9");
    }

    #[test]
    fn mass_is_exactly_one() {
        for env in [EnvironmentSpec::Alternate, EnvironmentSpec::HalfPlane, EnvironmentSpec::random(8)] {
            for n in 0..=12 {
                let d = exact_distribution(&env, Vertex::new(3, -4), n).unwrap();
                assert_eq!(d.total(), Ratio::from_integer(1));
                assert!(d.support().all(|v| v.l1_distance(Vertex::new(3, -4)) <= n));
            }
        }
    }

    #[test]
    fn vertical_marginal_is_lazy_walk() {
        // count(j) = sum_m C(n, m) * C(m, (m + j) / 2): m vertical moves, each of
        // the other n - m moves horizontal with a single choice
        let binom = |n: u128, k: u128| -> u128 {
            let mut c = 1u128;
            for i in 0..k {
                c = c * (n - i) / (i + 1);
            }
            c
        };
        for env in [EnvironmentSpec::Alternate, EnvironmentSpec::HalfPlane, EnvironmentSpec::random(3)] {
            let n = 14u128;
            let d = exact_distribution(&env, Vertex::ORIGIN, n as u64).unwrap();
            for (j, c) in d.marginal_y() {
                let expect: u128 = (0..=n)
                    .filter(|m| (m + j.unsigned_abs() as u128) % 2 == 0 && j.unsigned_abs() as u128 <= *m)
                    .map(|m| binom(n, m) * binom(m, (m + j.unsigned_abs() as u128) / 2))
                    .sum();
                assert_eq!(c, expect, "level {j}");
            }
        }
    }

    #[test]
    fn budget_enforced() {
        assert!(matches!(
            exact_distribution(&EnvironmentSpec::Alternate, Vertex::ORIGIN, 31),
            Err(Error::Budget { .. })
        ));
        assert!(exact_return_mass(&EnvironmentSpec::Alternate, 31).is_err());
        assert!(enumerate_excursions(22).is_err());
    }

    #[test]
    fn return_mass_parity_and_contrast() {
        let l = exact_return_mass(&EnvironmentSpec::Alternate, 20).unwrap();
        let h = exact_return_mass(&EnvironmentSpec::HalfPlane, 20).unwrap();
        for (n, p) in &l.per_step {
            if n % 2 == 1 {
                assert_eq!(*p, Ratio::from_integer(0));
            }
        }
        assert_eq!(l.per_step[1].1, Ratio::new(2, 9));
        assert!(l.cumulative > h.cumulative);
        let sum: Ratio<u128> = l.per_step.iter().map(|(_, p)| *p).sum();
        assert_eq!(sum, l.cumulative);
    }

    #[test]
    fn shortest_excursions() {
        let e = enumerate_excursions(2).unwrap();
        let paths: Vec<_> = e.iter().map(|e| e.path.clone()).collect();
        assert_eq!(paths, vec![vec![0, 1, 0], vec![0, -1, 0]]);
    }

    #[test]
    fn excursion_counts_are_catalan() {
        let all = enumerate_excursions(16).unwrap();
        for k in 1..=8usize {
            let count = all.iter().filter(|e| e.len() == 2 * k).count() as u128;
            assert_eq!(count, 2 * catalan(k as u128 - 1), "length {}", 2 * k);
        }
        assert_eq!(all.iter().filter(|e| e.len() == 4).count(), 2);
        for e in &all {
            assert!(e.path[1..e.len()].iter().all(|&y| y != 0));
            assert!(e.path.windows(2).all(|w| (w[1] - w[0]).abs() == 1));
        }
    }

    #[test]
    fn excursion_mass_matches_first_return_law() {
        // P(sigma_1 <= 2K) = 1 - P(Y_{2K} = 0)
        for max_len in [2usize, 8, 16, 20] {
            let total: Ratio<u128> = enumerate_excursions(max_len).unwrap().iter().map(|e| e.probability()).sum();
            let tail = skeleton::exact_y_return_prob_ratio(max_len as u64 / 2).unwrap();
            assert_eq!(total, Ratio::from_integer(1) - tail);
        }
    }

    #[test]
    fn lemma_checks_small() {
        let b = LemmaBudget { max_len: 2, pair_total: 4, random_count: 0, random_max_len: 10, seed: 0 };
        let r = verify_delta_lemma_alternate(b).unwrap();
        assert_eq!(r.excursions_checked, 2);
        assert_eq!(r.pairs_checked, 4);
        verify_delta_lemma_half_plane(b).unwrap();
    }

    #[test]
    fn lemma_counterexample_is_reported() {
        // the alternate identity fails on the half-plane lattice
        let b = LemmaBudget { max_len: 2, pair_total: 0, random_count: 0, random_max_len: 10, seed: 0 };
        let err = check_delta_lemma(&EnvironmentSpec::HalfPlane, b, |_| 0).unwrap_err();
        assert!(matches!(err, Error::Counterexample(ref s) if s.contains("[0, 1, 0]")));
    }

    #[test]
    fn half_plane_hand_cases() {
        let h = EnvironmentSpec::HalfPlane;
        assert_eq!(skeleton::delta_at_sigma(&h, &[0, 1, 0], 1).unwrap(), 2);
        assert_eq!(skeleton::delta_at_sigma(&h, &[0, -1, 0], 1).unwrap(), 0);
    }
}
