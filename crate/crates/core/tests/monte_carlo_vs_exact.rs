//! Monte Carlo estimators against exact and quadrature values.

use orwalk_core::analysis::{mc_series_o, prob_x_sigma_zero_h, prob_x_sigma_zero_l, TermValue, P, Q};
use orwalk_core::lattice::{EnvironmentSpec, Vertex};
use orwalk_core::oracle::{exact_distribution, exact_return_mass};
use orwalk_core::skeleton::estimate_x_sigma_zero;
use orwalk_core::walk::{empirical_law, estimate_return_stats};
use orwalk_core::Estimate;

fn z(count: u64, n: u64, p: f64) -> f64 {
    let est = Estimate::proportion(count, n);
    // standard error under the reference value avoids a zero denominator for unseen points
    (est.value - p) / (p * (1.0 - p) / n as f64).sqrt().max(1e-300)
}

#[test]
fn empirical_law_matches_exact_law() {
    let n = 8;
    let samples = 200_000;
    for env in [EnvironmentSpec::Alternate, EnvironmentSpec::HalfPlane, EnvironmentSpec::random(17)] {
        let exact = exact_distribution(&env, Vertex::ORIGIN, n).unwrap();
        let law = empirical_law(&env, n, samples, 99).unwrap();
        for v in exact.support() {
            let c = law.get(&v).copied().unwrap_or(0);
            let zz = z(c, samples, exact.probability_f64(v));
            assert!(zz.abs() <= 4.5, "{} at {v}: z = {zz}", env.kind_name());
        }
        assert!(law.keys().all(|v| exact.count(*v) > 0));
    }
}

#[test]
fn mean_returns_match_exact_mass() {
    let env = EnvironmentSpec::Alternate;
    let mass = exact_return_mass(&env, 12).unwrap();
    let stats = estimate_return_stats(&env, 12, 200_000, 5).unwrap();
    let expect = *mass.cumulative.numer() as f64 / *mass.cumulative.denom() as f64;
    assert!(stats.mean_returns.z_score(expect).abs() <= 4.0);
}

/// `P(NB_a = NB_b)` for independent negative binomials counting failures
/// before `a` (resp. `b`) successes with success probability `p`.
fn equal_negative_binomials(a: u64, b: u64) -> f64 {
    let pmf = |k: u64, limit: usize| -> Vec<f64> {
        let mut v = Vec::with_capacity(limit);
        let mut cur = P.powi(k as i32);
        for j in 0..limit as u64 {
            v.push(cur);
            cur *= (j + k) as f64 / (j + 1) as f64 * Q;
        }
        v
    };
    let limit = 60 + 4 * (a.max(b) as usize);
    pmf(a, limit).iter().zip(pmf(b, limit)).map(|(x, y)| x * y).sum()
}

/// Lower bound on `P(X_{sigma_n} = 0)` from every skeleton path with
/// `sigma_n <= max_len`, and the skeleton mass left out.
///
/// Each burst has law `P(xi = k) = p q^k`, so given the path `X_{sigma_n}`
/// is a difference of negative binomials with the numbers of bursts spent
/// on `+1` and `-1` rows as parameters.
fn enumerated_bracket(env: &EnvironmentSpec, n: usize, max_len: usize) -> (f64, f64) {
    use std::collections::HashMap;
    // state (level, bursts on + rows, bursts on - rows, returns so far)
    let mut frontier: HashMap<(i64, u64, u64, usize), f64> = HashMap::new();
    frontier.insert((0, 0, 0, 0), 1.0);
    let mut value = 0.0;
    let mut done = 0.0;
    for _ in 0..max_len {
        let mut next = HashMap::new();
        for (&(y, a, b, r), &w) in &frontier {
            let (a, b) = if env.epsilon(y).as_i64() > 0 { (a + 1, b) } else { (a, b + 1) };
            for dy in [-1i64, 1] {
                let ny = y + dy;
                if ny == 0 && r + 1 == n {
                    value += 0.5 * w * equal_negative_binomials(a, b);
                    done += 0.5 * w;
                } else {
                    let r2 = r + usize::from(ny == 0);
                    *next.entry((ny, a, b, r2)).or_insert(0.0) += 0.5 * w;
                }
            }
        }
        frontier = next;
    }
    (value, 1.0 - done)
}

#[test]
fn first_term_inside_enumeration_bracket() {
    for (env, exact) in [
        (EnvironmentSpec::Alternate, prob_x_sigma_zero_l(1).unwrap().value),
        (EnvironmentSpec::HalfPlane, prob_x_sigma_zero_h(1).unwrap().value),
    ] {
        for len in [32, 200] {
            let (lo, tail) = enumerated_bracket(&env, 1, len);
            assert!(lo <= exact + 1e-12 && exact <= lo + tail, "{} len {len}: {lo} + {tail} vs {exact}", env.kind_name());
        }
    }
}

#[test]
fn second_term_inside_enumeration_bracket() {
    let exact = prob_x_sigma_zero_l(2).unwrap().value;
    let (lo, tail) = enumerated_bracket(&EnvironmentSpec::Alternate, 2, 120);
    assert!(lo <= exact + 1e-12 && exact <= lo + tail);
}

#[test]
fn quadrature_terms_match_skeleton_monte_carlo() {
    let samples = 200_000;
    let cap = 1 << 20;
    for (env, f) in [
        (EnvironmentSpec::Alternate, prob_x_sigma_zero_l as fn(u64) -> orwalk_core::Result<TermValue>),
        (EnvironmentSpec::HalfPlane, prob_x_sigma_zero_h as fn(u64) -> orwalk_core::Result<TermValue>),
    ] {
        let mc = estimate_x_sigma_zero(&env, 3, samples, cap, 2024, 0).unwrap();
        for n in 1..=3 {
            let q = f(n as u64).unwrap().value;
            let zz = mc.terms[n - 1].z_score(q);
            assert!(zz.abs() <= 4.0, "{} n={n}: z = {zz}", env.kind_name());
            assert!(mc.censoring_rate(n) < 0.01);
        }
    }
}

#[test]
fn series_estimator_on_alternate_matches_quadrature() {
    let s = mc_series_o(&[EnvironmentSpec::Alternate], 4, 100_000, 1 << 20, 8).unwrap();
    for n in 1..=4 {
        let q = prob_x_sigma_zero_l(n as u64).unwrap().value;
        assert!(s.terms[n - 1].z_score(q).abs() <= 4.0);
        assert!(s.terms[n - 1].value >= 0.0 && s.terms[n - 1].value <= 1.0);
    }
    let total: f64 = (1..=4).map(|n| prob_x_sigma_zero_l(n).unwrap().value).sum();
    assert!(s.partial_sums[3].z_score(total).abs() <= 4.0);
}

#[test]
fn series_estimator_aborts_on_heavy_censoring() {
    let r = mc_series_o(&[EnvironmentSpec::random(1)], 50, 1000, 10, 0);
    assert!(matches!(r, Err(orwalk_core::Error::ExcessCensoring { .. })));
}
