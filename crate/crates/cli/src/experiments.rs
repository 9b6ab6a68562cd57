//! The named experiments.

use orwalk_core::analysis::{self, SeriesDiagnostic, SeriesKind};
use orwalk_core::expansions::{self, BoxSpec, Boundary, WeightedGraph};
use orwalk_core::lattice::{EnvironmentSpec, Vertex};
use orwalk_core::oracle::{self, LemmaBudget};
use orwalk_core::rng::{stream_id, tags, RngStream};
use orwalk_core::skeleton::{self, SkeletonTrace};
use orwalk_core::walk::{self, EnsembleStats};
use orwalk_core::{parallel, Error, Estimate};
use serde_json::json;

use crate::config::{EffectiveConfig, Experiment};
use crate::output::{Check, RunOutput, Statistic, Table};
use crate::CliError;

/// Largest number of trajectory points `simulate` will write.
pub const MAX_SIMULATE_POINTS: u64 = 10_000_000;

pub fn run(cfg: &EffectiveConfig) -> Result<RunOutput, CliError> {
    progress(&format!("running {}", cfg.experiment));
    match cfg.experiment {
        Experiment::Simulate => simulate(cfg),
        Experiment::Returns | Experiment::Speed => returns(cfg),
        Experiment::SkeletonCheck => skeleton_check(cfg),
        Experiment::DeltaLemmas => delta_lemmas(cfg),
        Experiment::SeriesL => series(cfg, SeriesKind::Alternate),
        Experiment::SeriesH => series(cfg, SeriesKind::HalfPlane),
        Experiment::SeriesO => series_o(cfg),
        Experiment::TailEvents => tail_events(cfg),
        Experiment::DpOracle => dp_oracle(cfg),
        Experiment::GreenCheck => green_check(cfg),
        Experiment::ResolventCheck => resolvent_check(cfg),
    }
}

fn progress(msg: &str) {
    eprintln!("[orwalk] {msg}");
}

/// Shortest round-trip rendering of a float.
pub fn num(x: f64) -> String {
    format!("{x:?}")
}

fn output(data: Table, statistics: Vec<Statistic>, summary: serde_json::Value, checks: Vec<Check>, headline: String) -> RunOutput {
    RunOutput { data, statistics, summary, checks, headline }
}

fn simulate(cfg: &EffectiveConfig) -> Result<RunOutput, CliError> {
    let points = cfg.n_samples.saturating_mul(cfg.n + 1);
    if points > MAX_SIMULATE_POINTS {
        return Err(Error::Budget { what: "trajectory points", requested: points, limit: MAX_SIMULATE_POINTS }.into());
    }
    let trajs = parallel::try_map_indexed(cfg.n_samples, |i| {
        let mut rng = RngStream::new(cfg.seed, stream_id(tags::WALK, 0, i as u32));
        walk::simulate(&cfg.env, Vertex::ORIGIN, cfg.n, &mut rng)
    })?;
    let mut data = Table::new(&["sample", "step", "x", "y"]);
    let mut adjacent = true;
    let mut abs_x = Vec::with_capacity(trajs.len());
    for (i, t) in trajs.iter().enumerate() {
        adjacent &= t.is_adjacent(&cfg.env);
        for k in 0..=t.len() {
            let v = t.position(k);
            data.push(vec![i.to_string(), k.to_string(), v.x.to_string(), v.y.to_string()]);
        }
        abs_x.push(t.end().x.unsigned_abs() as f64);
    }
    let mean = Estimate::from_samples(&abs_x);
    Ok(output(
        data,
        vec![Statistic::estimate(format!("abs_x@{}", cfg.n), &mean)],
        json!({ "trajectories": cfg.n_samples, "steps": cfg.n }),
        vec![Check::new("adjacency", adjacent, "every step goes to an out-neighbour")],
        format!("{} trajectories of {} steps", cfg.n_samples, cfg.n),
    ))
}

fn returns(cfg: &EffectiveConfig) -> Result<RunOutput, CliError> {
    let envs = cfg.environments();
    progress(&format!(
        "{} environment(s) x {} walkers up to {}",
        envs.len(),
        cfg.n_samples,
        cfg.horizons.last().copied().unwrap_or(0)
    ));
    let stats: EnsembleStats = walk::ensemble_stats(&envs, &cfg.horizons, cfg.n_samples, cfg.seed)?;
    let mut data = Table::new(&[
        "checkpoint",
        "mean_returns",
        "mean_returns_se",
        "fraction_returned",
        "fraction_returned_se",
        "speed",
        "speed_se",
    ]);
    let mut statistics = Vec::new();
    for c in &stats.checkpoints {
        data.push(vec![
            c.checkpoint.to_string(),
            num(c.mean_returns.value),
            num(c.mean_returns.std_error),
            num(c.fraction_returned.value),
            num(c.fraction_returned.std_error),
            num(c.speed.value),
            num(c.speed.std_error),
        ]);
        statistics.push(Statistic::estimate(format!("mean_returns@{}", c.checkpoint), &c.mean_returns));
        statistics.push(Statistic::estimate(format!("fraction_returned@{}", c.checkpoint), &c.fraction_returned));
        statistics.push(Statistic::estimate(format!("speed@{}", c.checkpoint), &c.speed));
    }
    let cps = &stats.checkpoints;
    let mut checks = Vec::new();
    if cps.len() >= 2 {
        let (prev, last) = (&cps[cps.len() - 2], &cps[cps.len() - 1]);
        let increase = last.mean_returns.value - prev.mean_returns.value;
        if let Some(&tol) = cfg.tolerances.get("max_return_increase") {
            checks.push(Check::new(
                "return_increase_below",
                increase < tol,
                format!("mean returns {} -> {}: increase {increase:.4} (limit < {tol})", prev.checkpoint, last.checkpoint),
            ));
        }
        if let Some(&tol) = cfg.tolerances.get("min_return_increase") {
            checks.push(Check::new(
                "return_increase_above",
                increase > tol,
                format!("mean returns {} -> {}: increase {increase:.4} (limit > {tol})", prev.checkpoint, last.checkpoint),
            ));
        }
        if let Some(&tol) = cfg.tolerances.get("max_speed_ratio") {
            let ratio = last.speed.value / cps[0].speed.value;
            checks.push(Check::new(
                "speed_ratio",
                ratio <= tol,
                format!("speed at {} / speed at {} = {ratio:.4} (limit <= {tol})", last.checkpoint, cps[0].checkpoint),
            ));
        }
    }
    if let (Some(&tol), Some(last)) = (cfg.tolerances.get("max_speed"), cps.last()) {
        checks.push(Check::new(
            "speed_below",
            last.speed.value < tol,
            format!("speed at {} = {:.5} (limit < {tol})", last.checkpoint, last.speed.value),
        ));
    }
    let headline = match cps.last() {
        Some(c) => format!(
            "at {}: mean returns {:.4} +- {:.4}, speed {:.5}",
            c.checkpoint, c.mean_returns.value, c.mean_returns.std_error, c.speed.value
        ),
        None => "no checkpoints".into(),
    };
    Ok(output(
        data,
        statistics,
        json!({ "n_envs": stats.n_envs, "walkers_per_env": stats.walkers_per_env }),
        checks,
        headline,
    ))
}

fn skeleton_check(cfg: &EffectiveConfig) -> Result<RunOutput, CliError> {
    let envs = cfg.environments();
    let mut data = Table::new(&["env", "walks", "skeleton_steps", "coupling_failures", "max_walk_length"]);
    let mut checks = Vec::new();
    let mut statistics = Vec::new();
    for (j, env) in envs.iter().enumerate() {
        let results = parallel::try_map_indexed(cfg.n_samples, |i| {
            let mut rng = RngStream::new(cfg.seed, stream_id(tags::SKELETON, j as u32, i as u32));
            let trace = SkeletonTrace::sample(env, cfg.n, &mut rng)?;
            Ok::<_, Error>((trace.coupling_holds(env)?, *trace.t.last().unwrap()))
        })?;
        let failures = results.iter().filter(|r| !r.0).count();
        let max_len = results.iter().map(|r| r.1).max().unwrap_or(0);
        data.push(vec![
            env.kind_name().to_string(),
            cfg.n_samples.to_string(),
            cfg.n.to_string(),
            failures.to_string(),
            max_len.to_string(),
        ]);
        statistics.push(Statistic::exact(format!("coupling_failures[{j}]"), failures as f64));
        checks.push(Check::new(
            format!("coupling[{}]", env.kind_name()),
            failures == 0,
            format!("{failures} of {} reconstructed walks violate M_T = (X, Y)", cfg.n_samples),
        ));
    }
    let ok = checks.iter().all(|c| c.passed);
    Ok(output(
        data,
        statistics,
        json!({ "walks_per_env": cfg.n_samples, "skeleton_steps": cfg.n }),
        checks,
        if ok { "coupling holds on every walk".into() } else { "coupling violated".into() },
    ))
}

fn delta_lemmas(cfg: &EffectiveConfig) -> Result<RunOutput, CliError> {
    let budget = LemmaBudget {
        max_len: cfg.max_len as usize,
        pair_total: (cfg.max_len as usize).min(12),
        random_count: cfg.n_samples,
        random_max_len: cfg.n as usize,
        seed: cfg.seed,
    };
    let mut data = Table::new(&["lemma", "excursions_checked", "pairs_checked", "random_checked", "status"]);
    let mut checks = Vec::new();
    let lemmas: [(&str, fn(LemmaBudget) -> orwalk_core::Result<oracle::DeltaLemmaReport>); 2] = [
        ("alternate", oracle::verify_delta_lemma_alternate),
        ("half-plane", oracle::verify_delta_lemma_half_plane),
    ];
    for (name, verify) in lemmas {
        progress(&format!("checking {name} lemma"));
        match verify(budget) {
            Ok(r) => {
                data.push(vec![
                    name.into(),
                    r.excursions_checked.to_string(),
                    r.pairs_checked.to_string(),
                    r.random_checked.to_string(),
                    "pass".into(),
                ]);
                checks.push(Check::new(
                    name,
                    true,
                    format!(
                        "{} excursions, {} pairs, {} random tuples",
                        r.excursions_checked, r.pairs_checked, r.random_checked
                    ),
                ));
            }
            Err(Error::Counterexample(msg)) => {
                data.push(vec![name.into(), String::new(), String::new(), String::new(), "fail".into()]);
                checks.push(Check::new(name, false, msg));
            }
            Err(e) => return Err(e.into()),
        }
    }
    let ok = checks.iter().all(|c| c.passed);
    Ok(output(
        data,
        Vec::new(),
        json!({
            "max_len": budget.max_len,
            "pair_total": budget.pair_total,
            "random_count": budget.random_count,
            "random_max_len": budget.random_max_len,
        }),
        checks,
        if ok { "all excursions pass".into() } else { "counterexample found".into() },
    ))
}

fn series_table(d: &SeriesDiagnostic) -> Table {
    let mut data = Table::new(&["n", "term", "partial_sum", "quadrature_error"]);
    for (t, s) in d.terms.iter().zip(&d.partial_sums) {
        data.push(vec![t.n.to_string(), num(t.value), num(*s), num(t.quad_error)]);
    }
    data
}

fn series_statistics(d: &SeriesDiagnostic) -> Vec<Statistic> {
    let mut out = Vec::new();
    for inc in &d.increments {
        out.push(Statistic::exact(format!("partial_sum@{}", inc.n), d.partial_sum(inc.n)));
        out.push(Statistic::exact(format!("increment@{}", inc.n), inc.increment));
    }
    out
}

/// Skeleton Monte Carlo for the first three terms, compared with the quadrature.
fn mc_term_checks(
    cfg: &EffectiveConfig,
    env: &EnvironmentSpec,
    d: &SeriesDiagnostic,
    statistics: &mut Vec<Statistic>,
    checks: &mut Vec<Check>,
) -> Result<serde_json::Value, CliError> {
    let k = 3.min(d.terms.len());
    progress(&format!("skeleton Monte Carlo: {} samples, cap {}", cfg.n_samples, cfg.cap));
    let mc = skeleton::estimate_x_sigma_zero(env, k, cfg.n_samples, cfg.cap, cfg.seed, 0)?;
    let z_tol = cfg.tolerance("z")?;
    let mut rows = Vec::new();
    for n in 1..=k {
        let est = mc.terms[n - 1];
        let q = d.terms[n - 1].value;
        let z = est.z_score(q);
        let censoring = mc.censoring_rate(n);
        statistics.push(Statistic::estimate(format!("mc_term@{n}"), &est));
        checks.push(Check::new(
            format!("mc_term_{n}"),
            z.abs() <= z_tol,
            format!(
                "quadrature {q:.6}, Monte Carlo {:.6} +- {:.6}, z = {z:.2}, censored {censoring:.2e}",
                est.value, est.std_error
            ),
        ));
        rows.push(json!({ "n": n, "quadrature": q, "monte_carlo": est, "z": z, "censoring_rate": censoring }));
    }
    Ok(json!({ "samples": cfg.n_samples, "cap": cfg.cap, "terms": rows }))
}

fn series(cfg: &EffectiveConfig, kind: SeriesKind) -> Result<RunOutput, CliError> {
    let tol = cfg.tolerance("term")?;
    progress(&format!("{} terms at tolerance {tol:e}", cfg.n));
    let d = analysis::partial_sum(kind, cfg.n, tol)?;
    let mut statistics = series_statistics(&d);
    let mut checks = Vec::new();
    let mut summary = json!({
        "kind": kind,
        "terms": cfg.n,
        "term_tolerance": tol,
        "total_quadrature_error": d.total_quad_error,
        "increments": d.increments,
    });
    let headline;
    match kind {
        SeriesKind::Alternate => {
            let lo = cfg.horizons.first().copied().unwrap_or(1);
            let hi = cfg.horizons.last().copied().unwrap_or(cfg.n / 2);
            let v = d.divergence_verdict(lo, hi, cfg.tolerance("min_increment")?, cfg.tolerance("max_spread")?);
            checks.push(Check::new(
                "divergence",
                v.holds,
                format!(
                    "increments over N in [{lo}, {hi}] lie in [{:.5}, {:.5}], relative spread {:.4}",
                    v.min_increment, v.max_increment, v.relative_spread
                ),
            ));
            summary["verdict"] = json!({
                "type": "divergence",
                "statement": "increments bounded away from 0 over the tested dyadic range",
                "range": [lo, hi],
                "holds": v.holds,
                "min_increment": v.min_increment,
                "max_increment": v.max_increment,
                "relative_spread": v.relative_spread,
            });
            headline = format!("min increment {:.5} over [{lo}, {hi}]", v.min_increment);
        }
        SeriesKind::HalfPlane => {
            let from = cfg.horizons.first().copied().unwrap_or(1);
            let cauchy = cfg.tolerance("cauchy")?;
            let tested: Vec<_> = d.increments_in(from, u64::MAX).collect();
            let worst = tested.iter().map(|i| i.increment.abs()).fold(0.0, f64::max);
            let holds = !tested.is_empty() && worst < cauchy;
            let n0 = d.cauchy_threshold(cauchy);
            let n0_text = n0.map_or("none within range".to_string(), |n| n.to_string());
            let detail = if tested.is_empty() {
                format!("no increment with N >= {from} fits in {} terms", cfg.n)
            } else {
                format!(
                    "largest |S_2N - S_N| for N >= {from} is {worst:.3e} (limit {cauchy:e}); first N from which all increments are below: {n0_text}"
                )
            };
            checks.push(Check::new("cauchy", holds, detail));
            progress(&format!("refining quadrature to {:.0e}", tol / 10.0));
            let fine = analysis::partial_sum(kind, cfg.n, tol / 10.0)?;
            let (r1, r2) = (d.richardson_limit(), fine.richardson_limit());
            let rtol = cfg.tolerance("richardson")?;
            let stable = matches!((r1, r2), (Some(a), Some(b)) if a.is_finite() && b.is_finite() && (a - b).abs() <= rtol);
            checks.push(Check::new(
                "richardson",
                stable,
                format!("extrapolated limits {r1:?} and {r2:?} at tolerances {tol:.0e} and {:.0e}", tol / 10.0),
            ));
            if let Some(r) = r1 {
                statistics.push(Statistic::exact("richardson_limit", r));
            }
            summary["verdict"] = json!({
                "type": "cauchy",
                "statement": "Cauchy within tolerance",
                "from": from,
                "tolerance": cauchy,
                "holds": holds,
                "largest_increment": worst,
                "n0": n0,
                "richardson_limits": [r1, r2],
            });
            headline = format!(
                "N0 = {}, extrapolated sum {}",
                n0.map_or("none".to_string(), |n| n.to_string()),
                r1.map_or("n/a".to_string(), |r| format!("{r:.6}"))
            );
        }
    }
    if cfg.n_samples > 0 {
        let env = match kind {
            SeriesKind::Alternate => EnvironmentSpec::Alternate,
            SeriesKind::HalfPlane => EnvironmentSpec::HalfPlane,
        };
        summary["monte_carlo"] = mc_term_checks(cfg, &env, &d, &mut statistics, &mut checks)?;
    }
    Ok(output(series_table(&d), statistics, summary, checks, headline))
}

fn series_o(cfg: &EffectiveConfig) -> Result<RunOutput, CliError> {
    let envs = cfg.environments();
    progress(&format!("{} environment(s) x {} samples, {} terms", envs.len(), cfg.n_samples, cfg.n));
    let s = analysis::mc_series_o(&envs, cfg.n as usize, cfg.n_samples, cfg.cap, cfg.seed)?;
    let mut data = Table::new(&["n", "term", "std_error", "partial_sum", "partial_sum_se", "censoring"]);
    let mut statistics = Vec::new();
    for i in 0..s.n_terms {
        let (t, p) = (&s.terms[i], &s.partial_sums[i]);
        data.push(vec![
            (i + 1).to_string(),
            num(t.value),
            num(t.std_error),
            num(p.value),
            num(p.std_error),
            num(s.censoring[i]),
        ]);
        statistics.push(Statistic::estimate(format!("term@{}", i + 1), t));
        statistics.push(Statistic::estimate(format!("partial_sum@{}", i + 1), p));
    }
    let mut checks = vec![Check::new(
        "terms_are_probabilities",
        s.terms.iter().all(|t| (0.0..=1.0).contains(&t.value)),
        "every term estimate lies in [0, 1]",
    )];
    if s.n_terms >= 2 {
        let slope = trend_slope(&s.terms.iter().map(|t| t.value).collect::<Vec<_>>());
        checks.push(Check::new(
            "terms_decrease",
            slope < 0.0,
            format!("least-squares slope of term against n is {slope:.3e}"),
        ));
    }
    if envs == [EnvironmentSpec::Alternate] {
        let z_tol = cfg.tolerances.get("z").copied().unwrap_or(4.0);
        for (i, t) in s.terms.iter().enumerate().take(s.n_terms.min(10)) {
            let q = analysis::prob_x_sigma_zero_l(i as u64 + 1)?.value;
            let z = t.z_score(q);
            checks.push(Check::new(
                format!("matches_quadrature_{}", i + 1),
                z.abs() <= z_tol,
                format!("Monte Carlo {:.6} vs quadrature {q:.6}: z = {z:.2}", t.value),
            ));
        }
    }
    let max_censoring = s.censoring.iter().copied().fold(0.0, f64::max);
    Ok(output(
        data,
        statistics,
        json!({
            "n_envs": envs.len(),
            "samples_per_env": s.samples_per_env,
            "cap": s.cap,
            "max_censoring_rate": max_censoring,
        }),
        checks,
        format!(
            "S_{} = {:.4} +- {:.4}, max censoring {max_censoring:.3}",
            s.n_terms,
            s.partial_sums.last().map_or(0.0, |p| p.value),
            s.partial_sums.last().map_or(0.0, |p| p.std_error)
        ),
    ))
}

/// Ordinary least-squares slope of `ys` against `1..=len`.
fn trend_slope(ys: &[f64]) -> f64 {
    let n = ys.len() as f64;
    let mx = (n + 1.0) / 2.0;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, y) in ys.iter().enumerate() {
        let dx = i as f64 + 1.0 - mx;
        sxy += dx * (y - my);
        sxx += dx * dx;
    }
    sxy / sxx
}

fn tail_events(cfg: &EffectiveConfig) -> Result<RunOutput, CliError> {
    let deltas = [cfg.tolerance("delta1")?, cfg.tolerance("delta2")?, cfg.tolerance("delta3")?];
    let limit = cfg.tolerance("max_frequency")?;
    if cfg.horizons.is_empty() {
        return Err(CliError::Config("tail-events needs at least one horizon".into()));
    }
    let mut data = Table::new(&["n", "event", "frequency", "std_error"]);
    let mut statistics = Vec::new();
    let mut per_horizon = Vec::new();
    for &n in &cfg.horizons {
        progress(&format!("tail events at n = {n}"));
        let f = skeleton::tail_event_frequencies(&cfg.env, n, deltas, cfg.n_samples, cfg.seed)?;
        let events = [("A1_complement", f.a1_complement), ("A2_complement", f.a2_complement), ("B", f.b)];
        for (name, e) in events {
            data.push(vec![n.to_string(), name.into(), num(e.value), num(e.std_error)]);
            statistics.push(Statistic::estimate(format!("{name}@{n}"), &e));
        }
        per_horizon.push((n, events));
    }
    let mut checks = Vec::new();
    let (n0, first) = per_horizon[0];
    for (name, e) in first {
        checks.push(Check::new(
            format!("{name}_small"),
            e.value < limit,
            format!("P({name}) at n = {n0} is {:.4} +- {:.4} (limit < {limit})", e.value, e.std_error),
        ));
    }
    if per_horizon.len() >= 2 {
        let (n1, last) = per_horizon[per_horizon.len() - 1];
        for ((name, a), (_, b)) in first.iter().zip(last.iter()) {
            checks.push(Check::new(
                format!("{name}_decreases"),
                b.value < a.value || (a.value == 0.0 && b.value == 0.0),
                format!("P({name}) {:.4} at n = {n0} -> {:.4} at n = {n1}", a.value, b.value),
            ));
        }
    }
    Ok(output(
        data,
        statistics,
        json!({ "deltas": deltas, "samples": cfg.n_samples, "env": cfg.env.kind_name() }),
        checks,
        format!("tail events over {} horizon(s)", per_horizon.len()),
    ))
}

fn dp_oracle(cfg: &EffectiveConfig) -> Result<RunOutput, CliError> {
    let d = oracle::exact_distribution(&cfg.env, Vertex::ORIGIN, cfg.n)?;
    let mut data = Table::new(&["x", "y", "probability", "probability_f64"]);
    for v in d.support() {
        data.push(vec![
            v.x.to_string(),
            v.y.to_string(),
            oracle::format_ratio(&d.probability(v)),
            num(d.probability_f64(v)),
        ]);
    }
    let total = d.total();
    let mut statistics = Vec::new();
    let origin = d.probability(Vertex::ORIGIN);
    statistics.push(Statistic::exact(format!("origin_mass@{}", cfg.n), d.probability_f64(Vertex::ORIGIN)));
    if cfg.n >= 1 {
        let mass = oracle::exact_return_mass(&cfg.env, cfg.n)?;
        let c = mass.cumulative;
        statistics.push(Statistic::exact(
            format!("mean_returns@{}", cfg.n),
            *c.numer() as f64 / *c.denom() as f64,
        ));
    }
    Ok(output(
        data,
        statistics,
        json!({
            "n": cfg.n,
            "denominator": d.denominator().to_string(),
            "origin_mass": oracle::format_ratio(&origin),
            "total_mass": oracle::format_ratio(&total),
        }),
        vec![Check::new(
            "mass_conserved",
            *total.numer() == *total.denom(),
            format!("total mass {}", oracle::format_ratio(&total)),
        )],
        format!("P(M_{} = origin) = {}", cfg.n, oracle::format_ratio(&origin)),
    ))
}

fn green_check(cfg: &EffectiveConfig) -> Result<RunOutput, CliError> {
    let agree = cfg.tolerance("agreement")?;
    let closed_tol = cfg.tolerance("closed_form")?;
    let mut data = Table::new(&["instance", "method", "value", "tail_bound", "error_vs_direct"]);
    let mut checks = Vec::new();
    let mut statistics = Vec::new();
    for d in [1usize, 2] {
        for m in [0.5, 1.0] {
            // the path tail and the solver share the error budget
            let len = expansions::green_len_for_tolerance(d, m, agree / 10.0);
            let b = BoxSpec::new(d, len + 1, m, Boundary::Dirichlet)?;
            let origin = vec![0i64; d];
            let mut e1 = origin.clone();
            e1[0] = 1;
            for (label, y) in [("0", &origin), ("e1", &e1)] {
                let instance = format!("d={d},m={m},x=0,y={label}");
                progress(&format!("green function {instance}"));
                let direct = expansions::laplacian_green_direct(&b, &origin, y, agree / 100.0)?;
                let path = expansions::laplacian_green_path_sum(&b, &origin, y, len)?;
                let err = (path.value - direct.value).abs();
                data.push(vec![instance.clone(), "direct".into(), num(direct.value), num(direct.solver_error), num(0.0)]);
                data.push(vec![instance.clone(), "path_sum".into(), num(path.value), num(path.tail_bound), num(err)]);
                statistics.push(Statistic::exact(format!("green[{instance}]"), direct.value));
                checks.push(Check::new(
                    format!("agreement[{instance}]"),
                    err <= agree && err <= path.tail_bound + direct.solver_error,
                    format!(
                        "|path - direct| = {err:.2e} at length {len} (tail bound {:.2e}, limit {agree:e})",
                        path.tail_bound
                    ),
                ));
                if d == 1 && m == 1.0 && label == "0" {
                    let exact = 1.0 / 5f64.sqrt();
                    let e = (direct.value - exact).abs();
                    data.push(vec![instance.clone(), "closed_form".into(), num(exact), num(0.0), num(e)]);
                    checks.push(Check::new(
                        "closed_form[d=1,m=1]",
                        e <= closed_tol,
                        format!("|G(0,0) - 1/sqrt(5)| = {e:.2e} (limit {closed_tol:e})"),
                    ));
                }
            }
        }
    }
    Ok(output(
        data,
        statistics,
        json!({ "agreement": agree, "closed_form": closed_tol, "boundary": "dirichlet" }),
        checks,
        "path sums against direct solves".into(),
    ))
}

fn resolvent_check(cfg: &EffectiveConfig) -> Result<RunOutput, CliError> {
    let agree = cfg.tolerance("agreement")?;
    let graphs: Vec<WeightedGraph> = match &cfg.graph {
        Some(input) => vec![WeightedGraph::from_input(input)?],
        None => {
            if cfg.n < 2 {
                return Err(CliError::Config("random graphs need n >= 2 vertices".into()));
            }
            (0..cfg.n_samples)
                .map(|k| {
                    let mut rng = RngStream::new(cfg.seed, stream_id(tags::GRAPH, 0, k as u32));
                    let size = 2 + rng.below(cfg.n - 1) as usize;
                    WeightedGraph::random(size, 0.1, &mut rng)
                })
                .collect()
        }
    };
    let mut data = Table::new(&["instance", "method", "value", "tail_bound", "error_vs_direct"]);
    let mut checks = Vec::new();
    let mut worst = 0.0f64;
    for (k, g) in graphs.iter().enumerate() {
        let bound = g.spectral_bound();
        if !g.is_contracting() {
            checks.push(Check::new(
                format!("contracting[g{k}]"),
                false,
                format!("spectral bound {bound:.4} >= 1: the path expansion is not guaranteed to converge"),
            ));
        }
        let inv = match expansions::resolvent_matrix(g) {
            Ok(inv) => inv,
            Err(Error::Solver(msg)) => {
                checks.push(Check::new(format!("solvable[g{k}]"), false, msg));
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        let mut graph_worst = 0.0f64;
        for u in 0..g.len() {
            for v in 0..g.len() {
                let instance = format!("g{k}:{u}-{v}");
                let direct = inv[(u, v)];
                data.push(vec![instance.clone(), "direct".into(), num(direct), num(0.0), num(0.0)]);
                if !g.is_contracting() {
                    continue;
                }
                let len = expansions::resolvent_len_for_tolerance(g, v, agree / 10.0)?;
                let path = expansions::resolvent_path_sum(g, u, v, len)?;
                let err = (path.value - direct).abs();
                graph_worst = graph_worst.max(err);
                data.push(vec![instance, "path_sum".into(), num(path.value), num(path.tail_bound), num(err)]);
            }
        }
        worst = worst.max(graph_worst);
        if g.is_contracting() {
            checks.push(Check::new(
                format!("agreement[g{k}]"),
                graph_worst <= agree,
                format!("{} vertices, spectral bound {bound:.4}, max entry error {graph_worst:.2e}", g.len()),
            ));
        }
    }
    Ok(output(
        data,
        vec![Statistic::exact("max_entry_error", worst)],
        json!({ "graphs": graphs.len(), "agreement": agree }),
        checks,
        format!("{} graph(s), max entry error {worst:.2e}", graphs.len()),
    ))
}
