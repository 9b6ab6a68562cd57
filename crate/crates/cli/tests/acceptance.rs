//! Acceptance criteria. Each test prints one `criterion N: PASS|FAIL` line.
//!
//! Run with `cargo test -p orwalk-cli --test acceptance -- --nocapture`.
//! Tests hold a global lock so their wall-clock budgets are not shared.

use std::fs;
use std::path::Path;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use orwalk_cli::main_with_args;
use orwalk_cli::output::{read_result, Check, ResultFile};
use orwalk_core::lattice::{EnvironmentSpec, Vertex};
use orwalk_core::oracle::{exact_distribution, format_ratio};
use orwalk_core::walk::empirical_law;
use orwalk_core::Estimate;

static LOCK: Mutex<()> = Mutex::new(());

struct Run {
    code: i32,
    result: ResultFile,
    elapsed: Duration,
}

fn run(args: &[&str], out: &Path) -> Run {
    let mut full = vec!["orwalk", "run"];
    full.extend_from_slice(args);
    full.extend_from_slice(&["--out", out.to_str().unwrap()]);
    let start = Instant::now();
    let code = main_with_args(full);
    let elapsed = start.elapsed();
    let result = read_result(out).unwrap_or_else(|e| panic!("{args:?} exited {code}: {e}"));
    Run { code, result, elapsed }
}

fn check<'a>(r: &'a ResultFile, name: &str) -> &'a Check {
    r.checks
        .iter()
        .find(|c| c.name == name)
        .unwrap_or_else(|| panic!("{} has no check `{name}`", r.experiment))
}

fn within(elapsed: Duration, secs: u64) -> (bool, String) {
    (elapsed <= Duration::from_secs(secs), format!("{:.1} s (limit {secs} s)", elapsed.as_secs_f64()))
}

fn report(id: u32, passed: bool, detail: &str) {
    println!("\ncriterion {id}: {} : {detail}", if passed { "PASS" } else { "FAIL" });
    assert!(passed, "criterion {id} failed: {detail}");
}

fn lemma_criterion(id: u32, lemma: &str) {
    let _g = LOCK.lock().unwrap_or_else(|e| e.into_inner());
    let dir = tempfile::tempdir().unwrap();
    let r = run(&["delta-lemmas", "--max-len", "16", "--n", "200", "--samples", "100000"], dir.path());
    let c = check(&r.result, lemma);
    let (fast, t) = within(r.elapsed, 60);
    report(id, c.passed && fast, &format!("{}; {t}", c.detail));
}

#[test]
fn criterion_01_alternate_delta_lemma() {
    lemma_criterion(1, "alternate");
}

#[test]
fn criterion_02_half_plane_delta_identity() {
    lemma_criterion(2, "half-plane");
}

#[test]
fn criterion_03_coupling() {
    let _g = LOCK.lock().unwrap_or_else(|e| e.into_inner());
    let root = tempfile::tempdir().unwrap();
    let mut passed = true;
    let mut elapsed = Duration::ZERO;
    let mut details = Vec::new();
    for env in ["alternate", "half-plane", "random:7"] {
        let r = run(
            &["skeleton-check", "--env", env, "--n", "200", "--samples", "10000"],
            &root.path().join(env.replace(':', "-")),
        );
        let c = &r.result.checks[0];
        passed &= r.code == 0 && r.result.checks.len() == 1 && c.passed;
        elapsed += r.elapsed;
        details.push(format!("{env}: {}", c.detail));
    }
    let (fast, t) = within(elapsed, 60);
    report(3, passed && fast, &format!("{}; {t}", details.join("; ")));
}

#[test]
fn criterion_04_monte_carlo_matches_exact_law() {
    let _g = LOCK.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let (n, samples) = (12, 1_000_000u64);
    let envs = [
        EnvironmentSpec::Alternate,
        EnvironmentSpec::HalfPlane,
        EnvironmentSpec::random(1),
        EnvironmentSpec::random(2),
        EnvironmentSpec::random(3),
    ];
    let mut worst = 0.0f64;
    let mut outside = 0usize;
    let mut points = 0usize;
    for (k, env) in envs.iter().enumerate() {
        let exact = exact_distribution(env, Vertex::ORIGIN, n).unwrap();
        let law = empirical_law(env, n, samples, 1000 + k as u64).unwrap();
        for v in exact.support() {
            let p = exact.probability_f64(v);
            let est = Estimate::proportion(law.get(&v).copied().unwrap_or(0), samples);
            // binomial standard error under the exact probability
            let z = (est.value - p) / (p * (1.0 - p) / samples as f64).sqrt();
            worst = worst.max(z.abs());
            points += 1;
        }
        outside += law.keys().filter(|v| exact.count(**v) == 0).count();
    }
    let two_step = exact_distribution(&EnvironmentSpec::Alternate, Vertex::ORIGIN, 2).unwrap();
    let origin = format_ratio(&two_step.probability(Vertex::ORIGIN));
    let (fast, t) = within(start.elapsed(), 300);
    let passed = worst <= 4.0 && outside == 0 && origin == "2/9" && fast;
    report(
        4,
        passed,
        &format!(
            "max |z| = {worst:.2} over {points} support points in 5 environments, {outside} samples off support; \
             two-step origin mass {origin}; {t}"
        ),
    );
}

#[test]
fn criterion_05_alternate_series_diverges() {
    let _g = LOCK.lock().unwrap_or_else(|e| e.into_inner());
    let dir = tempfile::tempdir().unwrap();
    let r = run(&["series-L", "--n", "4096", "--horizon", "32,2048", "--samples", "0"], dir.path());
    let c = check(&r.result, "divergence");
    let (fast, t) = within(r.elapsed, 300);
    report(5, c.passed && fast, &format!("{}; {t}", c.detail));
}

#[test]
fn criterion_06_half_plane_series_converges() {
    let _g = LOCK.lock().unwrap_or_else(|e| e.into_inner());
    let dir = tempfile::tempdir().unwrap();
    let r = run(
        &["series-H", "--n", "16384", "--horizon", "256", "--samples", "1000000", "--cap", "1000000"],
        dir.path(),
    );
    let cauchy = check(&r.result, "cauchy");
    let mc: Vec<&Check> = (1..=3).map(|n| check(&r.result, &format!("mc_term_{n}"))).collect();
    let (fast, t) = within(r.elapsed, 600);
    let mc_text: Vec<String> = mc.iter().map(|c| format!("{}: {}", c.name, c.detail)).collect();
    let passed = cauchy.passed && mc.iter().all(|c| c.passed) && fast;
    report(6, passed, &format!("cauchy: {}; {}; {t}", cauchy.detail, mc_text.join("; ")));
}

#[test]
fn criterion_07_random_environment_transient_with_zero_speed() {
    let _g = LOCK.lock().unwrap_or_else(|e| e.into_inner());
    let o = tempfile::tempdir().unwrap();
    let seeds: Vec<String> = (0..30).map(|s| s.to_string()).collect();
    let seeds = seeds.join(",");
    let ro = run(
        &[
            "returns",
            "--seeds",
            &seeds,
            "--horizon",
            "10000,100000,1000000",
            "--samples",
            "1000",
            "--tol",
            "max_return_increase=0.2",
            "--tol",
            "max_speed=0.05",
            "--tol",
            "max_speed_ratio=0.5",
        ],
        o.path(),
    );
    let l = tempfile::tempdir().unwrap();
    let rl = run(
        &[
            "returns",
            "--env",
            "alternate",
            "--horizon",
            "100000,1000000",
            "--samples",
            "1000",
            "--tol",
            "min_return_increase=0.5",
        ],
        l.path(),
    );
    let parts = [
        check(&ro.result, "return_increase_below"),
        check(&rl.result, "return_increase_above"),
        check(&ro.result, "speed_below"),
        check(&ro.result, "speed_ratio"),
    ];
    let (fast, t) = within(ro.elapsed + rl.elapsed, 1800);
    let text: Vec<String> = parts.iter().map(|c| format!("{}: {}", c.name, c.detail)).collect();
    report(7, parts.iter().all(|c| c.passed) && fast, &format!("{}; {t}", text.join("; ")));
}

#[test]
fn criterion_08_tail_events() {
    let _g = LOCK.lock().unwrap_or_else(|e| e.into_inner());
    let dir = tempfile::tempdir().unwrap();
    let r = run(
        &[
            "tail-events",
            "--horizon",
            "1000,4000",
            "--samples",
            "10000",
            "--tol",
            "delta1=0.2",
            "--tol",
            "delta2=0.2",
            "--tol",
            "delta3=0.2",
            "--tol",
            "max_frequency=0.05",
        ],
        dir.path(),
    );
    let (fast, t) = within(r.elapsed, 300);
    let text: Vec<String> =
        r.result.checks.iter().map(|c| format!("{} {}", if c.passed { "ok" } else { "FAILED" }, c.detail)).collect();
    let passed = r.result.checks.len() == 6 && r.result.passed && fast;
    report(8, passed, &format!("{}; {t}", text.join("; ")));
}

#[test]
fn criterion_09_green_function_expansion() {
    let _g = LOCK.lock().unwrap_or_else(|e| e.into_inner());
    let dir = tempfile::tempdir().unwrap();
    let r = run(&["green-check", "--tol", "agreement=1e-8", "--tol", "closed_form=1e-6"], dir.path());
    let agreements = r.result.checks.iter().filter(|c| c.name.starts_with("agreement")).count();
    let closed = check(&r.result, "closed_form[d=1,m=1]");
    let (fast, t) = within(r.elapsed, 120);
    let passed = r.code == 0 && agreements == 8 && fast;
    report(9, passed, &format!("{agreements} path/direct agreements; {}; {t}", closed.detail));
}

#[test]
fn criterion_10_resolvent_expansion() {
    let _g = LOCK.lock().unwrap_or_else(|e| e.into_inner());
    let dir = tempfile::tempdir().unwrap();
    let r = run(&["resolvent-check", "--n", "8", "--samples", "20", "--tol", "agreement=1e-8"], dir.path());
    let agreements = r.result.checks.iter().filter(|c| c.name.starts_with("agreement") && c.passed).count();
    let worst = r.result.statistics.iter().find(|s| s.name == "max_entry_error").unwrap().value;
    let (fast, t) = within(r.elapsed, 60);
    let passed = r.code == 0 && agreements == 20 && fast;
    report(10, passed, &format!("{agreements} of 20 graphs agree, max entry error {worst:.2e}; {t}"));
}

#[test]
fn criterion_11_reproducible_across_worker_counts() {
    let _g = LOCK.lock().unwrap_or_else(|e| e.into_inner());
    let configs: [&[&str]; 10] = [
        &["simulate", "--n", "200", "--samples", "20"],
        &["returns", "--seeds", "0,1,2", "--horizon", "100,1000", "--samples", "200"],
        &["skeleton-check", "--n", "200", "--samples", "500"],
        &["delta-lemmas", "--max-len", "10", "--n", "50", "--samples", "2000"],
        &["series-L", "--n", "256", "--horizon", "8,64", "--samples", "2000", "--cap", "10000"],
        &["series-H", "--n", "512", "--horizon", "64", "--samples", "2000", "--cap", "10000"],
        &["series-O", "--seeds", "0,1,2", "--n", "5", "--samples", "300", "--cap", "10000"],
        &["tail-events", "--horizon", "200,400", "--samples", "500"],
        &["dp-oracle", "--n", "10"],
        &["resolvent-check", "--samples", "5"],
    ];
    let root = tempfile::tempdir().unwrap();
    let mut mismatches = Vec::new();
    for (k, args) in configs.iter().enumerate() {
        let dirs: Vec<_> = ["1", "2"]
            .iter()
            .map(|w| {
                let d = root.path().join(format!("{k}-w{w}"));
                let mut a = args.to_vec();
                a.extend_from_slice(&["--workers", w]);
                run(&a, &d);
                d
            })
            .collect();
        let r = read_result(&dirs[0]).unwrap();
        for f in [r.data_file.as_str(), "result.json"] {
            if fs::read(dirs[0].join(f)).unwrap() != fs::read(dirs[1].join(f)).unwrap() {
                mismatches.push(format!("{}/{f}", args[0]));
            }
        }
        let strip = |d: &Path| -> Vec<String> {
            fs::read_to_string(d.join("effective_config.json"))
                .unwrap()
                .lines()
                .filter(|l| !l.trim_start().starts_with("\"output_dir\""))
                .map(String::from)
                .collect()
        };
        if strip(&dirs[0]) != strip(&dirs[1]) {
            mismatches.push(format!("{}/effective_config.json", args[0]));
        }
    }
    let detail = if mismatches.is_empty() {
        format!("{} experiments byte-identical with 1 and 2 workers", configs.len())
    } else {
        format!("differences in {}", mismatches.join(", "))
    };
    report(11, mismatches.is_empty(), &detail);
}
