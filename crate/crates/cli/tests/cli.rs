use std::fs;
use std::path::Path;
use std::process::Command;

use orwalk_cli::compare::compare;
use orwalk_cli::exit;
use orwalk_cli::main_with_args;
use orwalk_cli::output::read_result;

fn run(args: &[&str], out: &Path) -> i32 {
    let mut full = vec!["orwalk"];
    full.extend_from_slice(args);
    full.extend_from_slice(&["--out", out.to_str().unwrap()]);
    main_with_args(full)
}

#[test]
fn delta_lemmas_pass() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["run", "delta-lemmas", "--max-len", "16"], dir.path()), exit::SUCCESS);
    let r = read_result(dir.path()).unwrap();
    assert!(r.passed);
    assert_eq!(r.checks.len(), 2);
    let csv = fs::read_to_string(dir.path().join("delta-lemmas.csv")).unwrap();
    assert!(csv.contains("alternate,1252,256,100000,pass"), "{csv}");
}

#[test]
fn dp_oracle_two_steps() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["dp-oracle", "--env", "alternate", "--n", "2"], dir.path()), exit::SUCCESS);
    let csv = fs::read_to_string(dir.path().join("dp-oracle.csv")).unwrap();
    assert!(csv.lines().any(|l| l == "0,0,2/9,0.2222222222222222"), "{csv}");
    assert!(csv.starts_with("# orwalk "));
    assert!(csv.contains("# config_hash="));
}

#[test]
fn malformed_config_key_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"experiment": "dp-oracle", "n_steps": 3}"#).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_orwalk"))
        .args(["run", "--config", cfg.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(exit::CONFIG));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("n_steps"), "{err}");
}

#[test]
fn error_paths_map_to_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["no-such-experiment"], dir.path()), exit::CONFIG);
    assert_eq!(run(&["dp-oracle", "--env", "sideways"], dir.path()), exit::CONFIG);
    assert_eq!(run(&["dp-oracle", "--format", "xml"], dir.path()), exit::CONFIG);
    assert_eq!(run(&["returns", "--horizon", "10,5"], dir.path()), exit::CONFIG);
    assert_eq!(run(&["dp-oracle", "--n", "40"], dir.path()), exit::RUNTIME);
    assert_eq!(run(&["simulate", "--n", "1000000", "--samples", "1000"], dir.path()), exit::RUNTIME);
    assert_eq!(
        run(&["series-O", "--seeds", "1", "--n", "40", "--samples", "100", "--cap", "5"], dir.path()),
        exit::RUNTIME
    );
    // a tail-event check that cannot hold gives the acceptance-failure code
    assert_eq!(
        run(&["tail-events", "--samples", "200", "--horizon", "100", "--tol", "max_frequency=0"], dir.path()),
        exit::CHECK_FAILED
    );
}

#[test]
fn seed_defaults_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let status = Command::new(env!("CARGO_BIN_EXE_orwalk"))
        .args(["simulate", "--n", "5", "--samples", "2", "--out", dir.path().to_str().unwrap()])
        .env("ORWALK_SEED", "77")
        .output()
        .unwrap()
        .status;
    assert_eq!(status.code(), Some(0));
    let cfg = fs::read_to_string(dir.path().join("effective_config.json")).unwrap();
    assert!(cfg.contains("\"seed\": 77"), "{cfg}");
    assert!(!cfg.contains("workers"));
}

#[test]
fn compare_identical_runs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        assert_eq!(run(&["returns", "--horizon", "10,100", "--samples", "500"], d.path()), 0);
    }
    let report = compare(&read_result(a.path()).unwrap(), &read_result(b.path()).unwrap()).unwrap();
    assert_eq!(report.deltas.len(), 6);
    assert!(report.deltas.iter().all(|d| d.delta == 0.0 && d.z == Some(0.0)));
    assert_eq!(report.max_abs_z, Some(0.0));
}

#[test]
fn monte_carlo_returns_against_exact_oracle() {
    let mc = tempfile::tempdir().unwrap();
    let dp = tempfile::tempdir().unwrap();
    assert_eq!(run(&["returns", "--horizon", "12", "--samples", "100000", "--seed", "3"], mc.path()), 0);
    assert_eq!(run(&["dp-oracle", "--n", "12"], dp.path()), 0);
    let report = compare(&read_result(mc.path()).unwrap(), &read_result(dp.path()).unwrap()).unwrap();
    assert_eq!(report.deltas.len(), 1);
    assert_eq!(report.deltas[0].name, "mean_returns@12");
    assert!(report.max_abs_z.unwrap() <= 4.0, "{report:?}");
}

#[test]
fn compare_series_verdicts() {
    let l = tempfile::tempdir().unwrap();
    let h = tempfile::tempdir().unwrap();
    assert_eq!(run(&["series-L", "--n", "256", "--horizon", "8,64"], l.path()), 0);
    assert_eq!(run(&["series-H", "--n", "512", "--horizon", "64", "--tol", "cauchy=0.05"], h.path()), 0);
    let report = compare(&read_result(l.path()).unwrap(), &read_result(h.path()).unwrap()).unwrap();
    assert_eq!(report.verdict_a.as_ref().unwrap()["type"], "divergence");
    assert_eq!(report.verdict_b.as_ref().unwrap()["type"], "cauchy");
    assert!(report.verdict_b.unwrap()["n0"].is_u64());
    let csv = fs::read_to_string(l.path().join("series-L.csv")).unwrap();
    assert!(csv.contains("n,term,partial_sum,quadrature_error"));
}

#[test]
fn compare_rejects_non_runs() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("result.json"), "{\"schema\": \"other\"}").unwrap();
    assert_eq!(
        main_with_args(["orwalk", "compare", dir.path().to_str().unwrap(), dir.path().to_str().unwrap()]),
        exit::CONFIG
    );
}

#[test]
fn json_format_and_graph_input() {
    let dir = tempfile::tempdir().unwrap();
    let graph = dir.path().join("graph.json");
    fs::write(&graph, r#"{"vertices": 2, "edges": [[0, 1, 1.0]], "lambda": [4.0, 4.0]}"#).unwrap();
    let out = dir.path().join("run");
    assert_eq!(
        run(&["resolvent-check", "--graph", graph.to_str().unwrap(), "--format", "json"], &out),
        exit::SUCCESS
    );
    let data: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("resolvent-check.json")).unwrap()).unwrap();
    let rows = data["rows"].as_array().unwrap();
    let direct = rows.iter().find(|r| r[0] == "g0:0-1" && r[1] == "direct").unwrap();
    assert!((direct[2].as_str().unwrap().parse::<f64>().unwrap() - 1.0 / 15.0).abs() < 1e-15);
    // a graph violating the contraction bound is flagged, not silently summed
    fs::write(&graph, r#"{"vertices": 2, "edges": [[0, 1, 5.0]], "lambda": [4.0, 4.0]}"#).unwrap();
    assert_eq!(run(&["resolvent-check", "--graph", graph.to_str().unwrap()], &out), exit::CHECK_FAILED);
    let r = read_result(&out).unwrap();
    assert!(r.checks.iter().any(|c| c.name == "contracting[g0]" && !c.passed));
}

#[test]
fn worker_count_does_not_change_files() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["series-O", "--seeds", "1,2", "--n", "5", "--samples", "300", "--cap", "10000"];
    for (d, w) in [(&a, "1"), (&b, "3")] {
        let mut v = args.to_vec();
        v.extend_from_slice(&["--workers", w]);
        assert_eq!(run(&v, d.path()), 0);
    }
    for f in ["series-O.csv", "result.json"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}
