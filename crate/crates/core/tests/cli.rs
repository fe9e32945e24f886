use std::path::Path;

use relay_qkd::cli::{run, EXIT_OK, EXIT_RUNTIME, EXIT_VALIDATION};
use relay_qkd::ingest::read_ingest_csv;
use relay_qkd::optimizer::read_curve_csv;
use relay_qkd::phase_ref::read_path_csv;
use relay_qkd::sim::read_summary_csv;

fn relay(out: &Path, args: &[&str]) -> i32 {
    let mut v = vec!["relay-qkd", "--out", out.to_str().unwrap()];
    v.extend_from_slice(args);
    run(v)
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    assert_eq!(run(["relay-qkd"]), EXIT_VALIDATION);
    assert_eq!(relay(out, &["rates", "--bogus"]), EXIT_VALIDATION);
    assert_eq!(relay(out, &["rates", "--config", "no_such_preset"]), EXIT_VALIDATION);
    assert_eq!(relay(out, &["rates", "--e-extra", "0.7"]), EXIT_VALIDATION);
    assert_eq!(relay(out, &["rates", "--mu", "-1"]), EXIT_VALIDATION);
    assert_eq!(relay(out, &["scan", "--step", "0"]), EXIT_VALIDATION);
    assert_eq!(relay(out, &["--threads", "0", "rates"]), EXIT_VALIDATION);
    assert_eq!(relay(out, &["simulate", "--e-extra", "0.1", "--target-qber", "0.1"]), EXIT_VALIDATION);
    assert_eq!(relay(out, &["visibility", "--calibration", "missing.csv"]), EXIT_RUNTIME);
}

#[test]
fn bad_config_file_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[links]\neta1 = 2.0\n").unwrap();
    assert_eq!(relay(dir.path(), &["rates", "--config", cfg.to_str().unwrap()]), EXIT_VALIDATION);
}

#[test]
fn bad_ingest_table_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("rows.csv");
    std::fs::write(&data, "distance_km,gamma\n100,0.05\n").unwrap();
    assert_eq!(relay(dir.path(), &["ingest", "--data", data.to_str().unwrap()]), EXIT_VALIDATION);
}

#[test]
fn rates_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(relay(dir.path(), &["rates", "--config", "trial_200km"]), EXIT_OK);
    let v = json(&dir.path().join("rates.json"));
    assert!(v.to_string().contains("q_mu_total"));
}

#[test]
fn simulate_writes_tally_and_is_thread_independent() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["--seed", "5", "simulate", "--rounds", "200000", "--records"];
    let mut with_threads = vec!["--threads", "1"];
    with_threads.extend_from_slice(&args);
    assert_eq!(relay(a.path(), &with_threads), EXIT_OK);
    assert_eq!(relay(b.path(), &args), EXIT_OK);
    let ta = read_summary_csv(&a.path().join("tally.csv")).unwrap();
    let tb = read_summary_csv(&b.path().join("tally.csv")).unwrap();
    assert_eq!(ta, tb);
    assert_eq!(ta[0].n, 200_000);
    assert_eq!(json(&a.path().join("tally.json")), json(&b.path().join("tally.json")));
}

#[test]
fn simulate_aggregate_with_target_qber() {
    let dir = tempfile::tempdir().unwrap();
    let code = relay(
        dir.path(),
        &["simulate", "--aggregate", "--rounds", "100000000000000", "--target-qber", "0.097"],
    );
    assert_eq!(code, EXIT_OK);
    let rows = read_summary_csv(&dir.path().join("tally.csv")).unwrap();
    let q = rows[0].qber.unwrap();
    assert!((q - 0.097).abs() < 0.005, "{q}");
}

#[test]
fn scan_and_optimize() {
    let dir = tempfile::tempdir().unwrap();
    let code = relay(dir.path(), &["scan", "--to", "400", "--step", "100", "--levels", "0,0.05"]);
    assert_eq!(code, EXIT_OK);
    for level in ["0.000", "0.050"] {
        let rows = read_curve_csv(&dir.path().join(format!("curve_e{level}.csv"))).unwrap();
        assert!(!rows.is_empty());
        assert!(rows.windows(2).all(|w| w[1].rate_bits_per_pulse <= w[0].rate_bits_per_pulse));
    }
    assert_eq!(relay(dir.path(), &["optimize", "--distance", "150", "--ideal"]), EXIT_OK);
    let v = json(&dir.path().join("optimize.json"));
    assert!(v["best"]["rate"].as_f64().unwrap() > 0.0);
}

#[test]
fn visibility_phase_ingest_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cal = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/calibration_example.csv");
    assert_eq!(relay(dir.path(), &["visibility", "--calibration", cal.to_str().unwrap()]), EXIT_OK);
    assert!(dir.path().join("visibility.csv").exists());
    assert!(dir.path().join("visibility.json").exists());

    assert_eq!(relay(dir.path(), &["phase", "--duration", "0.01"]), EXIT_OK);
    let rows = read_path_csv(&dir.path().join("phase_path.csv")).unwrap();
    assert!(rows.len() > 100);
    assert!(dir.path().join("phase.json").exists());

    assert_eq!(relay(dir.path(), &["ingest"]), EXIT_OK);
    let rows = read_ingest_csv(&dir.path().join("ingest.csv")).unwrap();
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r.per_pulse_rate > 0.0));
}

#[test]
fn oracle_check_pass_and_fail() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(relay(dir.path(), &["oracle-check", "--draws", "5"]), EXIT_OK);
    assert!(dir.path().join("oracle_check.json").exists());
    assert_eq!(relay(dir.path(), &["oracle-check", "--draws", "5", "--tolerance", "1e-12"]), EXIT_RUNTIME);
}
