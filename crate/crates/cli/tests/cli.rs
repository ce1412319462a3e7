use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn rydion(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rydion"))
        .args(args)
        .output()
        .expect("run rydion")
}

fn write_config(dir: &Path, json: &str) -> String {
    let p = dir.join("config.json");
    fs::write(&p, json).unwrap();
    p.to_string_lossy().into_owned()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

/// Small DE budget so optimisation runs finish in seconds.
const TINY_SEARCH: &str = r#""search": {"starts": 1, "de": {"population_size": 8, "max_generations": 3}}"#;

#[test]
fn replay_short_gate_pulse() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"version": 1, "optimize": {
            "system": {"tau": 25.0, "omega_mw": 20.0, "gamma": 0.0},
            "replay": {"omega0": 1.19, "delta0": 6.81, "Delta0": -3.25},
            "trajectory_samples": 40}}"#,
    );
    let out = dir.path().join("out");
    let o = rydion(&["--config", &cfg, "--out", out.to_str().unwrap(), "optimize"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let j = read_json(&out.join("optimize.json"));
    assert_eq!(j["mode"], "replay");
    assert!(j["fidelity"].as_f64().unwrap() >= 0.9625, "{}", j["fidelity"]);
    assert_eq!(j["provenance"]["config"]["optimize"]["system"]["tau"], 25.0);
    assert!(j["errors"]["p_bar"].as_f64().unwrap() < 1e-3);
    assert!((j["physical"]["tau_us"].as_f64().unwrap() - 1.0).abs() < 1e-12);

    let csv = fs::read_to_string(out.join("trajectory.csv")).unwrap();
    let mut lines = csv.lines();
    assert!(lines.next().unwrap().starts_with("# provenance {"));
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(&header[..4], ["t", "omega_l", "delta_l", "pop_000"]);
    assert!(header.contains(&"phi_ent_111") && header.contains(&"rydberg"));
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect();
    assert!(rows.len() >= 40);
    assert_eq!(rows[0][0], 0.0);
    assert!((rows.last().unwrap()[0] - 25.0).abs() < 1e-9);
    // the laser envelope vanishes at both ends
    assert!(rows[0][1].abs() < 1e-12 && rows.last().unwrap()[1].abs() < 1e-12);
}

#[test]
fn optimize_runs_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        &format!(
            r#"{{"version": 1, "optimize": {{"system": {{"tau": 4.0, "omega_mw": 20.0, "gamma": 0.0}}, {TINY_SEARCH}, "trajectory_samples": 10}}}}"#
        ),
    );
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        let o = rydion(&["--config", &cfg, "--seed", "5", "--out", out.to_str().unwrap(), "optimize"]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for f in ["optimize.json", "trajectory.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let j = read_json(&a.join("optimize.json"));
    assert_eq!(j["mode"], "optimize");
    assert_eq!(j["provenance"]["seed"], 5);
    assert_eq!(j["search"]["seed"], 5);
}

#[test]
fn scan_writes_fixed_columns_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        &format!(
            r#"{{"version": 1, "scan": {{"taus": [2.0, 4.0], "gammas": [0.0], "alphas": [0.0, 1.0], {TINY_SEARCH}}}}}"#
        ),
    );
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        let o = rydion(&["--config", &cfg, "--out", out.to_str().unwrap(), "scan"]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    assert_eq!(fs::read(a.join("scan.csv")).unwrap(), fs::read(b.join("scan.csv")).unwrap());
    let csv = fs::read_to_string(a.join("scan.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert!(lines[0].starts_with("# provenance"));
    assert_eq!(
        lines[1],
        "tau,gamma,alpha,fidelity,p_bar,phi_bar,p_dec,omega0,delta0,Delta0,seed"
    );
    assert_eq!(lines.len(), 2 + 4);
    // per-point seeds differ
    let seeds: Vec<&str> = lines[2..].iter().map(|l| l.rsplit(',').next().unwrap()).collect();
    assert_eq!(seeds, ["0", "1", "2", "3"]);
}

#[test]
fn config_errors_exit_with_code_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = [
        r#"{"version": 1, "optimize": {"search": {"bounds": []}}}"#,
        r#"{"version": 7}"#,
        r#"{"version": 1, "unknown": 1}"#,
        r#"{"version": 1, "qec": {"sweep": {"lambdas": []}}}"#,
        "not json",
    ];
    for json in bad {
        let cfg = write_config(dir.path(), json);
        let o = rydion(&["--config", &cfg, "--out", dir.path().to_str().unwrap(), "optimize"]);
        assert_eq!(o.status.code(), Some(2), "{json}");
        assert!(String::from_utf8_lossy(&o.stderr).contains("config"), "{json}");
    }
    let o = rydion(&["--config", "/nonexistent/config.json", "scan"]);
    assert_eq!(o.status.code(), Some(2));
    let o = rydion(&["--threads", "0", "config"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn config_subcommand_prints_resolved_config() {
    let o = rydion(&["--seed", "9", "config"]);
    assert!(o.status.success());
    let j: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(j["seed"], 9);
    assert_eq!(j["qec"]["sweep"]["seed"], 9);
    assert_eq!(j["version"], 1);
}

// The QEC commands run the exhaustive single-fault scan over ~12k locations
// per logical state; run with `cargo test -p rydion-cli -- --ignored`.

#[test]
#[ignore = "full single-fault scan, tens of minutes"]
fn negative_control_fails_certification() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = rydion(&["--out", out.to_str().unwrap(), "qec", "--negative-control"]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    let j = read_json(&out.join("qec_scan.json"));
    assert_eq!(j["negative_control"], true);
    let failing: usize = j["scans"]
        .as_array()
        .unwrap()
        .iter()
        .map(|s| s["failures"].as_array().unwrap().len())
        .sum();
    assert!(failing > 0);
    assert!(!out.join("qec_rates.csv").exists());
}

#[test]
#[ignore = "full single-fault scan, tens of minutes"]
fn single_lambda_refuses_fit_but_writes_rates() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"version": 1, "qec": {"sweep": {"lambdas": [1.0], "target_failures": 20}}}"#,
    );
    let out = dir.path().join("out");
    let o = rydion(&["--config", &cfg, "--out", out.to_str().unwrap(), "qec"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("qec_rates.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[1], "lambda,state,trials,failures,p_L,ci_low,ci_high");
    assert_eq!(lines.len(), 2 + 2);
    let j = read_json(&out.join("qec_summary.json"));
    for fit in j["fits"].as_array().unwrap() {
        assert!(fit["alpha"].is_null());
        assert!(fit["refusal"].as_str().unwrap().contains("fit refused"));
    }
    let cycle = fs::read_to_string(out.join("qec_cycle.txt")).unwrap();
    assert!(cycle.lines().nth(1).unwrap().starts_with("# qubits"));
}
