//! End-to-end checks of the `nsaqkd` binary: exit codes, file outputs and
//! reproducibility of everything it writes.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_nsaqkd"))
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn run(args: &[&dyn AsRef<std::ffi::OsStr>]) -> Output {
    let mut cmd = bin();
    for a in args {
        cmd.arg(a.as_ref());
    }
    cmd.output().expect("spawn nsaqkd")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).unwrap()
}

/// Parse a report and drop the timestamp, the only run-dependent field.
fn stable_report(text: &str) -> serde_json::Value {
    let mut v: serde_json::Value = serde_json::from_str(text).unwrap();
    v.as_object_mut().unwrap().remove("timestamp");
    v
}

#[test]
fn keyrate_is_reproducible_on_the_bundled_tables() {
    for (config, stats) in [
        ("mdi_10km.toml", "mdi_10km_stats.json"),
        ("bb84_ac_10km.toml", "bb84_ac_stats.json"),
        ("bb84_bc_10km.toml", "bb84_bc_stats.json"),
    ] {
        let config_path = fixture(config);
        let stats_path = fixture(stats);
        let args: Vec<&dyn AsRef<std::ffi::OsStr>> =
            vec![&"keyrate", &"--config", &config_path, &"--stats", &stats_path];
        let first = run(&args);
        assert_eq!(code(&first), 0, "{config}: {}", stderr(&first));
        let second = run(&args);
        assert_eq!(code(&second), 0);

        let a = stable_report(&stdout(&first));
        let b = stable_report(&stdout(&second));
        assert_eq!(a, b, "{config}: report not byte-stable modulo timestamp");

        let print = a["fingerprint"].as_str().unwrap();
        assert_eq!(print.len(), 64);
        assert!(print.chars().all(|c| c.is_ascii_hexdigit()));
        assert!(a["key_rate_per_pulse"].as_f64().unwrap() > 0.0);
    }
}

#[test]
fn keyrate_rejects_malformed_and_empty_stats() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.json");
    std::fs::write(&empty, "").unwrap();
    let garbled = dir.path().join("garbled.json");
    std::fs::write(&garbled, "{\"format\": \"nsaqkd-stats-v1\", \"cells\": [").unwrap();

    for bad in [&empty, &garbled] {
        let out = run(&[
            &"keyrate",
            &"--config",
            &fixture("mdi_10km.toml"),
            &"--stats",
            bad,
        ]);
        assert_eq!(code(&out), 1, "{}", bad.display());
        assert!(stderr(&out).starts_with("error:"));
    }
}

#[test]
fn keyrate_diagnoses_an_unknown_config_key() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("typo.toml");
    let base = std::fs::read_to_string(fixture("bb84_ac_10km.toml")).unwrap();
    std::fs::write(&config, base + "\nbogus_knob = 1\n").unwrap();
    let out = run(&[
        &"keyrate",
        &"--config",
        &config,
        &"--stats",
        &fixture("bb84_ac_stats.json"),
    ]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("bogus_knob"), "{}", stderr(&out));
}

#[test]
fn simulate_guards_on_pulse_count() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("stats.json");
    let zero = run(&[
        &"simulate",
        &"--config",
        &fixture("bb84_ac_10km.toml"),
        &"--pulses",
        &"0",
        &"--out",
        &out_path,
    ]);
    assert_eq!(code(&zero), 1);

    let huge = run(&[
        &"simulate",
        &"--config",
        &fixture("bb84_ac_10km.toml"),
        &"--pulses",
        &"2e9",
        &"--out",
        &out_path,
    ]);
    assert_eq!(code(&huge), 1);
    assert!(stderr(&huge).contains("--force"), "{}", stderr(&huge));
    assert!(!out_path.exists());
}

#[test]
fn simulate_is_deterministic_and_round_trips_into_keyrate() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    let c = dir.path().join("c.json");
    for (path, seed) in [(&a, "7"), (&b, "7"), (&c, "8")] {
        let out = run(&[
            &"simulate",
            &"--config",
            &fixture("bb84_ac_10km.toml"),
            &"--pulses",
            &"2e5",
            &"--seed",
            &seed,
            &"--out",
            path,
        ]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_ne!(std::fs::read(&a).unwrap(), std::fs::read(&c).unwrap());

    // 2e5 pulses is far below the finite-size floor: rate 0, exit 2.
    let out = run(&[
        &"keyrate",
        &"--config",
        &fixture("bb84_ac_10km.toml"),
        &"--stats",
        &a,
    ]);
    assert_eq!(code(&out), 2, "{}", stderr(&out));
    let report = stable_report(&stdout(&out));
    assert_eq!(report["key_rate_per_pulse"].as_f64().unwrap(), 0.0);
}

fn sweep_rows(csv: &str, param: &str) -> Vec<(f64, f64)> {
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        format!("{param},key_rate_per_pulse,key_rate_per_second")
    );
    lines
        .map(|l| {
            let cols: Vec<&str> = l.split(',').collect();
            (cols[0].parse().unwrap(), cols[1].parse().unwrap())
        })
        .collect()
}

#[test]
fn sweep_emits_csv_and_distance_is_monotone() {
    let out = run(&[
        &"sweep",
        &"--config",
        &fixture("bb84_ac_10km.toml"),
        &"--vary",
        &"distance_km=5:30:6",
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let rows = sweep_rows(&stdout(&out), "distance_km");
    assert_eq!(rows.len(), 6);
    for pair in rows.windows(2) {
        assert!(pair[1].1 <= pair[0].1, "rate rose with distance: {pair:?}");
    }
}

#[test]
fn sweep_with_a_degenerate_range_yields_one_row() {
    let out = run(&[
        &"sweep",
        &"--config",
        &fixture("bb84_ac_10km.toml"),
        &"--vary",
        &"mu=0.538:0.538:5",
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let rows = sweep_rows(&stdout(&out), "mu");
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].0, 0.538);

    let bad = run(&[
        &"sweep",
        &"--config",
        &fixture("bb84_ac_10km.toml"),
        &"--vary",
        &"nonsense=0:1:3",
    ]);
    assert_eq!(code(&bad), 1);
}

#[test]
fn network_analyze_reports_verdicts_and_writes_dot() {
    let dir = tempfile::tempdir().unwrap();
    let dot = dir.path().join("topo.dot");
    let out = run(&[
        &"network",
        &"analyze",
        &fixture("three_node_topology.json"),
        &"--compromise",
        &"Charlie",
        &"--dot",
        &dot,
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    let report = &v["survivability"];
    let verdicts: Vec<&str> = report["services"]
        .as_array()
        .unwrap()
        .iter()
        .map(|s| s["verdict"].as_str().unwrap())
        .collect();
    // Control rides the untrusted-relay edge; the data services terminate at
    // the compromised node.
    assert!(verdicts.contains(&"secure"));
    assert_eq!(verdicts.iter().filter(|v| **v == "insecure").count(), 2);
    let fraction = report["surviving_fraction"].as_f64().unwrap();
    assert!((fraction - 1.0 / 3.0).abs() < 1e-12);

    let rendered = std::fs::read_to_string(&dot).unwrap();
    assert!(rendered.starts_with("graph"));
    assert!(rendered.contains("Charlie"));
}

#[test]
fn network_enumerate_ranks_worst_first() {
    let out = run(&[
        &"network",
        &"enumerate",
        &fixture("three_node_topology.json"),
        &"--k",
        &"2",
        &"--limit",
        &"3",
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let reports: Vec<serde_json::Value> = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(reports.len(), 3);
    let fractions: Vec<f64> = reports
        .iter()
        .map(|r| r["surviving_fraction"].as_f64().unwrap())
        .collect();
    for pair in fractions.windows(2) {
        assert!(pair[0] <= pair[1], "not worst-first: {fractions:?}");
    }
}

#[test]
fn malformed_topology_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"format\": \"nsaqkd-topology-v1\"").unwrap();
    let out = run(&[&"network", &"analyze", &bad]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).starts_with("error:"));
}

#[test]
fn config_dir_env_resolves_bare_names() {
    let out = bin()
        .args(["keyrate", "--config", "mdi_10km.toml", "--stats", "mdi_10km_stats.json"])
        .env("NSAQKD_CONFIG_DIR", fixture("."))
        .current_dir(tempfile::tempdir().unwrap().path())
        .output()
        .expect("spawn nsaqkd");
    assert_eq!(code(&out), 0, "{}", stderr(&out));
}

#[test]
fn optimize_writes_a_trace() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("trace.csv");
    let config = dir.path().join("quick.toml");
    let base = std::fs::read_to_string(fixture("mdi_20km.toml")).unwrap();
    // Shrink the search so the test stays fast; the seeded start already
    // gives a positive rate.
    let quick = base
        .replace("swarm_size = 24", "swarm_size = 6")
        .replace("iterations = 80", "iterations = 5");
    std::fs::write(&config, quick).unwrap();

    let out = run(&[&"optimize", &"--config", &config, &"--trace", &trace]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert!(v["key_rate"].as_f64().unwrap() > 0.0);

    let csv = std::fs::read_to_string(&trace).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "iteration,best_key_rate");
    let best: Vec<f64> = lines
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(best.len(), 5);
    for pair in best.windows(2) {
        assert!(pair[1] >= pair[0], "best value regressed: {best:?}");
    }
}
