use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_beamspace"))
}

fn shipped(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn beamspace")
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout: {}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("config.json");
    fs::write(&p, text).unwrap();
    p
}

const SMALL_PERTURBED: &str = r#"{
    "grid": {"n_theta": 37, "n_phi": 72},
    "perturbation": {"lobes": [
        {"theta_deg": 100, "phi_deg": 250, "width_deg": 45, "amplitude": -0.45, "phase_deg": 10},
        {"states": ["+j"], "theta_deg": 60, "phi_deg": 300, "width_deg": 40, "amplitude": 0.3, "phase_deg": 70},
        {"states": ["-j"], "polarization": "theta", "theta_deg": 110, "phi_deg": 270, "width_deg": 40, "amplitude": -0.3, "phase_deg": -50}
    ]},
    "monte_carlo": {"scenarios": 500}
}"#;

const SMALL_FREE: &str = r#"{"grid": {"n_theta": 19, "n_phi": 36}, "monte_carlo": {"scenarios": 200}}"#;

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn shipped_metrics_are_complete_and_finite() {
    let dir = tempfile::tempdir().unwrap();
    ok(&run(&[
        "metrics",
        "--config",
        s(&shipped("default.json")),
        "--out",
        s(dir.path()),
    ]));
    let m: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("metrics.json")).unwrap()).unwrap();
    for key in [
        "correlation_db",
        "imbalance_db",
        "average_evm_db",
        "mean_evm_db",
        "free_space_imbalance_db",
    ] {
        assert!(m[key].as_f64().is_some_and(f64::is_finite), "{key}: {}", m[key]);
    }
    let states = m["state_power"].as_array().unwrap();
    assert_eq!(states.len(), 4);
    assert!(states
        .iter()
        .all(|s| s["power_ratio"].as_f64().is_some_and(|v| v > 0.0 && v.is_finite())));
    let imb = m["free_space_imbalance_db"].as_f64().unwrap();
    assert!((imb - 0.8).abs() <= 0.2);
}

#[test]
fn identity_perturbation_reports_sentinels() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL_FREE);
    let out = run(&["metrics", "--config", s(&cfg), "--out", s(dir.path())]);
    ok(&out);
    let m: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("metrics.json")).unwrap()).unwrap();
    assert_eq!(m["correlation_db"], "-inf");
    assert_eq!(m["average_evm_db"], "-inf");
    assert_eq!(m["imbalance_db"], m["free_space_imbalance_db"]);

    let out = run(&["evm-map", "--config", s(&cfg), "--out", s(dir.path())]);
    ok(&out);
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("average EVM -inf dB"));
    let csv = fs::read_to_string(dir.path().join("evm_map.csv")).unwrap();
    let rows: Vec<_> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 19 * 36);
    assert!(rows.iter().all(|r| r.ends_with(",0,-inf,0")), "{}", rows[0]);
}

#[test]
fn shipped_evm_is_in_sanity_band() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "evm-map",
        "--config",
        s(&shipped("default.json")),
        "--out",
        s(dir.path()),
    ]);
    ok(&out);
    let stdout = String::from_utf8_lossy(&out.stdout);
    let avg: f64 = stdout.split_whitespace().nth(2).unwrap().parse().unwrap();
    assert!(avg > -60.0 && avg < 0.0, "{stdout}");
    let rows = fs::read_to_string(dir.path().join("evm_map.csv"))
        .unwrap()
        .lines()
        .count()
        - 1;
    assert_eq!(rows, 91 * 180);
}

fn constellation_rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_owned).collect())
        .collect()
}

#[test]
fn constellation_free_space_is_ideal() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL_FREE);
    ok(&run(&["constellation", "--config", s(&cfg), "--out", s(dir.path())]));
    let rows = constellation_rows(&dir.path().join("constellation.csv"));
    assert_eq!(rows.iter().filter(|r| r[0] == "tx").count(), 16);
    assert_eq!(rows.iter().filter(|r| r[0] == "rx").count(), 16);
    for r in rows {
        let e1: f64 = r[10].parse().unwrap();
        let e2: f64 = r[11].parse().unwrap();
        assert!(e1 < 1e-10 && e2 < 1e-10, "{r:?}");
    }
}

#[test]
fn constellation_perturbed_follows_ratio() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL_PERTURBED);
    ok(&run(&[
        "constellation",
        "--config",
        s(&cfg),
        "--out",
        s(dir.path()),
        "--rx1-theta",
        "50",
        "--rx1-phi",
        "280",
        "--rx2-theta",
        "52",
        "--rx2-phi",
        "283",
    ]));
    let rows = constellation_rows(&dir.path().join("constellation.csv"));
    assert_eq!(rows.len(), 32);
    for r in rows.iter().filter(|r| r[0] == "tx") {
        let e: f64 = r[10].parse::<f64>().unwrap().max(r[11].parse().unwrap());
        match r[1].as_str() {
            "+1" | "-1" => assert!(e < 1e-10, "{r:?}"),
            _ => assert!(e > 1e-3, "{r:?}"),
        }
    }
}

#[test]
fn out_of_range_angle_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL_FREE);
    let out = run(&[
        "constellation",
        "--config",
        s(&cfg),
        "--out",
        s(dir.path()),
        "--rx1-theta",
        "190",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn monte_carlo_is_byte_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL_PERTURBED);
    let mut outputs = Vec::new();
    for (i, threads) in ["1", "4", "4"].iter().enumerate() {
        let out_dir = dir.path().join(format!("run{i}"));
        ok(&run(&[
            "monte-carlo",
            "--config",
            s(&cfg),
            "--out",
            s(&out_dir),
            "--threads",
            threads,
            "--seed",
            "9",
        ]));
        outputs.push(["cdf_stream1.csv", "cdf_stream2.csv"].map(|f| fs::read(out_dir.join(f)).unwrap()));
    }
    assert!(outputs.windows(2).all(|w| w[0] == w[1]));

    let report: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("run0/run_report.json")).unwrap()).unwrap();
    assert_eq!(report["scenarios"], 500);
    assert_eq!(
        report["accepted"].as_u64().unwrap() + report["rejected"].as_u64().unwrap(),
        500
    );
    assert!(report["wall_clock_s"].as_f64().is_some());

    let other = dir.path().join("other_seed");
    ok(&run(&[
        "monte-carlo",
        "--config",
        s(&cfg),
        "--out",
        s(&other),
        "--seed",
        "10",
    ]));
    assert_ne!(fs::read(other.join("cdf_stream1.csv")).unwrap(), outputs[0][0]);
}

#[test]
fn shipped_monte_carlo_stream_two_is_worse() {
    let dir = tempfile::tempdir().unwrap();
    ok(&run(&[
        "monte-carlo",
        "--config",
        s(&shipped("default.json")),
        "--out",
        s(dir.path()),
    ]));
    let report: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("run_report.json")).unwrap()).unwrap();
    let q = |stream: usize| -> Vec<(f64, f64)> {
        report["streams"][stream]["quantiles"]
            .as_array()
            .unwrap()
            .iter()
            .map(|v| (v["p"].as_f64().unwrap(), v["error"].as_f64().unwrap()))
            .collect()
    };
    for ((p, a), (_, b)) in q(0).into_iter().zip(q(1)) {
        if p >= 0.5 {
            assert!(b >= a, "quantile {p}: stream 1 {a}, stream 2 {b}");
        }
    }
}

#[test]
fn all_rejected_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"grid": {"n_theta": 19, "n_phi": 36}, "receiver": {"condition_cap": 1.0}, "monte_carlo": {"scenarios": 20}}"#,
    );
    let out = run(&["monte-carlo", "--config", s(&cfg), "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn missing_pattern_file_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"antenna": {"pattern_files": {"+1": "plus.csv", "-1": "minus.csv", "+j": "pj.csv", "-j": "mj.csv"}}}"#,
    );
    let out = run(&["metrics", "--config", s(&cfg), "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains(".csv") && stderr.contains(s(dir.path())), "{stderr}");
}

#[test]
fn pattern_files_drive_the_pipeline() {
    use beamspace::generate::generate_mirror_pair;
    use beamspace::io::save_pattern_csv;
    use beamspace::{build_grid, AntennaProfile, PskConstellation};

    let dir = tempfile::tempdir().unwrap();
    let ratios = PskConstellation::qpsk().ratio_set();
    let grid = build_grid(19, 36).unwrap();
    let set = generate_mirror_pair(&AntennaProfile::calibrated_default(), &grid, &ratios).unwrap();
    for (k, name) in ["p1", "pj", "m1", "mj"].iter().enumerate() {
        save_pattern_csv(
            dir.path().join(format!("{name}.csv")),
            set.pattern(k),
            Some(&ratios.label(k)),
            None,
        )
        .unwrap();
    }
    let cfg = write_config(
        dir.path(),
        r#"{"grid": {"n_theta": 19, "n_phi": 36},
            "antenna": {"pattern_files": {"+1": "p1.csv", "-1": "m1.csv", "+j": "pj.csv", "-j": "mj.csv"}}}"#,
    );
    let out_dir = dir.path().join("out");
    ok(&run(&["metrics", "--config", s(&cfg), "--out", s(&out_dir)]));
    let m: Value = serde_json::from_str(&fs::read_to_string(out_dir.join("metrics.json")).unwrap()).unwrap();
    assert_eq!(m["average_evm_db"], "-inf");
}

#[test]
fn bad_config_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"grid": {"n_theta": 2}}"#);
    assert_eq!(run(&["metrics", "--config", s(&cfg)]).status.code(), Some(2));
    assert_eq!(
        run(&["metrics", "--config", "/nonexistent/config.json"]).status.code(),
        Some(2)
    );
    assert_eq!(
        run(&["monte-carlo", "--scenarios", "0", "--out", s(dir.path())])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(run(&["no-such-command"]).status.code(), Some(2));
}

#[test]
fn selftest_passes() {
    let out = run(&["selftest"]);
    ok(&out);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.lines().count() >= 6);
    assert!(!stdout.contains("FAIL"));
}
