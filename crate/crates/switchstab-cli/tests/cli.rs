//! End-to-end tests of the `switchstab` binary: artifact shapes, exit codes,
//! and byte-level determinism.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_switchstab"))
}

fn write(dir: &Path, name: &str, content: &str) -> std::path::PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, content).unwrap();
    path
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("binary runs")
}

const DECOUPLED_SYSTEM: &str = r#"{
  "dimension": 2,
  "modes": [
    {"id": 1, "linear": {"A": [[-1.0, 0.0], [0.0, 0.0]]}},
    {"id": 2, "linear": {"A": [[0.0, 0.0], [0.0, -1.0]]}}
  ]
}"#;

const DECOUPLED_PAIR: &str = r#"{
  "P": [[[1.0, 0.0], [0.0, 1.0]], [[1.0, 0.0], [0.0, 1.0]]],
  "C": [[[1.0, 0.0]], [[0.0, 1.0]]]
}"#;

#[test]
fn generate_validate_round_trip_and_strict_exit() {
    let dir = tempfile::tempdir().unwrap();
    let sig = dir.path().join("sig.json");
    let out = run(bin()
        .args(["generate-signal", "--class", "adt", "--tau-d", "0.5", "--n0", "2"])
        .args(["--t0", "0", "--t1", "20", "--seed", "11"])
        .arg("--out")
        .arg(&sig));
    assert!(out.status.success(), "{out:?}");

    let out = run(bin()
        .args(["validate-signal", "--class", "adt", "--tau-d", "0.5", "--n0", "2"])
        .arg("--signal")
        .arg(&sig));
    assert!(out.status.success());
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["pass"], true);

    // the documented failing example: two switches 0.5 apart under adt(1, 1)
    let bad = write(
        dir.path(),
        "bad.json",
        r#"{"t_begin": -1.0, "t_end": 10.0, "initial_mode": 1,
            "switches": [[0.0, 2], [0.5, 1]]}"#,
    );
    let out = run(bin()
        .args(["validate-signal", "--class", "adt", "--tau-d", "1", "--n0", "1", "--strict"])
        .arg("--signal")
        .arg(&bad));
    assert_eq!(out.status.code(), Some(1));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["pass"], false);
    assert_eq!(report["violation"]["kind"], "adt_bound");
}

#[test]
fn simulate_writes_the_expected_endpoint() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "sim.json",
        r#"{
          "schema": "switchstab/simulate/v1",
          "system": {"dimension": 1, "modes": [{"id": 1, "linear": {"A": [[-1.0]]}}]},
          "signal": {"t_begin": 0.0, "t_end": 1.0, "initial_mode": 1, "switches": []},
          "x0": [1.0], "span": [0.0, 1.0], "step": 0.001
        }"#,
    );
    let out = run(bin().arg("simulate").arg("--config").arg(&cfg));
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("t,x_1,mode\n"));
    let last = text.lines().last().unwrap();
    let endpoint: f64 = last.split(',').nth(1).unwrap().parse().unwrap();
    assert!((endpoint - (-1.0f64).exp()).abs() < 1e-9);
}

#[test]
fn certify_decoupled_is_certified_and_duplicate_refutes() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "sys.json", DECOUPLED_SYSTEM);
    write(dir.path(), "pair.json", DECOUPLED_PAIR);
    let cfg = write(
        dir.path(),
        "cert.json",
        r#"{"system": {"file": "sys.json"}, "pair": {"file": "pair.json"}}"#,
    );
    let out = run(bin()
        .args(["certify", "--theorem", "corollary_final", "--config"])
        .arg(&cfg));
    assert!(out.status.success());
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["verdict"], "certified");
    assert_eq!(report["predicted_limit"]["kind"], "origin");

    // duplicating mode 1 flips the kernel-intersection condition
    let dup_sys = DECOUPLED_SYSTEM
        .replace("[[0.0, 0.0], [0.0, -1.0]]", "[[-1.0, 0.0], [0.0, 0.0]]");
    write(dir.path(), "sys.json", &dup_sys);
    let dup_pair = DECOUPLED_PAIR.replace("[[[1.0, 0.0]], [[0.0, 1.0]]]", "[[[1.0, 0.0]], [[1.0, 0.0]]]");
    write(dir.path(), "pair.json", &dup_pair);
    let out = run(bin()
        .args(["certify", "--theorem", "corollary_final", "--strict", "--config"])
        .arg(&cfg));
    assert_eq!(out.status.code(), Some(1));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["verdict"], "refuted");
}

#[test]
fn exit_codes_cover_config_and_numeric_failures() {
    let dir = tempfile::tempdir().unwrap();
    // unknown theorem: config error
    let cfg = write(dir.path(), "c.json", "{}");
    let out = run(bin()
        .args(["certify", "--theorem", "guas9", "--config"])
        .arg(&cfg));
    assert_eq!(out.status.code(), Some(2));

    // malformed config json: config error with line/column diagnostics
    let broken = write(dir.path(), "broken.json", "not json");
    let out = run(bin().arg("simulate").arg("--config").arg(&broken));
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("line 1"), "{err}");

    // diverging system: numeric failure
    let blowup = write(
        dir.path(),
        "blowup.json",
        r#"{
          "system": {"dimension": 1, "modes": [{"id": 1, "linear": {"A": [[5.0]]}}]},
          "signal": {"t_begin": 0.0, "t_end": 20.0, "initial_mode": 1, "switches": []},
          "x0": [1.0], "span": [0.0, 20.0], "step": 0.01
        }"#,
    );
    let out = run(bin().arg("simulate").arg("--config").arg(&blowup));
    assert_eq!(out.status.code(), Some(3));

    // wrong schema tag: config error
    let wrong = write(
        dir.path(),
        "wrong.json",
        r#"{
          "schema": "switchstab/other/v1",
          "system": {"dimension": 1, "modes": [{"id": 1, "linear": {"A": [[-1.0]]}}]},
          "signal": {"t_begin": 0.0, "t_end": 1.0, "initial_mode": 1, "switches": []},
          "x0": [1.0], "span": [0.0, 1.0], "step": 0.01
        }"#,
    );
    let out = run(bin().arg("simulate").arg("--config").arg(&wrong));
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn ergodic_only_class_refuses_certification() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "sys.json", DECOUPLED_SYSTEM);
    write(dir.path(), "pair.json", DECOUPLED_PAIR);
    let cfg = write(
        dir.path(),
        "cert.json",
        r#"{
          "system": {"file": "sys.json"},
          "pair": {"file": "pair.json"},
          "class": {"class": "ergodic", "window": 1.0, "modes": [1, 2]}
        }"#,
    );
    let out = run(bin()
        .args(["certify", "--theorem", "guas2bis", "--config"])
        .arg(&cfg));
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("dwell"), "{err}");
    assert!(out.stdout.is_empty());
}

#[test]
fn repeated_runs_are_byte_identical_and_env_seed_overrides() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "sys.json", DECOUPLED_SYSTEM);
    let sweep = write(
        dir.path(),
        "sweep.json",
        r#"{
          "system": {"file": "sys.json"},
          "class": {"class": "intersection", "members": [
            {"class": "dwell", "tau_d": 0.5},
            {"class": "ergodic", "window": 1.0, "modes": [1, 2]}
          ]},
          "trials": 6, "ball_radius": 1.0, "horizon": 10.0, "eps": 0.01,
          "step": 0.01, "seed": 5
        }"#,
    );
    let run_sweep = |env: Option<(&str, &str)>| {
        let mut cmd = bin();
        cmd.arg("stability-sweep").arg("--config").arg(&sweep);
        if let Some((k, v)) = env {
            cmd.env(k, v);
        }
        let out = run(&mut cmd);
        assert!(out.status.success(), "{out:?}");
        out.stdout
    };
    let a = run_sweep(None);
    let b = run_sweep(None);
    assert_eq!(a, b, "identical config + seed must be byte-identical");
    let c = run_sweep(Some(("SWITCHSTAB_SEED", "77")));
    assert_ne!(a, c, "SWITCHSTAB_SEED must override the config seed");
    let d = run_sweep(Some(("SWITCHSTAB_SEED", "77")));
    assert_eq!(c, d);

    let gen = |seed_env: Option<&str>| {
        let mut cmd = bin();
        cmd.args(["generate-signal", "--class", "dwell", "--tau-d", "1"])
            .args(["--t0", "0", "--t1", "10", "--seed", "1"]);
        if let Some(v) = seed_env {
            cmd.env("SWITCHSTAB_SEED", v);
        }
        run(&mut cmd).stdout
    };
    assert_eq!(gen(None), gen(None));
    assert_ne!(gen(None), gen(Some("42")));
}

#[test]
fn limits_and_report_produce_readable_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let limits_cfg = write(
        dir.path(),
        "limits.json",
        r#"{
          "system": {"dimension": 2, "modes": [
            {"id": 1, "linear": {"A": [[0.0, 1.0], [-1.0, 0.0]]}},
            {"id": 2, "linear": {"A": [[0.0, 2.0], [-2.0, 0.0]]}}
          ]},
          "signal": {"generate": {"class": {"class": "dwell", "tau_d": 1.0},
                                  "seed": 5, "modes": [1, 2]}},
          "x0": [1.0, 0.0],
          "span": [0.0, 30.0],
          "step": 0.002,
          "cluster_tol": 0.01,
          "r_min": 0.25
        }"#,
    );
    let limits_out = dir.path().join("limits_out.json");
    let out = run(bin()
        .arg("limits")
        .arg("--config")
        .arg(&limits_cfg)
        .arg("--out")
        .arg(&limits_out));
    assert!(out.status.success(), "{out:?}");
    let value: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&limits_out).unwrap()).unwrap();
    assert!(value["omega"]["points"].as_array().unwrap().len() > 50);
    assert!(!value["omega_sharp"]["entries"].as_array().unwrap().is_empty());

    let out = run(bin().arg("report").arg("--limits").arg(&limits_out));
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("limit sets:"), "{text}");
}
