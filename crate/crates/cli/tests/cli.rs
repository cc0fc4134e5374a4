use std::path::Path;
use std::process::{Command, Output};

fn run(dir: &Path, config: &str, cmd: &str) -> Output {
    let cfg = dir.join("config.json");
    std::fs::write(&cfg, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_coopstab"))
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("out"))
        .arg(cmd)
        .output()
        .unwrap()
}

#[test]
fn malformed_config_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), "{\"model\": ", "equilibria");
    assert_eq!(out.status.code(), Some(2));
    let out = run(dir.path(), r#"{"model": {"type": "ou", "lambda": 1.0}, "bogus": 1}"#, "equilibria");
    assert_eq!(out.status.code(), Some(2));
    let out = run(dir.path(), r#"{"model": {"type": "griffith", "alphas": [-1.0, 1.0], "m": 2.0}}"#, "equilibria");
    assert_eq!(out.status.code(), Some(2));
    assert!(!String::from_utf8_lossy(&out.stderr).is_empty());
}

#[test]
fn missing_block_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), r#"{"model": {"type": "ou", "lambda": 1.0}}"#, "simulate");
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unreadable_config_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_coopstab"))
        .args(["--config", dir.path().join("absent.json").to_str().unwrap(), "equilibria"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn blow_up_is_numerical_and_keeps_the_partial_path() {
    let dir = tempfile::tempdir().unwrap();
    let config = r#"{
        "model": {"type": "griffith", "alphas": [0.4, 1.0], "m": 2.0},
        "seed": 3,
        "simulate": {"x0": [2.0, 2.0], "eps": 5.0, "t": 50.0, "step": 0.01, "blowup_guard": 10.0}
    }"#;
    let out = run(dir.path(), config, "simulate");
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    let partial = std::fs::read_to_string(dir.path().join("out/trajectory.partial.csv")).unwrap();
    assert!(partial.lines().count() > 2);
    assert!(!dir.path().join("out/trajectory.csv").exists());
}

#[test]
fn commands_succeed_and_write_json() {
    let dir = tempfile::tempdir().unwrap();
    let config = r#"{
        "model": {"type": "griffith", "alphas": [0.4, 1.0], "m": 2.0},
        "seed": 1,
        "equilibria": {"seeds": [[3.0, 3.0]]},
        "simulate": {"x0": [0.5, 0.5], "eps": 0.1, "t": 1.0, "n_paths": 3},
        "quasipotential": {"x": [2.0, 2.0], "y": [0.5, 0.5], "t_grid": [5.0], "n_segments": 40},
        "table1": {"eps": [0.2], "rule": {"base": 20.0, "reference_eps": 0.2, "cap": 100.0}}
    }"#;
    for (cmd, file) in [
        ("equilibria", "equilibria.json"),
        ("simulate", "simulate.json"),
        ("quasipotential", "quasipotential.json"),
        ("verify", "verify.json"),
        ("table1", "table1.json"),
    ] {
        let out = run(dir.path(), config, cmd);
        assert_eq!(out.status.code(), Some(0), "{cmd}: {}", String::from_utf8_lossy(&out.stderr));
        let text = std::fs::read_to_string(dir.path().join("out").join(file)).unwrap();
        serde_json::from_str::<serde_json::Value>(&text).unwrap();
    }
}

#[test]
fn equal_seeds_reproduce_outputs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let config = r#"{
        "model": {"type": "griffith", "alphas": [0.5, 1.0], "m": 1.0, "sigma": {"type": "linear", "c": 0.5}},
        "seed": 42,
        "stationary": {"x0": [1.0, 1.0], "eps": 0.2, "t_total": 20.0}
    }"#;
    run(a.path(), config, "stationary");
    run(b.path(), config, "stationary");
    for f in ["stationary.json", "histogram.csv"] {
        assert_eq!(
            std::fs::read(a.path().join("out").join(f)).unwrap(),
            std::fs::read(b.path().join("out").join(f)).unwrap()
        );
    }
}
