use std::path::Path;
use std::process::{Command, Output};

fn wzmap(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wzmap"))
        .arg("--out")
        .arg(dir)
        .args(args)
        .output()
        .unwrap()
}

#[test]
fn missing_trajectories_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let out = wzmap(dir.path(), &["fit-gmm"]);
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("missing-artifact"), "{err}");
    assert!(err.contains("trajectories.csv"), "{err}");
}

#[test]
fn bad_config_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[grid]\nno_such_key = 1\n").unwrap();
    let out = wzmap(dir.path(), &["--config", cfg.to_str().unwrap(), "gen-workzone"]);
    assert_eq!(out.status.code(), Some(2));
    let missing = wzmap(dir.path(), &["--config", "/nonexistent/cfg.toml", "gen-workzone"]);
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn shown_config_loads_back() {
    let dir = tempfile::tempdir().unwrap();
    let out = wzmap(dir.path(), &["show-config"]);
    assert!(out.status.success());
    let cfg = dir.path().join("shown.toml");
    std::fs::write(&cfg, &out.stdout).unwrap();
    let loaded = wzmap::config::PipelineConfig::load(&cfg).unwrap();
    assert_eq!(loaded, wzmap::config::PipelineConfig::default());
}

#[test]
fn seed_flag_changes_synthesis() {
    let dir = tempfile::tempdir().unwrap();
    let read = |seed: &str| {
        let out = wzmap(dir.path(), &["--quiet", "--seed", seed, "gen-workzone"]);
        assert!(out.status.success());
        let out = wzmap(dir.path(), &["--quiet", "--seed", seed, "synth-traj"]);
        assert!(out.status.success());
        std::fs::read(dir.path().join("trajectories.csv")).unwrap()
    };
    let a = read("1");
    assert_eq!(a, read("1"));
    assert_ne!(a, read("2"));
}
