use std::path::Path;

use brownian_liquid::cli::main_with_args;

fn run(config: &str, dir: &Path, cmd: &[&str]) -> i32 {
    let cfg = dir.join("run.toml");
    std::fs::write(&cfg, config).unwrap();
    let out = dir.join("out");
    let mut args = vec!["brownian-liquid", "--config", cfg.to_str().unwrap(), "--out-dir", out.to_str().unwrap()];
    args.extend_from_slice(cmd);
    main_with_args(args)
}

#[test]
fn unknown_config_field_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(run("seed = 1\nsweeps = 3\n", tmp.path(), &["sample"]), 2);
}

#[test]
fn bad_radius_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(run("[model]\nn = 2\nradius = 3.0\n", tmp.path(), &["sample"]), 2);
}

#[test]
fn unknown_subcommand_is_a_config_error() {
    assert_eq!(main_with_args(["brownian-liquid", "teleport"]), 2);
}

#[test]
fn failed_experiment_exits_one() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = "seed = 3\n[model]\nn = 3\nradius = 0.2\n\
               [experiment.concentration]\nlambdas = [0.1, 0.2]\nepsilon = 0.01\nthreshold = 1.0\nc1_restarts = 1\n\
               [experiment.concentration.plan]\nramp_stages = 0\nburn_in = 100\nsamples = 200\nthin = 2\n";
    assert_eq!(run(cfg, tmp.path(), &["experiment", "concentration"]), 1);
    assert!(tmp.path().join("out/concentration.json").exists());
}

#[test]
fn check_vessel_passes_and_writes_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(run("seed = 1\n", tmp.path(), &["check-vessel", "--a", "1.0", "--b-max", "20"]), 0);
    for f in ["config.resolved.toml", "vessel_check.json", "vessel_check.v1.csv"] {
        assert!(tmp.path().join("out").join(f).exists(), "{f} missing");
    }
}

#[test]
fn resolved_config_reloads() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = "seed = 9\n[model]\nn = 4\nradius = 0.1\n[sample]\nsweeps = 300\nthin = 3\nburn_in = 30\n";
    assert_eq!(run(cfg, tmp.path(), &["sample"]), 0);
    let resolved = tmp.path().join("out/config.resolved.toml");
    let again = brownian_liquid::cli::RunConfig::from_file(&resolved).unwrap();
    assert_eq!(again.seed, 9);
    assert!(tmp.path().join("out/snapshots.jsonl").exists());
}
