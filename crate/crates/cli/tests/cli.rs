//! End-to-end runs of the `csda` binary: exit codes and stage outputs.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const TINY: &str = r#"
[dataset]
counts = [30, 16, 12, 8]
subjects = 10
image_size = 32
seed = 3

[gan]
iterations = 6
batch_size = 2
checkpoint_every = 3

[augment]
epsilon = 0.5
num_latents = 3

[regressor]
mode = "cda(0.5)"
lr = 1e-3
max_epochs = 2
patience = 1

[eval]
folds = 2
methods = ["baseline", "classic_da", "cda_no_gan", "cda(0.5)"]
"#;

fn csda(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_csda"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

fn run_in(workdir: &Path, config: &str, cmd: &[&str]) -> Output {
    let mut args = cmd.to_vec();
    args.extend(["--config", config, "--workdir", workdir.to_str().unwrap()]);
    csda(&args)
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn full_pipeline_succeeds_and_writes_every_stage() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "tiny.toml", TINY);
    let work = tmp.path().join("work");
    for cmd in [
        &["data", "gen"][..],
        &["gan", "train"],
        &["gan", "styles", "--count", "4"],
        &["augment"],
        &["train"],
        &["evaluate"],
        &["cv"],
    ] {
        let out = run_in(&work, &cfg, cmd);
        assert_eq!(out.status.code(), Some(0), "{cmd:?}: {}", stderr(&out));
    }
    for f in [
        "data/manifest.csv",
        "data/calibration.json",
        "gan/csgan.json",
        "gan/loss_log.csv",
        "gan/summary.json",
        "gan_styles/styles.json",
        "augment_eps0.5/augmented.csv",
        "train_cda(0.5)/model.json",
        "evaluate_cda(0.5)/report.json",
        "cv/report.json",
        "cv/report.md",
    ] {
        assert!(work.join(f).is_file(), "missing {f}");
    }
    // 3 latents over the 7-point grid at ε = 0.5
    let rows = fs::read_to_string(work.join("augment_eps0.5/augmented.csv")).unwrap().lines().count();
    assert_eq!(rows, 1 + 3 * 7);
    let styles = work.join("gan_styles/styles.json");
    let out = csda(&["style", "--input", styles.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let diag: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(diag.as_array().unwrap().len(), 4);
}

#[test]
fn default_dataset_has_2054_images() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "data.toml", "[dataset]\n");
    let work = tmp.path().join("work");
    let out = run_in(&work, &cfg, &["data", "gen"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let rows = fs::read_to_string(work.join("data/manifest.csv")).unwrap().lines().count();
    assert_eq!(rows, 1 + 2054);
    assert_eq!(fs::read_dir(work.join("data/images")).unwrap().count(), 2054);
}

#[test]
fn rerunning_a_stage_is_a_runtime_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "tiny.toml", TINY);
    let work = tmp.path().join("work");
    assert_eq!(run_in(&work, &cfg, &["data", "gen"]).status.code(), Some(0));
    let again = run_in(&work, &cfg, &["data", "gen"]);
    assert_eq!(again.status.code(), Some(3));
    assert!(stderr(&again).contains("refusing to overwrite"), "{}", stderr(&again));
}

#[test]
fn missing_inputs_are_runtime_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "tiny.toml", TINY);
    let out = run_in(&tmp.path().join("empty"), &cfg, &["gan", "train"]);
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));
    let out = csda(&["style", "--input", tmp.path().join("nope.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn config_problems_exit_with_2() {
    let tmp = tempfile::tempdir().unwrap();
    let work = tmp.path().join("work");
    let cases = [
        ("no_gan.toml", "[dataset]\n", &["gan", "train"][..]),
        ("unknown_key.toml", "[dataset]\nbogus = 1\n", &["data", "gen"]),
        ("malformed.toml", "[dataset\n", &["data", "gen"]),
        ("bad_lr.toml", "[gan]\nlr = -1.0\n", &["gan", "train"]),
        ("bad_method.toml", "[regressor]\nmode = \"cda(zero)\"\n", &["train"]),
    ];
    for (name, text, cmd) in cases {
        let cfg = write_config(tmp.path(), name, text);
        let out = run_in(&work, &cfg, cmd);
        assert_eq!(out.status.code(), Some(2), "{name}: {}", stderr(&out));
    }
    assert_eq!(csda(&["data", "gen"]).status.code(), Some(2));
    assert_eq!(csda(&["frobnicate"]).status.code(), Some(2));
    let missing = tmp.path().join("absent.toml");
    assert_eq!(csda(&["data", "gen", "--config", missing.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn epsilon_off_the_grid_rule_exits_with_2() {
    let tmp = tempfile::tempdir().unwrap();
    let work = tmp.path().join("work");
    let cfg = write_config(tmp.path(), "tiny.toml", TINY);
    assert_eq!(run_in(&work, &cfg, &["data", "gen"]).status.code(), Some(0));
    let bad = write_config(tmp.path(), "eps.toml", &TINY.replace("epsilon = 0.5", "epsilon = 0.3"));
    let out = run_in(&work, &bad, &["augment"]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
    assert!(!work.join("augment_eps0.3").exists());
}

#[test]
fn seed_override_changes_the_data() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "tiny.toml", TINY);
    let read = |seed: &str, name: &str| {
        let work = tmp.path().join(name);
        let mut args = vec!["data", "gen", "--config", &cfg, "--workdir", work.to_str().unwrap()];
        args.extend(["--seed", seed]);
        assert_eq!(csda(&args).status.code(), Some(0));
        fs::read(work.join("data/manifest.csv")).unwrap()
    };
    let a = read("1", "a");
    let b = read("1", "b");
    let c = read("2", "c");
    assert_eq!(a, b);
    assert_ne!(a, c);
}
