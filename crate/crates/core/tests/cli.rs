//! The `asdiff` binary as a user runs it.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn asdiff(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_asdiff"))
        .args(args)
        .env_remove("ASDIFF_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn predict_prints_bounds() {
    let out = asdiff(&[
        "predict", "--V", "20", "--beta", "0.68", "--sigma2-min", "0.1", "--sigma2-max", "0.4",
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("lower = 2.941176"), "{text}");
    assert!(text.contains("upper = 11.764706"), "{text}");
}

#[test]
fn predict_rejects_small_beta() {
    let out = asdiff(&[
        "predict", "--V", "20", "--beta", "0.2", "--sigma2-min", "0.1", "--sigma2-max", "0.4",
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn missing_config_is_a_config_error() {
    let out = asdiff(&["run", "--config", "missing.cfg"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("missing.cfg"), "{err}");
}

#[test]
fn unknown_preset_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = asdiff(&["preset", "fig_unknown", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("run.toml");
    fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_owned()
}

const SMALL: &str = r#"
run.name = "small"
run.iterations = 400
run.realizations = 2
run.export_bitmap = true
env.filter_order = 8
env.flip_iteration = 200
policy.kind = "as_sampling"
policy.beta = 0.68
policy.mu_s = 0.1571
"#;

#[test]
fn validate_and_run_agree() {
    let dir = tempfile::tempdir().unwrap();
    let good = write_config(dir.path(), SMALL);
    assert!(asdiff(&["validate", "--config", &good]).status.success());

    let out_dir = dir.path().join("out");
    let run = asdiff(&["run", "--config", &good, "--out", out_dir.to_str().unwrap()]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));

    let csv = fs::read_to_string(out_dir.join("small.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("n,msd_db,msd_db_smoothed,sampled,comms,mults,adds"));
    assert_eq!(lines.count(), 400);
    let manifest = fs::read_to_string(out_dir.join("small.manifest.toml")).unwrap();
    let parsed: toml::Table = toml::from_str(&manifest).unwrap();
    assert!(parsed.contains_key("prediction"));
    assert_eq!(parsed["noise_variance"].as_array().unwrap().len(), 20);
    let bitmap = fs::read_to_string(out_dir.join("small.sampled.txt")).unwrap();
    assert_eq!(bitmap.lines().count(), 400);

    let bad = write_config(dir.path(), &SMALL.replace("0.1571", "-0.1571"));
    let v = asdiff(&["validate", "--config", &bad]);
    let r = asdiff(&["run", "--config", &bad]);
    assert_eq!(v.status.code(), Some(1));
    assert_eq!(r.status.code(), Some(1));
}

#[test]
fn out_dir_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &SMALL.replace("run.export_bitmap = true", ""));
    let target = dir.path().join("env_out");
    let out = Command::new(env!("CARGO_BIN_EXE_asdiff"))
        .args(["run", "--config", &cfg])
        .env("ASDIFF_OUT_DIR", &target)
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(target.join("small.csv").exists());
}

#[test]
fn unwritable_output_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let blocker = dir.path().join("file");
    fs::write(&blocker, "").unwrap();
    let out = asdiff(&["run", "--config", &cfg, "--out", blocker.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn beta_sweep_preset_writes_curves_and_bounds() {
    let dir = tempfile::tempdir().unwrap();
    let out = asdiff(&[
        "preset",
        "fig_beta_sweep",
        "--realizations",
        "1",
        "--iterations",
        "300",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let sweep = dir.path().join("fig_beta_sweep");
    let csvs = fs::read_dir(&sweep)
        .unwrap()
        .filter(|e| {
            let name = e.as_ref().unwrap().file_name();
            let name = name.to_string_lossy();
            name.starts_with("beta_ratio_") && name.ends_with(".csv")
        })
        .count();
    assert_eq!(csvs, 7);
    let bounds = fs::read_to_string(sweep.join("bounds.csv")).unwrap();
    assert_eq!(bounds.lines().next(), Some("ratio,beta,lower,upper,measured"));
    assert_eq!(bounds.lines().count(), 8);
}

#[test]
fn shipped_config_validates() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/default.toml");
    let out = asdiff(&["validate", "--config", path]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn usage_errors_exit_with_config_status() {
    assert_eq!(asdiff(&["predict", "--V", "20"]).status.code(), Some(1));
    assert_eq!(asdiff(&["frobnicate"]).status.code(), Some(1));
    assert!(asdiff(&["--help"]).status.success());
}

#[test]
fn small_beta_runs_without_prediction() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &SMALL.replace("0.68", "0.2"));
    let out_dir = dir.path().join("out");
    let run = asdiff(&["run", "--config", &cfg, "--out", out_dir.to_str().unwrap()]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let manifest = fs::read_to_string(out_dir.join("small.manifest.toml")).unwrap();
    assert!(!manifest.contains("[prediction]"));
}
