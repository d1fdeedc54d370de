//! End-to-end checks of the command-line interface: exit codes, artifact
//! layout, and the staged train/evaluate workflow.

use std::path::{Path, PathBuf};
use std::process::Command;

fn qelm() -> Command {
    Command::new(env!("CARGO_BIN_EXE_qelm"))
}

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn tiny_config(dir: &Path) -> PathBuf {
    // small scenario pointing at the shipped optimized reservoir
    let path = dir.join("tiny.toml");
    let reservoir = configs_dir().join("r1.toml");
    std::fs::write(
        &path,
        format!(
            r#"
reservoir = "{}"
seed = 5
shots = 1117
repeats = 2
prep_mode = "same_angles"
reference_separable = "VV"
reference_entangled = "psi_plus"
targets = ["W_Phi+"]
train_composition = "mixed"
test_composition = "mixed"
n_sep_train = 20
n_ent_train = 20
n_sep_test = 20
n_ent_test = 20
input_form = "frequencies"
"#,
            reservoir.display()
        ),
    )
    .unwrap();
    path
}

#[test]
fn throughput_prints_rates_and_succeeds() {
    let out = qelm().arg("throughput").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("per-outcome coincidence rate: 6.1054 Hz"), "{text}");
    assert!(text.contains("total coincidence rate: 152.6354 Hz"), "{text}");
}

#[test]
fn missing_config_is_a_config_error() {
    let out = qelm().arg("simulate").output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("--config"), "{err}");
}

#[test]
fn unreadable_config_file_is_an_io_error() {
    let out = qelm()
        .args(["--config", "/nonexistent/qelm.toml", "simulate"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn malformed_config_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("broken.toml");
    std::fs::write(&path, "seed = \"not a number\"\n").unwrap();
    let out = qelm()
        .args(["--config", path.to_str().unwrap(), "simulate"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn simulate_then_staged_train_and_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    let config = tiny_config(dir.path());
    let out_dir = dir.path().join("run");

    let out = qelm()
        .args(["--config", config.to_str().unwrap(), "--out-dir", out_dir.to_str().unwrap(), "simulate"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for file in [
        "manifest.toml",
        "summary.tsv",
        "witness_summary.tsv",
        "train_split0.jsonl",
        "test_split0.jsonl",
        "train_split0_counts.tsv",
        "test_split0_counts.tsv",
        "readout_split0.tsv",
    ] {
        assert!(out_dir.join(file).is_file(), "missing artifact {file}");
    }

    // staged training on the emitted files
    let out = qelm()
        .args([
            "--config",
            config.to_str().unwrap(),
            "--out-dir",
            out_dir.to_str().unwrap(),
            "train",
            "--dataset",
            out_dir.join("train_split0.jsonl").to_str().unwrap(),
            "--counts",
            out_dir.join("train_split0_counts.tsv").to_str().unwrap(),
            "--out",
            "staged_readout.tsv",
        ])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    // the staged readout must match the scenario's split-0 readout
    let staged = std::fs::read_to_string(out_dir.join("staged_readout.tsv")).unwrap();
    let scenario = std::fs::read_to_string(out_dir.join("readout_split0.tsv")).unwrap();
    assert_eq!(staged, scenario);

    let out = qelm()
        .args([
            "--config",
            config.to_str().unwrap(),
            "--out-dir",
            out_dir.to_str().unwrap(),
            "evaluate",
            "--readout",
            out_dir.join("staged_readout.tsv").to_str().unwrap(),
            "--dataset",
            out_dir.join("test_split0.jsonl").to_str().unwrap(),
            "--counts",
            out_dir.join("test_split0_counts.tsv").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("W_Phi+: mse_test"), "{text}");
    assert!(out_dir.join("evaluation.tsv").is_file());
}

#[test]
fn counts_schema_mismatch_is_rejected_with_a_diff() {
    let dir = tempfile::tempdir().unwrap();
    let config = tiny_config(dir.path());
    let out_dir = dir.path().join("run");
    std::fs::create_dir_all(&out_dir).unwrap();
    // emit a dataset to pair with the bad counts file
    let out = qelm()
        .args(["--config", config.to_str().unwrap(), "--out-dir", out_dir.to_str().unwrap(), "simulate"])
        .output()
        .unwrap();
    assert!(out.status.success());

    let bad_counts = dir.path().join("bad_counts.tsv");
    std::fs::write(&bad_counts, "state\tshots\tc0\n0\t10\t10\n").unwrap();
    let out = qelm()
        .args([
            "--config",
            config.to_str().unwrap(),
            "--out-dir",
            out_dir.to_str().unwrap(),
            "train",
            "--dataset",
            out_dir.join("train_split0.jsonl").to_str().unwrap(),
            "--counts",
            bad_counts.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("schema mismatch"), "{err}");
    assert!(err.contains("expected:") && err.contains("found:"), "{err}");
}

#[test]
fn sweep_subcommands_produce_tables() {
    let dir = tempfile::tempdir().unwrap();
    let config = tiny_config(dir.path());
    let out_dir = dir.path().join("sweeps");

    let out = qelm()
        .args([
            "--config",
            config.to_str().unwrap(),
            "--out-dir",
            out_dir.to_str().unwrap(),
            "--repeats",
            "2",
            "sweep-n",
            "--n-list",
            "1000,10000",
        ])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out_dir.join("sweep_n.tsv").is_file());

    let out = qelm()
        .args([
            "--config",
            config.to_str().unwrap(),
            "--out-dir",
            out_dir.to_str().unwrap(),
            "--repeats",
            "2",
            "sweep-noise",
            "--p-list",
            "0,0.5,1",
        ])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out_dir.join("sweep_noise.tsv").is_file());

    let out = qelm()
        .args([
            "--config",
            config.to_str().unwrap(),
            "--out-dir",
            out_dir.to_str().unwrap(),
            "svd-report",
            "--n-list",
            "1000",
        ])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out_dir.join("svd_report.tsv").is_file());

    let out = qelm()
        .args([
            "--config",
            config.to_str().unwrap(),
            "--out-dir",
            out_dir.to_str().unwrap(),
            "benchmark",
        ])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out_dir.join("benchmark.tsv").is_file());
    let curve = std::fs::read_to_string(out_dir.join("shadow_mse_curve.tsv")).unwrap();
    assert!(curve.contains("observable\tsubset\tn_guess\tmse"), "{curve}");
    assert!(curve.contains("min@"), "{curve}");
}

#[test]
fn optimizer_subcommand_writes_a_loadable_reservoir() {
    let dir = tempfile::tempdir().unwrap();
    let config = tiny_config(dir.path());
    let out_dir = dir.path().join("opt");
    let out = qelm()
        .args([
            "--config",
            config.to_str().unwrap(),
            "--out-dir",
            out_dir.to_str().unwrap(),
            "optimize-reservoir",
            "--budget",
            "2000",
            "--out",
            "r_opt.toml",
        ])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("objective:"), "{text}");
    // the produced file parses as a reservoir config
    qelm_core::reservoir::load_reservoir(&out_dir.join("r_opt.toml")).unwrap();
}
