//! Black-box tests of the `ldc` binary: exit codes, flag validation, config
//! merging, and output-file determinism.

use std::path::Path;
use std::process::{Command, Output};

fn ldc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ldc"))
        .args(args)
        .env_remove("LDC_THREADS")
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// First float following a `label value` pair on stdout.
fn field(out: &Output, label: &str) -> f64 {
    let text = stdout(out);
    for window in text.split_whitespace().collect::<Vec<_>>().windows(2) {
        if window[0] == label {
            return window[1]
                .parse()
                .unwrap_or_else(|_| panic!("field {label} in: {text}"));
        }
    }
    panic!("no field {label} in: {text}");
}

#[test]
fn bound_only_prints_the_closed_forms() {
    let out = ldc(&[
        "min-n",
        "--task",
        "memorization",
        "--m",
        "100",
        "--k",
        "10",
        "--tau",
        "0.9",
        "--bound-only",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let bound = field(&out, "bound");
    assert!((bound - 218.62200521097285).abs() < 1e-4);

    let out = ldc(&[
        "min-n",
        "--task",
        "bijection",
        "--k",
        "10",
        "--tau",
        "0.9",
        "--bound-only",
    ]);
    assert!(out.status.success());
    assert!((field(&out, "bound") - 7.212567439010779).abs() < 1e-6);
}

#[test]
fn tv_subcommand_prints_deltas() {
    let out = ldc(&["tv", "--gaussian", "--dist", "2.0"]);
    assert!(out.status.success());
    assert_eq!(stdout(&out).trim(), "0.682689");

    let out = ldc(&["tv", "--u", "0.5,0.5", "--v", "0.8,0.2"]);
    assert!(out.status.success());
    assert_eq!(stdout(&out).trim(), "0.300000");

    let out = ldc(&[
        "tv",
        "--gaussian",
        "--mu",
        "[0.0,0.0]",
        "--mu2",
        "[2.0,0.0]",
    ]);
    assert_eq!(stdout(&out).trim(), "0.682689");
}

#[test]
fn exit_codes_follow_the_contract() {
    // 0: help screens.
    assert!(ldc(&["--help"]).status.success());
    assert!(ldc(&["min-n", "--help"]).status.success());

    // 1: unknown subcommand, unknown flag, bad values, missing params.
    assert_eq!(ldc(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(
        ldc(&[
            "min-n",
            "--task",
            "bijection",
            "--k",
            "10",
            "--no-such-flag"
        ])
        .status
        .code(),
        Some(1)
    );
    assert_eq!(
        ldc(&["min-n", "--task", "bijection", "--bound-only"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(ldc(&["tv"]).status.code(), Some(1));
    assert_eq!(
        ldc(&[
            "attack",
            "--task",
            "bijection",
            "--k",
            "4",
            "--defense",
            "dpa"
        ])
        .status
        .code(),
        Some(1)
    );

    // validation messages name the flag
    let missing_k = ldc(&["min-n", "--task", "bijection", "--bound-only"]);
    assert!(stderr(&missing_k).contains("--k"), "{}", stderr(&missing_k));

    // 2: runtime failure (search cap exhausted).
    let out = ldc(&[
        "min-n",
        "--task",
        "memorization",
        "--m",
        "50",
        "--k",
        "5",
        "--tau",
        "0.99",
        "--trials",
        "100",
        "--cap",
        "4",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("cap"), "{}", stderr(&out));
}

#[test]
fn tau_outside_the_bound_range_is_rejected() {
    // Range checks on flags are validation failures, not runtime ones.
    let out = ldc(&[
        "min-n",
        "--task",
        "bijection",
        "--k",
        "10",
        "--tau",
        "0.4",
        "--bound-only",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("tau"), "{}", stderr(&out));

    let out = ldc(&[
        "accuracy",
        "--task",
        "bijection",
        "--k",
        "4",
        "--trials",
        "10",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("trials"), "{}", stderr(&out));
}

#[test]
fn config_file_supplies_values_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.json");
    std::fs::write(
        &config,
        r#"{"task": "memorization", "m": 100, "k": 10, "tau": 0.9, "bound_only": true}"#,
    )
    .unwrap();
    let from_file = ldc(&["min-n", "--config", config.to_str().unwrap()]);
    assert!(from_file.status.success(), "{}", stderr(&from_file));
    assert!((field(&from_file, "bound") - 218.622005).abs() < 1e-4);

    // A flag wins over the file: tau 0.5 changes the bound.
    let overridden = ldc(&[
        "min-n",
        "--config",
        config.to_str().unwrap(),
        "--tau",
        "0.5",
    ]);
    assert!(overridden.status.success(), "{}", stderr(&overridden));
    let expected = ((0.5f64).ln() + (10.0f64 / 9.0).ln()) / (0.99f64).ln();
    assert!((field(&overridden, "bound") - expected).abs() < 1e-4);

    let bad_config = dir.path().join("broken.json");
    std::fs::write(&bad_config, "not json").unwrap();
    assert_eq!(
        ldc(&["min-n", "--config", bad_config.to_str().unwrap()])
            .status
            .code(),
        Some(1)
    );
}

#[test]
fn certify_check_verifies_and_refutes() {
    let out = ldc(&[
        "certify-check",
        "--m",
        "3",
        "--k",
        "2",
        "--copies",
        "2",
        "--k-part",
        "3",
        "--t-max",
        "2",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).contains("verified"), "{}", stdout(&out));

    // The frozen tie-margin fixture with an inflated claim.
    let out = ldc(&[
        "certify-check",
        "--m",
        "3",
        "--k",
        "2",
        "--base",
        "radius_nn",
        "--r",
        "3.0",
        "--dataset-json",
        "[[0,0],[0,1]]",
        "--k-part",
        "3",
        "--t-max",
        "1",
        "--claim-extra",
        "1",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).contains("violation"), "{}", stdout(&out));
}

#[test]
fn attack_csv_is_identical_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let run = |threads: &str, name: &str| -> Vec<u8> {
        let path = dir.path().join(name);
        let out = ldc(&[
            "attack",
            "--task",
            "memorization",
            "--m",
            "30",
            "--k",
            "3",
            "--attack",
            "removal",
            "--n-total",
            "200",
            "--trials",
            "100",
            "--seed",
            "9",
            "--threads",
            threads,
            "--out",
            path.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "{}", stderr(&out));
        std::fs::read(&path).unwrap()
    };
    let a = run("1", "a.csv");
    let b = run("4", "b.csv");
    let c = run("1", "c.csv");
    assert_eq!(a, b, "thread count changed the CSV bytes");
    assert_eq!(a, c, "rerun changed the CSV bytes");
    assert!(!a.is_empty());

    // The manifest rides along.
    assert!(Path::new(&dir.path().join("a.csv.manifest.json")).exists());
}

#[test]
fn sweep_emits_one_csv_row_per_grid_point() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sweep.csv");
    let out = ldc(&[
        "sweep",
        "--task",
        "bijection",
        "--grid",
        "4,8",
        "--tau",
        "0.75",
        "--N",
        "400",
        "--trials",
        "600",
        "--seed",
        "7",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).contains("product ratio"), "{}", stdout(&out));
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "family,param,tau,n_hat,lethal_expected,N,product"
    );
    assert_eq!(lines.count(), 2);
}

#[test]
fn accuracy_writes_csv_with_header() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("acc.csv");
    let out = ldc(&[
        "accuracy",
        "--task",
        "bijection",
        "--k",
        "4",
        "--n",
        "1",
        "--trials",
        "500",
        "--seed",
        "3",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "task,learner,x0,n,trials,p_hat,ci_low,ci_high"
    );
    assert_eq!(lines.count(), 1);
    let manifest: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("acc.csv.manifest.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(manifest["seed"], 3);
    assert!(manifest["content_hash"].as_str().unwrap().len() == 64);
}

#[test]
fn env_var_mirrors_threads_flag() {
    let out = Command::new(env!("CARGO_BIN_EXE_ldc"))
        .args(["tv", "--gaussian", "--dist", "2.0"])
        .env("LDC_THREADS", "2")
        .output()
        .unwrap();
    assert!(out.status.success());

    let bad = Command::new(env!("CARGO_BIN_EXE_ldc"))
        .args(["tv", "--gaussian", "--dist", "2.0"])
        .env("LDC_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("LDC_THREADS"));
}
