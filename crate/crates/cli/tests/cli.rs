use std::path::Path;
use std::process::{Command, Output};

fn ethseq(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ethseq"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = ethseq(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Runs the tiny pipeline through phishing evaluation and returns the report.
fn pipeline(root: &Path, threads: &str) -> String {
    let d = |n: &str| root.join(n);
    let common = ["--preset", "tiny", "--seed", "7", "--threads", threads];
    let with = |rest: &[&str]| -> Vec<String> { common.iter().chain(rest).map(|a| a.to_string()).collect() };
    let ok = |args: Vec<String>| ok(&args.iter().map(String::as_str).collect::<Vec<_>>());
    ok(with(&["synthgen", "--out", s(&d("raw"))]));
    ok(with(&["ingest", "--input", s(&d("raw")), "--out", s(&d("ing"))]));
    ok(with(&["build-seqs", "--corpus", s(&d("ing")), "--out", s(&d("seqs"))]));
    ok(with(&["pretrain", "--seqs", s(&d("seqs")), "--out", s(&d("pt")), "--epochs", "2"]));
    ok(with(&["extract", "--checkpoint", s(&d("pt")), "--seqs", s(&d("seqs")), "--out", s(&d("rep"))]));
    ok(with(&["eval-phish", "--reps", s(&d("rep")), "--out", s(&d("ph")), "--runs", "2"]));
    std::fs::read_to_string(d("ph").join("report.csv")).unwrap()
}

#[test]
fn help_exits_zero() {
    let out = ethseq(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    for sub in ["synthgen", "ingest", "build-seqs", "pretrain", "finetune", "extract", "eval-phish", "eval-deanon", "diag-attention", "probe-3hop"] {
        assert!(text.contains(sub), "help lacks {sub}");
    }
}

#[test]
fn unknown_flag_is_a_usage_error() {
    assert_eq!(ethseq(&["pretrain", "--no-such-flag"]).status.code(), Some(1));
}

#[test]
fn invalid_config_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "mask_ratio = 2.0\n").unwrap();
    let out = ethseq(&["--config", s(&cfg), "pretrain", "--seqs", s(dir.path()), "--out", s(&dir.path().join("o"))]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("mask_ratio"));
}

#[test]
fn missing_input_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nowhere");
    let out = ethseq(&["pretrain", "--seqs", s(&missing), "--out", s(&dir.path().join("o"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains(s(&missing)));
}

#[test]
fn tiny_pipeline_is_deterministic_across_thread_counts() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let one = pipeline(a.path(), "1");
    let four = pipeline(b.path(), "4");
    assert!(one.contains("f1"), "report lacks f1: {one}");
    assert_eq!(one, four);
    let bytes = |root: &Path, f: &str| std::fs::read(root.join(f)).unwrap();
    for f in ["raw/transactions.csv", "seqs/sequences.bin", "pt/checkpoint.bin", "rep/representations.csv"] {
        assert_eq!(bytes(a.path(), f), bytes(b.path(), f), "{f} differs");
    }
    let manifest: serde_json::Value =
        serde_json::from_slice(&bytes(a.path(), "pt/manifest.json")).unwrap();
    let other: serde_json::Value = serde_json::from_slice(&bytes(b.path(), "pt/manifest.json")).unwrap();
    assert_eq!(manifest["config_hash"], other["config_hash"]);
    assert_eq!(manifest["seed"], 7);
}

#[test]
fn downstream_stages_run_on_tiny_outputs() {
    let root = tempfile::tempdir().unwrap();
    let r = root.path();
    pipeline(r, "0");
    let d = |n: &str| r.join(n);
    ok(&["eval-deanon", "--reps", s(&d("rep")), "--pairs", s(&d("raw/pairs.csv")), "--out", s(&d("de")), "--ks", "1,10"]);
    let report = std::fs::read_to_string(d("de/report.csv")).unwrap();
    assert!(report.contains("hr@10"));
    ok(&["--format", "json", "diag-attention", "--checkpoint", s(&d("pt")), "--seqs", s(&d("seqs")), "--out", s(&d("at"))]);
    assert!(d("at/attention.json").exists());
    ok(&["--preset", "tiny", "finetune", "--seqs", s(&d("seqs")), "--checkpoint", s(&d("pt")), "--out", s(&d("ft"))]);
    assert!(d("ft/checkpoint.bin").exists());
    ok(&["--preset", "tiny", "pretrain", "--seqs", s(&d("seqs")), "--out", s(&d("raw0")), "--no-pretrain"]);
    ok(&["extract", "--checkpoint", s(&d("raw0")), "--seqs", s(&d("seqs")), "--out", s(&d("rep0")), "--mode", "address"]);
    assert!(d("rep0/representations.csv").exists());
    let bad = ethseq(&["diag-attention", "--checkpoint", s(&d("pt")), "--seqs", s(&d("seqs")), "--out", s(&d("x")), "--layer", "9"]);
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn probe_runs_with_few_epochs() {
    let root = tempfile::tempdir().unwrap();
    let out = root.path().join("probe");
    ok(&["--format", "json", "probe-3hop", "--out", s(&out), "--seeds", "1", "--per-edge", "4", "--epochs", "2"]);
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("probe.json")).unwrap()).unwrap();
    assert_eq!(summary["runs"].as_array().unwrap().len(), 1);
}
