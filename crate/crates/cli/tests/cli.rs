//! Golden-file tests for the real binary.
//!
//! Every subcommand runs on committed fixture inputs (`tests/fixtures/`) and
//! must exit 0 while reproducing the committed golden outputs byte-for-byte.
//! The fixtures are regenerated by `cargo run -p maskvqa --example
//! gen_fixtures`; a behavior change therefore shows up as a golden diff in
//! review, never as a silent drift.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use maskvqa::tensor_file::Tensor;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_maskvqa")
}

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

fn run(args: &[&str]) -> Output {
    Command::new(bin())
        .args(args)
        .output()
        .expect("spawn maskvqa binary")
}

fn run_ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(
        out.status.success(),
        "maskvqa {:?} failed with {:?}\nstdout: {}\nstderr: {}",
        args,
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

/// Asserts two files hold identical bytes, naming the first difference.
fn assert_same_bytes(actual: &Path, golden: &Path) {
    let a = std::fs::read(actual)
        .unwrap_or_else(|e| panic!("reading {}: {e}", actual.display()));
    let g = std::fs::read(golden)
        .unwrap_or_else(|e| panic!("reading {}: {e}", golden.display()));
    if a == g {
        return;
    }
    let first = a
        .iter()
        .zip(g.iter())
        .position(|(x, y)| x != y)
        .unwrap_or_else(|| a.len().min(g.len()));
    panic!(
        "{} differs from golden {} (lengths {} vs {}, first difference at byte {first})",
        actual.display(),
        golden.display(),
        a.len(),
        g.len()
    );
}

fn s(p: &Path) -> String {
    p.to_str().expect("utf-8 path").to_owned()
}

#[test]
fn decode_masks_reproduces_goldens() {
    let f = fixtures();
    let tmp = tempfile::tempdir().expect("tempdir");
    let masks = tmp.path().join("masks.mqt");
    let scores = tmp.path().join("scores.mqt");
    let report = tmp.path().join("report.json");
    run_ok(&[
        "decode-masks",
        "--features",
        &s(&f.join("decode/features.mqt")),
        "--kernels",
        &s(&f.join("decode/kernels.mqt")),
        "--categories",
        &s(&f.join("decode/categories.mqt")),
        "--config",
        &s(&f.join("toy.toml")),
        "--out-masks",
        &s(&masks),
        "--out-scores",
        &s(&scores),
        "--out-report",
        &s(&report),
    ]);
    assert_same_bytes(&masks, &f.join("decode/golden/masks.mqt"));
    assert_same_bytes(&scores, &f.join("decode/golden/scores.mqt"));
    assert_same_bytes(&report, &f.join("decode/golden/report.json"));
}

#[test]
fn nms_duplicate_mask_decays_to_zero_and_matches_golden() {
    let f = fixtures();
    let tmp = tempfile::tempdir().expect("tempdir");
    let report = tmp.path().join("report_pair.json");
    run_ok(&[
        "nms",
        "--masks",
        &s(&f.join("nms/masks_pair.mqt")),
        "--scores",
        &s(&f.join("nms/scores_pair.mqt")),
        "--config",
        &s(&f.join("toy.toml")),
        "--out-report",
        &s(&report),
    ]);
    assert_same_bytes(&report, &f.join("nms/golden/report_pair.json"));
    // The fixture's point: an exact duplicate of a higher-scoring mask is
    // fully suppressed, not merely down-weighted.
    let json: serde_json::Value =
        serde_json::from_slice(&std::fs::read(&report).expect("read report")).expect("json");
    assert_eq!(json["masks"][1]["updated_score"], 0.0);
    assert_eq!(json["masks"][1]["kept"], false);
    assert_eq!(json["kept"], serde_json::json!([0]));
}

#[test]
fn nms_random_blobs_match_golden() {
    let f = fixtures();
    let tmp = tempfile::tempdir().expect("tempdir");
    let report = tmp.path().join("report_rand.json");
    run_ok(&[
        "nms",
        "--masks",
        &s(&f.join("nms/masks_rand.mqt")),
        "--scores",
        &s(&f.join("nms/scores_rand.mqt")),
        "--config",
        &s(&f.join("toy.toml")),
        "--out-report",
        &s(&report),
    ]);
    assert_same_bytes(&report, &f.join("nms/golden/report_rand.json"));
}

#[test]
fn separate_reproduces_goldens() {
    let f = fixtures();
    let tmp = tempfile::tempdir().expect("tempdir");
    run_ok(&[
        "separate",
        "--features",
        &s(&f.join("separate/features.mqt")),
        "--masks",
        &s(&f.join("separate/masks.mqt")),
        "--config",
        &s(&f.join("toy.toml")),
        "--out-dir",
        &s(tmp.path()),
    ]);
    for name in [
        "instance_view.mqt",
        "background_view.mqt",
        "fused_mask.mqt",
        "background.ppm",
        "report.json",
    ] {
        assert_same_bytes(&tmp.path().join(name), &f.join("separate/golden").join(name));
    }
}

#[test]
fn train_reproduces_goldens() {
    let f = fixtures();
    let tmp = tempfile::tempdir().expect("tempdir");
    run_ok(&[
        "train",
        "--data",
        &s(&f.join("dataset")),
        "--config",
        &s(&f.join("toy.toml")),
        "--out-dir",
        &s(tmp.path()),
    ]);
    for name in ["checkpoint.mqta", "metrics.jsonl", "predictions.mqt"] {
        assert_same_bytes(&tmp.path().join(name), &f.join("train/golden").join(name));
    }
}

#[test]
fn eval_reproduces_golden() {
    let f = fixtures();
    let tmp = tempfile::tempdir().expect("tempdir");
    let report = tmp.path().join("report.json");
    run_ok(&[
        "eval",
        "--predictions",
        &s(&f.join("train/golden/predictions.mqt")),
        "--annotations",
        &s(&f.join("dataset/annotations.jsonl")),
        "--out-report",
        &s(&report),
    ]);
    assert_same_bytes(&report, &f.join("eval/golden/report.json"));
}

#[test]
fn gradcheck_exits_zero_and_reproduces_report() {
    let f = fixtures();
    let tmp = tempfile::tempdir().expect("tempdir");
    let report = tmp.path().join("report.json");
    let out = run_ok(&[
        "gradcheck",
        "--seed",
        "7",
        "--out-report",
        &s(&report),
    ]);
    assert!(
        String::from_utf8_lossy(&out.stdout).contains("PASS"),
        "gradcheck stdout should report PASS"
    );
    assert_same_bytes(&report, &f.join("gradcheck/golden/report.json"));
}

#[test]
fn synth_data_reproduces_goldens() {
    let f = fixtures();
    let tmp = tempfile::tempdir().expect("tempdir");
    run_ok(&[
        "synth-data",
        "--out-dir",
        &s(tmp.path()),
        "--count",
        "4",
        "--seed",
        "3",
    ]);
    for name in [
        "features.mqt",
        "masks.mqt",
        "labels.mqt",
        "questions.txt",
        "annotations.jsonl",
        "answers.txt",
    ] {
        assert_same_bytes(&tmp.path().join(name), &f.join("synth/golden").join(name));
    }
}

#[test]
fn iou_stats_reproduces_golden() {
    let f = fixtures();
    let tmp = tempfile::tempdir().expect("tempdir");
    let report = tmp.path().join("stats.json");
    run_ok(&[
        "iou-stats",
        "--out-report",
        &s(&report),
        &s(&f.join("nms/masks_rand.mqt")),
        &s(&f.join("separate/masks.mqt")),
    ]);
    assert_same_bytes(&report, &f.join("iou/golden/stats.json"));
}

#[test]
fn unknown_subcommand_fails_with_usage() {
    let out = run(&["frobnicate"]);
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(
        stderr.contains("Usage") || stderr.contains("unrecognized subcommand"),
        "stderr should point at usage, got: {stderr}"
    );
}

#[test]
fn help_exits_zero() {
    run_ok(&["--help"]);
}

#[test]
fn invalid_mask_values_fail_before_any_output_is_written() {
    let tmp = tempfile::tempdir().expect("tempdir");
    let bad = tmp.path().join("bad_masks.mqt");
    // 0.5 is neither background nor foreground; validation must reject it.
    Tensor::from_f32(vec![1, 2, 2], vec![1.0, 0.0, 0.5, 0.0])
        .expect("dims match data")
        .save(&bad)
        .expect("write bad mask");
    let scores = tmp.path().join("scores.mqt");
    Tensor::from_f64(vec![1], vec![0.9])
        .expect("dims match data")
        .save(&scores)
        .expect("write scores");
    let report = tmp.path().join("report.json");
    let out = run(&[
        "nms",
        "--masks",
        &s(&bad),
        "--scores",
        &s(&scores),
        "--out-report",
        &s(&report),
    ]);
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.starts_with("error:"), "stderr: {stderr}");
    assert!(!report.exists(), "no output may be written on invalid input");
}

#[test]
fn missing_input_file_fails_cleanly() {
    let f = fixtures();
    let tmp = tempfile::tempdir().expect("tempdir");
    let out = run(&[
        "nms",
        "--masks",
        &s(&tmp.path().join("does_not_exist.mqt")),
        "--scores",
        &s(&f.join("nms/scores_pair.mqt")),
        "--out-report",
        &s(&tmp.path().join("report.json")),
    ]);
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.starts_with("error:"), "stderr: {stderr}");
    assert!(stderr.contains("does_not_exist.mqt"), "stderr: {stderr}");
}

#[test]
fn train_runs_are_bit_identical() {
    let f = fixtures();
    let a = tempfile::tempdir().expect("tempdir");
    let b = tempfile::tempdir().expect("tempdir");
    for dir in [a.path(), b.path()] {
        run_ok(&[
            "train",
            "--data",
            &s(&f.join("dataset")),
            "--config",
            &s(&f.join("toy.toml")),
            "--out-dir",
            &s(dir),
        ]);
    }
    for name in ["checkpoint.mqta", "metrics.jsonl", "predictions.mqt"] {
        assert_same_bytes(&a.path().join(name), &b.path().join(name));
    }
}
