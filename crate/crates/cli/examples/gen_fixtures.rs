//! Regenerates every committed CLI fixture and golden output under
//! `tests/fixtures/`.
//!
//! ```text
//! cargo run -p maskvqa --example gen_fixtures
//! ```
//!
//! Inputs and goldens are produced by the same library functions the binary
//! dispatches to, so after an intentional behavior change one run refreshes
//! everything in place and `git diff` shows exactly which artifacts moved.
//! The integration tests then spawn the real binary on the committed inputs
//! and require byte-identical outputs.

use std::path::{Path, PathBuf};

use maskvqa::commands::{self, decode_masks, eval, gradcheck, iou_stats, nms, separate, synth_data, train};
use maskvqa::config::RunConfig;
use maskvqa::tensor_file::Tensor;
use maskvqa_core::rng::{mix, seeded};
use rand::Rng;

/// Stream key separating fixture randomness from every other seeded draw.
const FIXTURE_STREAM: u64 = 0x4649_5854;

fn fixtures_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

fn dir(root: &Path, sub: &str) -> PathBuf {
    let d = root.join(sub);
    std::fs::create_dir_all(&d).expect("create fixture dir");
    d
}

/// Rank-3 f64 tensor with entries uniform in [-scale, scale].
fn random_cube(seed: u64, dims: [usize; 3], scale: f64) -> Tensor {
    let mut rng = seeded(mix(seed, FIXTURE_STREAM));
    let n = dims[0] * dims[1] * dims[2];
    let data: Vec<f64> = (0..n).map(|_| rng.gen_range(-scale..scale)).collect();
    Tensor::from_f64(dims.to_vec(), data).expect("dims match data")
}

fn save(t: &Tensor, path: PathBuf) {
    t.save(&path)
        .unwrap_or_else(|e| panic!("writing {}: {e}", path.display()));
    println!("wrote {}", path.display());
}

/// A (K, H, W) zero/one f32 stack from closures deciding each pixel.
fn mask_stack(h: usize, w: usize, masks: &[&dyn Fn(usize, usize) -> bool]) -> Tensor {
    let mut data = Vec::with_capacity(masks.len() * h * w);
    for m in masks {
        for y in 0..h {
            for x in 0..w {
                data.push(if m(y, x) { 1.0f32 } else { 0.0 });
            }
        }
    }
    Tensor::from_f32(vec![masks.len(), h, w], data).expect("dims match data")
}

fn main() -> anyhow::Result<()> {
    let root = fixtures_root();
    std::fs::create_dir_all(&root)?;

    // Shared toy config: the exact built-in preset, committed so the golden
    // runs and the preset can never drift apart silently.
    let toy = root.join("toy.toml");
    std::fs::write(&toy, RunConfig::toy().to_toml())?;
    println!("wrote {}", toy.display());

    // ---- decode-masks ----------------------------------------------------
    // Random feature map and kernel grid; the toy decode section (grid 4,
    // 3 categories, score threshold 0.1, mask threshold 0.5) selects a
    // handful of candidate masks.
    let d = dir(&root, "decode");
    let features = random_cube(11, [10, 10, 6], 1.0);
    let kernels = random_cube(12, [4, 4, 6], 1.0);
    let mut rng = seeded(mix(13, FIXTURE_STREAM));
    let cats: Vec<f64> = (0..4 * 4 * 3).map(|_| rng.gen_range(0.0..0.3)).collect();
    let categories = Tensor::from_f64(vec![4, 4, 3], cats).expect("dims match data");
    save(&features, d.join("features.mqt"));
    save(&kernels, d.join("kernels.mqt"));
    save(&categories, d.join("categories.mqt"));
    let g = dir(&root, "decode/golden");
    decode_masks::run(&decode_masks::DecodeMasksArgs {
        features: d.join("features.mqt"),
        kernels: d.join("kernels.mqt"),
        categories: d.join("categories.mqt"),
        config: Some(toy.clone()),
        out_masks: g.join("masks.mqt"),
        out_scores: g.join("scores.mqt"),
        out_report: g.join("report.json"),
    })?;

    // ---- nms ---------------------------------------------------------------
    // Pair fixture: two identical masks; the duplicate's score must decay to
    // exactly zero. Random fixture: six overlapping blobs.
    let d = dir(&root, "nms");
    let square = |y: usize, x: usize| (1..7).contains(&y) && (1..7).contains(&x);
    let pair = mask_stack(8, 8, &[&square, &square]);
    save(&pair, d.join("masks_pair.mqt"));
    save(
        &Tensor::from_f64(vec![2], vec![0.9, 0.6]).expect("dims match data"),
        d.join("scores_pair.mqt"),
    );
    let mut rng = seeded(mix(21, FIXTURE_STREAM));
    let mut blob_data = Vec::with_capacity(6 * 8 * 8);
    for _ in 0..6 * 8 * 8 {
        blob_data.push(if rng.gen::<f64>() < 0.45 { 1.0f32 } else { 0.0 });
    }
    let blobs = Tensor::from_f32(vec![6, 8, 8], blob_data).expect("dims match data");
    let blob_scores: Vec<f64> = (0..6).map(|_| rng.gen_range(0.2..1.0)).collect();
    save(&blobs, d.join("masks_rand.mqt"));
    save(
        &Tensor::from_f64(vec![6], blob_scores).expect("dims match data"),
        d.join("scores_rand.mqt"),
    );
    let g = dir(&root, "nms/golden");
    nms::run(&nms::NmsArgs {
        masks: d.join("masks_pair.mqt"),
        scores: d.join("scores_pair.mqt"),
        config: Some(toy.clone()),
        out_report: g.join("report_pair.json"),
    })?;
    nms::run(&nms::NmsArgs {
        masks: d.join("masks_rand.mqt"),
        scores: d.join("scores_rand.mqt"),
        config: Some(toy.clone()),
        out_report: g.join("report_rand.json"),
    })?;

    // ---- separate ----------------------------------------------------------
    // Three rectangles on an 8x8 grid; the first one exactly covers the
    // top-left 4x4 view cell, so that background column must pool to zero.
    let d = dir(&root, "separate");
    let features = random_cube(31, [8, 8, 5], 1.0);
    save(&features, d.join("features.mqt"));
    let a = |y: usize, x: usize| y < 4 && x < 4;
    let b = |y: usize, x: usize| (2..6).contains(&y) && (3..7).contains(&x);
    let c = |y: usize, x: usize| (5..8).contains(&y) && x < 3;
    let masks = mask_stack(8, 8, &[&a, &b, &c]);
    save(&masks, d.join("masks.mqt"));
    let g = dir(&root, "separate/golden");
    separate::run(&separate::SeparateArgs {
        features: d.join("features.mqt"),
        masks: d.join("masks.mqt"),
        config: Some(toy.clone()),
        out_dir: g.clone(),
    })?;

    // ---- dataset (committed) + train + eval --------------------------------
    let data_dir = dir(&root, "dataset");
    synth_data::run(&synth_data::SynthDataArgs {
        out_dir: data_dir.clone(),
        count: 8,
        seed: 5,
        height: 12,
        width: 12,
        feature_dim: 8,
    })?;
    let g = dir(&root, "train/golden");
    train::run(&train::TrainArgs {
        data: data_dir.clone(),
        config: Some(toy.clone()),
        out_dir: g.clone(),
        order: None,
        epochs: None,
    })?;
    let eg = dir(&root, "eval/golden");
    eval::run(&eval::EvalArgs {
        predictions: g.join("predictions.mqt"),
        annotations: data_dir.join("annotations.jsonl"),
        out_report: eg.join("report.json"),
    })?;

    // ---- gradcheck ----------------------------------------------------------
    let g = dir(&root, "gradcheck/golden");
    gradcheck::run(&gradcheck::GradcheckArgs {
        seed: 7,
        order: "i-b-q".into(),
        step: 1e-5,
        tolerance: 1e-4,
        out_report: Some(g.join("report.json")),
    })?;

    // ---- synth-data golden (distinct from the train dataset) ---------------
    let g = dir(&root, "synth/golden");
    synth_data::run(&synth_data::SynthDataArgs {
        out_dir: g.clone(),
        count: 4,
        seed: 3,
        height: 12,
        width: 12,
        feature_dim: 8,
    })?;

    // ---- iou-stats ----------------------------------------------------------
    let g = dir(&root, "iou/golden");
    iou_stats::run(&iou_stats::IouStatsArgs {
        masks: vec![
            root.join("nms/masks_rand.mqt"),
            root.join("separate/masks.mqt"),
        ],
        edges: "0,0.25,0.5,0.75,1".into(),
        out_report: g.join("stats.json"),
    })?;

    // The command functions printed their own summaries above; nothing else
    // to do. Keep `commands` imported for the doc link below.
    let _ = commands::load_config;
    println!("fixtures regenerated under {}", root.display());
    Ok(())
}
