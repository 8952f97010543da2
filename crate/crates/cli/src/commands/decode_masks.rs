//! `decode-masks`: dynamic per-cell mask decoding plus candidate selection.
//!
//! Inputs: a feature map (H, W, E), a kernel grid (S, S, E) and a category
//! score grid (S, S, C). Every grid cell's kernel is applied as a 1x1
//! convolution over the feature map and passed through the logistic
//! function; cells whose best category score clears the score threshold
//! contribute a candidate mask binarized at the mask threshold. Outputs the
//! selected binary masks as an (K, H, W) f32 stack, their scores as a
//! rank-1 tensor, and a JSON report.

use std::path::PathBuf;

use anyhow::bail;
use clap::Args;
use maskvqa_core::mask_decoder::{decode_masks, CategoryMap, KernelBank};
use serde::Serialize;

use crate::tensor_file::Tensor;

/// Command-line arguments.
#[derive(Debug, Args)]
pub struct DecodeMasksArgs {
    /// Feature-map tensor file, dims (H, W, E).
    #[arg(long)]
    pub features: PathBuf,
    /// Kernel tensor file, dims (S, S, E).
    #[arg(long)]
    pub kernels: PathBuf,
    /// Category-score tensor file, dims (S, S, C).
    #[arg(long)]
    pub categories: PathBuf,
    /// Run config (TOML); thresholds come from its decode section.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output mask stack, dims (K, H, W).
    #[arg(long)]
    pub out_masks: PathBuf,
    /// Output score tensor, dims (K).
    #[arg(long)]
    pub out_scores: PathBuf,
    /// Output JSON report.
    #[arg(long)]
    pub out_report: PathBuf,
}

#[derive(Serialize)]
struct Candidate {
    category: usize,
    score: f64,
    area: usize,
}

#[derive(Serialize)]
struct Report {
    grid: usize,
    cells: usize,
    score_threshold: f64,
    mask_threshold: f64,
    selected: usize,
    candidates: Vec<Candidate>,
}

/// Runs the subcommand.
pub fn run(args: &DecodeMasksArgs) -> anyhow::Result<()> {
    let cfg = super::load_config(&args.config)?;
    let features = super::feature_map_from_tensor(&super::load_tensor(&args.features)?)?;

    let kt = super::load_tensor(&args.kernels)?;
    if kt.dims().len() != 3 || kt.dims()[0] != kt.dims()[1] {
        bail!("kernels must have dims (S, S, E), got {:?}", kt.dims());
    }
    if kt.dims()[0] != cfg.decode.grid {
        bail!(
            "kernel grid {} does not match decode.grid {}",
            kt.dims()[0],
            cfg.decode.grid
        );
    }
    let kernels = KernelBank::new(
        kt.dims()[0],
        kt.dims()[2],
        kt.as_f64().map_err(|e| anyhow::anyhow!("{e}"))?.to_vec(),
    )
    .map_err(|e| anyhow::anyhow!("{e}"))?;

    let ct = super::load_tensor(&args.categories)?;
    if ct.dims().len() != 3 || ct.dims()[0] != ct.dims()[1] {
        bail!("categories must have dims (S, S, C), got {:?}", ct.dims());
    }
    if ct.dims()[0] != cfg.decode.grid || ct.dims()[2] != cfg.decode.categories {
        bail!(
            "category grid ({}, {}) does not match decode settings ({}, {})",
            ct.dims()[0],
            ct.dims()[2],
            cfg.decode.grid,
            cfg.decode.categories
        );
    }
    let categories = CategoryMap::new(
        ct.dims()[0],
        ct.dims()[2],
        ct.as_f64().map_err(|e| anyhow::anyhow!("{e}"))?.to_vec(),
    )
    .map_err(|e| anyhow::anyhow!("{e}"))?;

    let stack = decode_masks(&features, &kernels).map_err(|e| anyhow::anyhow!("{e}"))?;
    let selected = maskvqa_core::mask_decoder::select_candidates(
        &stack,
        &categories,
        cfg.decode.score_threshold,
        cfg.decode.mask_threshold,
    )
    .map_err(|e| anyhow::anyhow!("{e}"))?;

    super::save_tensor(&super::stack_from_mask_set(&selected), &args.out_masks)?;
    let scores: Vec<f64> = selected.iter().map(|m| m.score).collect();
    super::save_tensor(
        &Tensor::from_f64(vec![scores.len()], scores).map_err(|e| anyhow::anyhow!("{e}"))?,
        &args.out_scores,
    )?;

    let report = Report {
        grid: cfg.decode.grid,
        cells: cfg.decode.grid * cfg.decode.grid,
        score_threshold: cfg.decode.score_threshold,
        mask_threshold: cfg.decode.mask_threshold,
        selected: selected.len(),
        candidates: selected
            .iter()
            .map(|m| Candidate {
                category: m.category,
                score: m.score,
                area: m.binary.area(),
            })
            .collect(),
    };
    super::write_json_file(&report, &args.out_report)?;
    println!(
        "decode-masks: {} of {} cells selected",
        report.selected, report.cells
    );
    Ok(())
}
