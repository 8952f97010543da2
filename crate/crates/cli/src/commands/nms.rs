//! `nms`: one simultaneous score-decay suppression pass over a mask stack.
//!
//! Inputs: an (K, H, W) zero/one mask stack and a rank-1 score tensor.
//! Output: a JSON suppression table listing, per mask, its input score, the
//! decay penalty, the updated score and whether it survives the post
//! threshold, plus the kept indices in updated-score order.

use std::path::PathBuf;

use clap::Args;
use maskvqa_core::nms::suppress;
use serde::Serialize;

/// Command-line arguments.
#[derive(Debug, Args)]
pub struct NmsArgs {
    /// Mask stack tensor file, dims (K, H, W), zeros and ones.
    #[arg(long)]
    pub masks: PathBuf,
    /// Score tensor file, dims (K).
    #[arg(long)]
    pub scores: PathBuf,
    /// Run config (TOML); the post threshold comes from its nms section.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output JSON suppression table.
    #[arg(long)]
    pub out_report: PathBuf,
}

#[derive(Serialize)]
struct Row {
    index: usize,
    score: f64,
    penalty: f64,
    updated_score: f64,
    kept: bool,
}

#[derive(Serialize)]
struct Report {
    post_threshold: f64,
    masks: Vec<Row>,
    kept: Vec<usize>,
}

/// Runs the subcommand.
pub fn run(args: &NmsArgs) -> anyhow::Result<()> {
    let cfg = super::load_config(&args.config)?;
    let stack = super::load_tensor(&args.masks)?;
    let score_t = super::load_tensor(&args.scores)?;
    let scores = score_t.as_f64().map_err(|e| anyhow::anyhow!("{e}"))?;
    let set = super::mask_set_from_stack(&stack, Some(scores))?;

    let result = suppress(&set, cfg.nms.post_threshold).map_err(|e| anyhow::anyhow!("{e}"))?;
    let report = Report {
        post_threshold: cfg.nms.post_threshold,
        masks: (0..set.len())
            .map(|i| Row {
                index: i,
                score: set.get(i).score,
                penalty: result.penalties[i],
                updated_score: result.updated_scores[i],
                kept: result.kept.contains(&i),
            })
            .collect(),
        kept: result.kept.clone(),
    };
    super::write_json_file(&report, &args.out_report)?;
    println!("nms: kept {} of {} masks", report.kept.len(), set.len());
    Ok(())
}
