//! `train`: fit the attention model on a dataset directory.
//!
//! Loads the dataset, assembles views and encoded questions, trains under
//! the config's optimizer settings and writes three artifacts into the
//! output directory: `checkpoint.mqta` (weights plus shape metadata),
//! `metrics.jsonl` (one line per epoch) and `predictions.mqt` (final-model
//! answer indices over the training set). With fixed seed, config and data
//! the three artifacts are bit-identical across runs.

use std::path::PathBuf;

use clap::Args;
use maskvqa_core::attention::ModelParams;
use maskvqa_core::train::train;

use crate::dataset::load_dataset;
use crate::pipeline::{build_samples, predict_all, save_predictions};

/// Command-line arguments.
#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Dataset directory (features, masks, questions, labels, annotations).
    #[arg(long)]
    pub data: PathBuf,
    /// Run config (TOML).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory (created if needed).
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Override the config's stage wiring (e.g. "none" for the
    /// attention-free control run).
    #[arg(long)]
    pub order: Option<String>,
    /// Override the config's epoch count.
    #[arg(long)]
    pub epochs: Option<usize>,
}

/// Runs the subcommand.
pub fn run(args: &TrainArgs) -> anyhow::Result<()> {
    let mut cfg = super::load_config(&args.config)?;
    if let Some(order) = &args.order {
        cfg.model.order = order.clone();
    }
    if let Some(epochs) = args.epochs {
        cfg.train.epochs = epochs;
    }
    cfg.validate()?;

    let data = load_dataset(&args.data)?;
    if data.is_empty() {
        anyhow::bail!("dataset {} has no samples", args.data.display());
    }
    let samples = build_samples(&data, &cfg)?;

    let mut params = ModelParams::init(cfg.model_dims(), cfg.train.seed)
        .map_err(|e| anyhow::anyhow!("{e}"))?;
    let records = train(&mut params, &samples, &cfg.train_config())
        .map_err(|e| anyhow::anyhow!("{e}"))?;

    std::fs::create_dir_all(&args.out_dir)?;
    crate::checkpoint::save(&params, args.out_dir.join("checkpoint.mqta"))
        .map_err(|e| anyhow::anyhow!("checkpoint.mqta: {e}"))?;
    crate::metrics::save_log(&records, args.out_dir.join("metrics.jsonl"))?;
    let predictions = predict_all(&params, &samples)?;
    save_predictions(&predictions, args.out_dir.join("predictions.mqt"))?;

    let last = records.last().expect("at least one epoch");
    println!(
        "train: {} samples, {} epochs, final loss {:.6}, final accuracy {:.4}",
        samples.len(),
        records.len(),
        last.loss,
        last.accuracy
    );
    Ok(())
}
