//! `synth-data`: write a planted-signal synthetic dataset directory.
//!
//! The generated files are the training inputs consumed by `train`:
//! features, masks, questions, labels and annotations, plus the answer
//! vocabulary. A count of zero still writes valid (empty) files.

use std::path::PathBuf;

use clap::Args;

use crate::dataset::{generate, write_dataset, SynthSpec};

/// Command-line arguments.
#[derive(Debug, Args)]
pub struct SynthDataArgs {
    /// Output dataset directory (created if needed).
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Number of samples.
    #[arg(long)]
    pub count: usize,
    /// Generator seed.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Image height.
    #[arg(long, default_value_t = 12)]
    pub height: usize,
    /// Image width.
    #[arg(long, default_value_t = 12)]
    pub width: usize,
    /// Feature channels.
    #[arg(long, default_value_t = 8)]
    pub feature_dim: usize,
}

/// Runs the subcommand.
pub fn run(args: &SynthDataArgs) -> anyhow::Result<()> {
    let spec = SynthSpec {
        count: args.count,
        seed: args.seed,
        height: args.height,
        width: args.width,
        feature_dim: args.feature_dim,
    };
    let ds = generate(&spec)?;
    write_dataset(&ds, &args.out_dir)?;
    println!(
        "synth-data: wrote {} samples ({}x{}x{}) to {}",
        args.count,
        args.height,
        args.width,
        args.feature_dim,
        args.out_dir.display()
    );
    Ok(())
}
