//! Command-line front end for the mask-attention VQA toolchain.

use clap::Parser;
use maskvqa::commands;

/// Desk-scale mask-decoding and relation-attention VQA toolchain.
#[derive(Debug, Parser)]
#[command(name = "maskvqa", version, about, max_term_width = 100)]
enum Command {
    /// Decode per-cell instance masks and select scored candidates.
    DecodeMasks(commands::decode_masks::DecodeMasksArgs),
    /// Run one score-decay suppression pass over a mask stack.
    Nms(commands::nms::NmsArgs),
    /// Split an image into instance and background views.
    Separate(commands::separate::SeparateArgs),
    /// Train the attention model on a dataset directory.
    Train(commands::train::TrainArgs),
    /// Score predictions against annotations.
    Eval(commands::eval::EvalArgs),
    /// Verify analytic gradients against finite differences.
    Gradcheck(commands::gradcheck::GradcheckArgs),
    /// Generate a planted-signal synthetic dataset.
    SynthData(commands::synth_data::SynthDataArgs),
    /// Histogram pairwise mask overlaps across sets.
    IouStats(commands::iou_stats::IouStatsArgs),
}

fn main() {
    let command = Command::parse();
    let result = match &command {
        Command::DecodeMasks(args) => commands::decode_masks::run(args),
        Command::Nms(args) => commands::nms::run(args),
        Command::Separate(args) => commands::separate::run(args),
        Command::Train(args) => commands::train::run(args),
        Command::Eval(args) => commands::eval::run(args),
        Command::Gradcheck(args) => commands::gradcheck::run(args),
        Command::SynthData(args) => commands::synth_data::run(args),
        Command::IouStats(args) => commands::iou_stats::run(args),
    };
    if let Err(e) = result {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
