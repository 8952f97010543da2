//! `gradcheck`: analytic gradients against central finite differences.
//!
//! Builds a seeded model and random inputs at the reference verification
//! shape, computes the analytic gradients of the cross-entropy loss, sweeps
//! every parameter entry (and the three inputs) with central differences
//! and reports the per-tensor worst relative error. Exits 0 when every
//! tensor is within tolerance, 1 otherwise.

use std::path::PathBuf;

use clap::Args;
use maskvqa_core::attention::params::ModelDims;
use maskvqa_core::attention::{ComposeOrder, ModelParams};
use maskvqa_core::gradcheck::check_model;
use maskvqa_core::rng::{mix, seeded};
use maskvqa_core::Mat;
use rand::Rng;
use serde::Serialize;

/// Command-line arguments.
#[derive(Debug, Args)]
pub struct GradcheckArgs {
    /// Seed for the model parameters and inputs.
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// Stage wiring to check.
    #[arg(long, default_value = "i-b-q")]
    pub order: String,
    /// Finite-difference step.
    #[arg(long, default_value_t = 1e-5)]
    pub step: f64,
    /// Maximum allowed relative error.
    #[arg(long, default_value_t = 1e-4)]
    pub tolerance: f64,
    /// Optional JSON report path.
    #[arg(long)]
    pub out_report: Option<PathBuf>,
}

/// Reference shape used for gradient verification.
pub fn reference_dims(order: ComposeOrder) -> ModelDims {
    ModelDims {
        region_dim: 8,
        instance_cols: 5,
        background_cols: 4,
        question_dim: 8,
        question_slots: 6,
        glimpse_dim: 4,
        logit_rank: 3,
        heads: 2,
        fused_dim: 10,
        answer_count: 7,
        order,
        mask_padding: false,
    }
}

/// Draws the random inputs and target used by a seeded check.
pub fn reference_inputs(dims: &ModelDims, seed: u64) -> (Mat, Mat, Mat, usize) {
    let mut rng = seeded(mix(seed, 0x4752_4144));
    let instance = Mat::uniform(&mut rng, dims.region_dim, dims.instance_cols, 1.0);
    let background = Mat::uniform(&mut rng, dims.region_dim, dims.background_cols, 1.0);
    let question = Mat::uniform(&mut rng, dims.question_dim, dims.question_slots, 1.0);
    let target = rng.gen_range(0..dims.answer_count);
    (instance, background, question, target)
}

#[derive(Serialize)]
struct TensorRow {
    name: &'static str,
    max_rel_err: f64,
    row: usize,
    col: usize,
    analytic: f64,
    numeric: f64,
}

#[derive(Serialize)]
struct Report {
    order: String,
    seed: u64,
    step: f64,
    tolerance: f64,
    pass: bool,
    max_rel_err: f64,
    tensors: Vec<TensorRow>,
}

/// Runs the subcommand.
pub fn run(args: &GradcheckArgs) -> anyhow::Result<()> {
    let order: ComposeOrder = args
        .order
        .parse()
        .map_err(|_| anyhow::anyhow!("unknown wiring {:?}", args.order))?;
    let dims = reference_dims(order);
    let params = ModelParams::init(dims, args.seed).map_err(|e| anyhow::anyhow!("{e}"))?;
    let (instance, background, question, target) = reference_inputs(&dims, args.seed);
    let report = check_model(
        &params,
        &instance,
        &background,
        &question,
        target,
        args.step,
        args.tolerance,
    )
    .map_err(|e| anyhow::anyhow!("{e}"))?;

    let out = Report {
        order: order.as_str().to_string(),
        seed: args.seed,
        step: args.step,
        tolerance: args.tolerance,
        pass: report.passes(),
        max_rel_err: report.max_rel_err(),
        tensors: report
            .tensors
            .iter()
            .map(|t| TensorRow {
                name: t.name,
                max_rel_err: t.max_rel_err,
                row: t.worst.0,
                col: t.worst.1,
                analytic: t.analytic,
                numeric: t.numeric,
            })
            .collect(),
    };
    if let Some(path) = &args.out_report {
        super::write_json_file(&out, path)?;
    }

    println!(
        "gradcheck: wiring {}, seed {}, step {:e}, tolerance {:e}",
        out.order, out.seed, out.step, out.tolerance
    );
    println!("{:<26} {:>12}  worst entry", "tensor", "max rel err");
    for t in &out.tensors {
        println!(
            "{:<26} {:>12.3e}  ({}, {}) analytic {:.6e} numeric {:.6e}",
            t.name, t.max_rel_err, t.row, t.col, t.analytic, t.numeric
        );
    }
    if out.pass {
        println!("gradcheck: PASS (max rel err {:.3e})", out.max_rel_err);
        Ok(())
    } else {
        anyhow::bail!(
            "gradcheck: FAIL (max rel err {:.3e} exceeds tolerance {:e})",
            out.max_rel_err,
            out.tolerance
        );
    }
}
