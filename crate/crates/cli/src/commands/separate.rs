//! `separate`: split an image into the instance view and background view.
//!
//! Inputs: a feature map (H, W, E) and an (K, H, W) instance mask stack.
//! Outputs, in the given directory: `instance_view.mqt` (E x K masked mean
//! features, one column per mask), `background_view.mqt` (E x G*G grid-cell
//! means outside the fused mask), `fused_mask.mqt` (H, W zeros/ones) and
//! `background.ppm`, the demo image with instance pixels painted by the
//! configured fill mode.

use std::path::PathBuf;

use clap::Args;
use maskvqa_core::view::{background_image, fuse_instances, grid_pool, instance_features};
use serde::Serialize;

use crate::tensor_file::Tensor;

/// Command-line arguments.
#[derive(Debug, Args)]
pub struct SeparateArgs {
    /// Feature-map tensor file, dims (H, W, E).
    #[arg(long)]
    pub features: PathBuf,
    /// Mask stack tensor file, dims (K, H, W), zeros and ones.
    #[arg(long)]
    pub masks: PathBuf,
    /// Run config (TOML); the grid and fill come from its view section.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory (created if needed).
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Serialize)]
struct Report {
    grid: usize,
    instances: usize,
    instance_pixels: usize,
    background_pixels: usize,
}

/// Runs the subcommand.
pub fn run(args: &SeparateArgs) -> anyhow::Result<()> {
    let cfg = super::load_config(&args.config)?;
    let features = super::feature_map_from_tensor(&super::load_tensor(&args.features)?)?;
    let set = super::mask_set_from_stack(&super::load_tensor(&args.masks)?, None)?;
    if set.h() != features.h() || set.w() != features.w() {
        anyhow::bail!(
            "mask size {}x{} does not match image size {}x{}",
            set.h(),
            set.w(),
            features.h(),
            features.w()
        );
    }

    let instance = instance_features(&features, &set);
    let fused = fuse_instances(&set);
    let background =
        grid_pool(&features, &fused, cfg.view.grid).map_err(|e| anyhow::anyhow!("{e}"))?;
    let fill = cfg
        .view
        .fill
        .to_mode()
        .map_err(|e| anyhow::anyhow!("view.fill: {e}"))?;
    let demo = background_image(&fused, &features, fill).map_err(|e| anyhow::anyhow!("{e}"))?;

    std::fs::create_dir_all(&args.out_dir)?;
    super::save_tensor(
        &Tensor::from_mat(&instance),
        &args.out_dir.join("instance_view.mqt"),
    )?;
    super::save_tensor(
        &Tensor::from_mat(&background),
        &args.out_dir.join("background_view.mqt"),
    )?;
    let fused_data: Vec<f32> = fused.data().iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
    super::save_tensor(
        &Tensor::from_f32(vec![fused.h(), fused.w()], fused_data)
            .map_err(|e| anyhow::anyhow!("{e}"))?,
        &args.out_dir.join("fused_mask.mqt"),
    )?;
    crate::ppm::save_ppm(&demo, args.out_dir.join("background.ppm"))?;

    let report = Report {
        grid: cfg.view.grid,
        instances: set.len(),
        instance_pixels: fused.area(),
        background_pixels: features.h() * features.w() - fused.area(),
    };
    super::write_json_file(&report, &args.out_dir.join("report.json"))?;
    println!(
        "separate: {} instances, {} instance pixels, {} background pixels",
        report.instances, report.instance_pixels, report.background_pixels
    );
    Ok(())
}
