//! `iou-stats`: pairwise-overlap histograms across mask sets.
//!
//! Each input file is an (K, H, W) zero/one mask stack treated as one set.
//! All pairwise IoUs within each set are binned into the given intervals,
//! aggregated into set-size bands (5-10, 11-20, 21+ masks) plus an "all"
//! band covering every set.

use std::path::PathBuf;

use clap::Args;
use maskvqa_core::nms::iou_overlap_stats;
use serde::Serialize;

/// Command-line arguments.
#[derive(Debug, Args)]
pub struct IouStatsArgs {
    /// Mask stack tensor files, one set per file.
    #[arg(required = true)]
    pub masks: Vec<PathBuf>,
    /// Comma-separated interval edges, ascending from 0 to 1.
    #[arg(long, default_value = "0,0.25,0.5,0.75,1")]
    pub edges: String,
    /// Output JSON histogram.
    #[arg(long)]
    pub out_report: PathBuf,
}

#[derive(Serialize)]
struct Band {
    label: &'static str,
    set_count: usize,
    pair_count: usize,
    counts: Vec<u64>,
}

#[derive(Serialize)]
struct Report {
    edges: Vec<f64>,
    sets: usize,
    bands: Vec<Band>,
}

/// Runs the subcommand.
pub fn run(args: &IouStatsArgs) -> anyhow::Result<()> {
    let edges: Vec<f64> = args
        .edges
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| anyhow::anyhow!("edge {s:?}: {e}"))
        })
        .collect::<anyhow::Result<_>>()?;

    let mut sets = Vec::with_capacity(args.masks.len());
    for path in &args.masks {
        let t = super::load_tensor(path)?;
        sets.push(super::mask_set_from_stack(&t, None)?);
    }
    let hist = iou_overlap_stats(&sets, &edges).map_err(|e| anyhow::anyhow!("{e}"))?;

    let report = Report {
        edges: hist.edges.clone(),
        sets: sets.len(),
        bands: hist
            .bands
            .iter()
            .map(|b| Band {
                label: b.label,
                set_count: b.set_count,
                pair_count: b.pair_count,
                counts: b.counts.clone(),
            })
            .collect(),
    };
    super::write_json_file(&report, &args.out_report)?;
    let all = report.bands.last().expect("all band always present");
    println!(
        "iou-stats: {} sets, {} pairs binned into {} intervals",
        report.sets,
        all.pair_count,
        report.edges.len() - 1
    );
    Ok(())
}
