//! Subcommand implementations. Each module owns its argument struct and a
//! `run` function; the binary only parses the command line and dispatches.
//!
//! Conventions shared by every subcommand: inputs are validated before any
//! output file is written, reports are JSON with struct-ordered keys, and
//! all work is single-threaded and seeded, so a fixed command line on fixed
//! inputs is bit-reproducible.

pub mod decode_masks;
pub mod eval;
pub mod gradcheck;
pub mod iou_stats;
pub mod nms;
pub mod separate;
pub mod synth_data;
pub mod train;

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use maskvqa_core::mask::{BinMask, MaskSet, ScoredMask};
use maskvqa_core::mask_decoder::FeatureMap;
use maskvqa_core::Mat;
use serde::Serialize;

use crate::config::RunConfig;
use crate::tensor_file::Tensor;

/// Loads a tensor file, naming the path in any error.
pub fn load_tensor(path: &Path) -> anyhow::Result<Tensor> {
    Tensor::load(path).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))
}

/// Saves a tensor file, naming the path in any error.
pub fn save_tensor(t: &Tensor, path: &Path) -> anyhow::Result<()> {
    t.save(path)
        .map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))
}

/// Loads the run config from `--config`, or the built-in defaults.
pub fn load_config(path: &Option<PathBuf>) -> anyhow::Result<RunConfig> {
    match path {
        Some(p) => RunConfig::load(p),
        None => Ok(RunConfig::default()),
    }
}

/// Serializes a report as JSON followed by a newline.
pub fn write_json_file(value: &impl Serialize, path: &Path) -> anyhow::Result<()> {
    let mut buf = serde_json::to_vec_pretty(value)?;
    buf.push(b'\n');
    std::fs::write(path, buf).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

/// Interprets a rank-3 (H, W, E... laid out as H rows, W columns, E
/// channels) f64 tensor as a feature map.
pub fn feature_map_from_tensor(t: &Tensor) -> anyhow::Result<FeatureMap> {
    if t.dims().len() != 3 {
        bail!("feature map must have dims (H, W, E), got {:?}", t.dims());
    }
    let (h, w, e) = (t.dims()[0], t.dims()[1], t.dims()[2]);
    FeatureMap::new(h, w, e, t.as_f64().map_err(|e| anyhow::anyhow!("{e}"))?.to_vec())
        .map_err(|e| anyhow::anyhow!("{e}"))
}

/// Interprets a rank-3 (K, H, W) f32 zero/one tensor as a mask set. Every
/// slice becomes one mask (empty slices included); `scores` supplies the
/// per-mask scores, defaulting to 1.0.
pub fn mask_set_from_stack(t: &Tensor, scores: Option<&[f64]>) -> anyhow::Result<MaskSet> {
    if t.dims().len() != 3 {
        bail!("mask stack must have dims (K, H, W), got {:?}", t.dims());
    }
    let (k, h, w) = (t.dims()[0], t.dims()[1], t.dims()[2]);
    let data = t.as_f32().map_err(|e| anyhow::anyhow!("{e}"))?;
    if let Some(s) = scores {
        if s.len() != k {
            bail!("{} scores for {k} masks", s.len());
        }
    }
    let mut members = Vec::with_capacity(k);
    for i in 0..k {
        let slice = &data[i * h * w..(i + 1) * h * w];
        for (j, &v) in slice.iter().enumerate() {
            if v != 0.0 && v != 1.0 {
                bail!("mask {i} entry {j} is {v}, expected 0 or 1");
            }
        }
        let bits: Vec<bool> = slice.iter().map(|&v| v > 0.5).collect();
        let binary = BinMask::from_vec(h, w, bits).map_err(|e| anyhow::anyhow!("{e}"))?;
        let soft = Mat::from_vec(h, w, slice.iter().map(|&v| f64::from(v)).collect())
            .map_err(|e| anyhow::anyhow!("{e}"))?;
        let score = scores.map_or(1.0, |s| s[i]);
        members.push(ScoredMask::new(soft, binary, score, 0).map_err(|e| anyhow::anyhow!("{e}"))?);
    }
    MaskSet::new(h, w, members).map_err(|e| anyhow::anyhow!("{e}"))
}

/// Packs a mask set's binary masks into a rank-3 (K, H, W) f32 tensor.
pub fn stack_from_mask_set(set: &MaskSet) -> Tensor {
    let (h, w) = (set.h(), set.w());
    let mut data = Vec::with_capacity(set.len() * h * w);
    for m in set.iter() {
        data.extend(m.binary.data().iter().map(|&b| if b { 1.0f32 } else { 0.0 }));
    }
    Tensor::from_f32(vec![set.len(), h, w], data).expect("dims match construction")
}
