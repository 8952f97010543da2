//! Glue between dataset files and the numeric core: view assembly, question
//! encoding, sample construction and batch prediction.

use anyhow::{bail, Context};
use maskvqa_core::attention::{DropoutMode, ModelParams};
use maskvqa_core::mask::MaskSet;
use maskvqa_core::mask_decoder::FeatureMap;
use maskvqa_core::question;
use maskvqa_core::train::Sample;
use maskvqa_core::view::{fuse_instances, grid_pool, instance_features};
use maskvqa_core::Mat;

use crate::config::RunConfig;
use crate::dataset::LoadedDataset;
use crate::tensor_file::Tensor;

/// Pads a matrix with zero columns up to `cols`; errors if it already has
/// more. Used to bring a variable instance count up to the fixed budget.
pub fn pad_columns(m: &Mat, cols: usize) -> anyhow::Result<Mat> {
    if m.cols() > cols {
        bail!("{} instance columns exceed the budget {cols}", m.cols());
    }
    let mut out = Mat::zeros(m.rows(), cols);
    for r in 0..m.rows() {
        for c in 0..m.cols() {
            *out.at_mut(r, c) = m.at(r, c);
        }
    }
    Ok(out)
}

/// Builds the two view matrices for one image: the instance view (masked
/// mean features per instance, zero-padded to the budget) and the
/// background view (per-grid-cell mean features outside the fused mask).
pub fn build_views(
    f: &FeatureMap,
    set: &MaskSet,
    grid: usize,
    instance_budget: usize,
) -> anyhow::Result<(Mat, Mat)> {
    let d = instance_features(f, set);
    let d = pad_columns(&d, instance_budget)?;
    let fused = fuse_instances(set);
    let b = grid_pool(f, &fused, grid).map_err(|e| anyhow::anyhow!("{e}"))?;
    Ok((d, b))
}

/// Encodes one question under the config's encoder settings.
pub fn encode_question(text: &str, cfg: &RunConfig) -> anyhow::Result<Mat> {
    question::encode(text, cfg.question.dim, cfg.question.slots, cfg.question.seed)
        .map_err(|e| anyhow::anyhow!("{e}"))
}

/// Converts every dataset sample into model inputs under the config.
pub fn build_samples(data: &LoadedDataset, cfg: &RunConfig) -> anyhow::Result<Vec<Sample>> {
    if data.feature_dim() != cfg.model.region_dim {
        bail!(
            "dataset feature dim {} does not match model.region_dim {}",
            data.feature_dim(),
            cfg.model.region_dim
        );
    }
    let mut samples = Vec::with_capacity(data.len());
    for i in 0..data.len() {
        let f = data.feature_map(i).with_context(|| format!("sample {i}"))?;
        let set = data.mask_set(i).with_context(|| format!("sample {i}"))?;
        let (instance, background) =
            build_views(&f, &set, cfg.view.grid, cfg.model.instance_budget)
                .with_context(|| format!("sample {i}"))?;
        let question = encode_question(&data.questions[i], cfg)?;
        if data.labels[i] >= cfg.model.answers {
            bail!(
                "sample {i} label {} outside the answer vocabulary of {}",
                data.labels[i],
                cfg.model.answers
            );
        }
        samples.push(Sample {
            instance,
            background,
            question,
            answer: data.labels[i],
        });
    }
    Ok(samples)
}

/// Runs the model in eval mode over every sample, returning answer indices.
pub fn predict_all(params: &ModelParams, samples: &[Sample]) -> anyhow::Result<Vec<usize>> {
    let mut out = Vec::with_capacity(samples.len());
    for (i, s) in samples.iter().enumerate() {
        let pass = params
            .forward(&s.instance, &s.background, &s.question, &mut DropoutMode::Eval)
            .with_context(|| format!("sample {i}"))?;
        out.push(pass.predicted());
    }
    Ok(out)
}

/// Writes predicted answer indices as a rank-1 f64 tensor file.
pub fn save_predictions(
    predictions: &[usize],
    path: impl AsRef<std::path::Path>,
) -> anyhow::Result<()> {
    let values: Vec<f64> = predictions.iter().map(|&p| p as f64).collect();
    Tensor::from_f64(vec![values.len()], values)
        .map_err(|e| anyhow::anyhow!("{e}"))?
        .save(path)
        .map_err(|e| anyhow::anyhow!("{e}"))
}

/// Reads a predictions tensor back into answer indices.
pub fn load_predictions(path: impl AsRef<std::path::Path>) -> anyhow::Result<Vec<usize>> {
    let t = Tensor::load(path).map_err(|e| anyhow::anyhow!("{e}"))?;
    if t.dims().len() != 1 {
        bail!("predictions must be a rank-1 tensor, got dims {:?}", t.dims());
    }
    let mut out = Vec::with_capacity(t.len());
    for (i, &v) in t.as_f64().map_err(|e| anyhow::anyhow!("{e}"))?.iter().enumerate() {
        if v.fract() != 0.0 || v < 0.0 {
            bail!("prediction {i} is {v}, expected a non-negative integer");
        }
        out.push(v as usize);
    }
    Ok(out)
}
