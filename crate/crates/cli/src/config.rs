//! Run configuration: one human-readable TOML file covering every stage,
//! fully validated before any work starts.
//!
//! Shipped defaults are full-scale; [`RunConfig::toy`] is the small preset
//! used by the test fixtures and the synthetic-data demos. Unknown keys,
//! out-of-range values and inconsistent combinations are rejected with the
//! offending section and field named in the error.

use std::fmt;
use std::path::Path;

use maskvqa_core::attention::params::ModelDims;
use maskvqa_core::attention::ComposeOrder;
use maskvqa_core::train::TrainConfig;
use maskvqa_core::view::FillMode;
use serde::{Deserialize, Serialize};

/// All validation problems found in a config, one per line.
#[derive(Debug)]
pub struct ConfigError(pub Vec<String>);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "invalid config:")?;
        for problem in &self.0 {
            writeln!(f, "  - {problem}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigError {}

/// Mask-decoding stage settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DecodeConfig {
    /// Grid side S; the kernel map has S*S cells.
    pub grid: usize,
    /// Category count C scored per cell.
    pub categories: usize,
    /// Minimum best-category score for a cell's mask to become a candidate.
    pub score_threshold: f64,
    /// Soft-mask binarization threshold (strictly greater keeps a pixel).
    pub mask_threshold: f64,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        DecodeConfig {
            grid: 12,
            categories: 80,
            score_threshold: 0.1,
            mask_threshold: 0.5,
        }
    }
}

/// Score-decay suppression settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NmsConfig {
    /// Masks whose decayed score falls below this are dropped.
    pub post_threshold: f64,
}

impl Default for NmsConfig {
    fn default() -> Self {
        NmsConfig {
            post_threshold: 0.05,
        }
    }
}

/// How instance pixels are filled in the background-image demo; either the
/// string `"mean"` or a constant number.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FillSetting {
    /// Named mode; only `"mean"` is recognized.
    Name(String),
    /// Paint instance pixels with this constant.
    Constant(f64),
}

impl FillSetting {
    /// Converts to the core fill mode, if valid.
    pub fn to_mode(&self) -> Result<FillMode, String> {
        match self {
            FillSetting::Name(s) if s == "mean" => Ok(FillMode::MeanBackground),
            FillSetting::Name(s) => Err(format!("unknown fill mode {s:?}, expected \"mean\" or a number")),
            FillSetting::Constant(v) if v.is_finite() => Ok(FillMode::Constant(*v)),
            FillSetting::Constant(v) => Err(format!("fill constant {v} is not finite")),
        }
    }
}

/// View-separation settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ViewConfig {
    /// Background pooling grid side G; the background view has G*G columns.
    pub grid: usize,
    /// Fill mode for the background-image demo.
    pub fill: FillSetting,
}

impl Default for ViewConfig {
    fn default() -> Self {
        ViewConfig {
            grid: 4,
            fill: FillSetting::Name("mean".into()),
        }
    }
}

/// Question-encoder settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuestionConfig {
    /// Embedding dimension n.
    pub dim: usize,
    /// Token slots h; longer questions are truncated, shorter ones padded
    /// with zero columns.
    pub slots: usize,
    /// Seed of the hashed token embedding.
    pub seed: u64,
}

impl Default for QuestionConfig {
    fn default() -> Self {
        QuestionConfig {
            dim: 768,
            slots: 14,
            seed: 1,
        }
    }
}

/// Attention-model shape settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    /// Feature dimension L shared by both views (must match the dataset).
    pub region_dim: usize,
    /// Instance-column budget rho; datasets with fewer instances are padded
    /// with zero columns, more is an error.
    pub instance_budget: usize,
    /// Pooled glimpse dimension.
    pub glimpse_dim: usize,
    /// Rank of the attention-logit factorization.
    pub logit_rank: usize,
    /// Glimpse (head) count.
    pub heads: usize,
    /// Fused vector dimension produced by stage one.
    pub fused_dim: usize,
    /// Answer vocabulary size.
    pub answers: usize,
    /// Stage wiring, e.g. "i-b-q" (see the wiring list in the model crate).
    pub order: String,
    /// Exclude all-zero question columns from attention.
    pub mask_padding: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            region_dim: 2048,
            instance_budget: 64,
            glimpse_dim: 512,
            logit_rank: 512,
            heads: 8,
            fused_dim: 1024,
            answers: 3129,
            order: "i-b-q".into(),
            mask_padding: false,
        }
    }
}

/// Optimizer and loop settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    /// Number of passes over the training set.
    pub epochs: usize,
    /// Samples per parameter update.
    pub batch_size: usize,
    /// Base learning rate after warmup.
    pub lr: f64,
    /// Momentum coefficient.
    pub momentum: f64,
    /// L2 weight decay added to raw gradients.
    pub weight_decay: f64,
    /// Gradient clipping threshold.
    pub clip_norm: f64,
    /// Clamp each entry to [-clip, clip] instead of rescaling the global norm.
    pub per_element_clip: bool,
    /// Warmup starts at this fraction of the base rate.
    pub warmup_ratio: f64,
    /// Fraction of total steps spent warming up.
    pub warmup_frac: f64,
    /// Dropout rate on projected views and the fused vector.
    pub dropout: f64,
    /// Seed of the training stream (init, shuffling, dropout).
    pub seed: u64,
}

impl Default for TrainSection {
    fn default() -> Self {
        TrainSection {
            epochs: 100,
            batch_size: 256,
            lr: 1e-2,
            momentum: 0.9,
            weight_decay: 1e-4,
            clip_norm: 0.25,
            per_element_clip: false,
            warmup_ratio: 1.0 / 3.0,
            warmup_frac: 0.1,
            dropout: 0.5,
            seed: 1,
        }
    }
}

/// The complete run configuration.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Mask-decoding settings.
    pub decode: DecodeConfig,
    /// Suppression settings.
    pub nms: NmsConfig,
    /// View-separation settings.
    pub view: ViewConfig,
    /// Question-encoder settings.
    pub question: QuestionConfig,
    /// Attention-model shape.
    pub model: ModelConfig,
    /// Optimizer and loop settings.
    pub train: TrainSection,
}

impl RunConfig {
    /// Small preset used by fixtures, demos and the synthetic dataset.
    pub fn toy() -> Self {
        RunConfig {
            decode: DecodeConfig {
                grid: 4,
                categories: 3,
                score_threshold: 0.1,
                mask_threshold: 0.5,
            },
            nms: NmsConfig {
                post_threshold: 0.05,
            },
            view: ViewConfig {
                grid: 2,
                fill: FillSetting::Name("mean".into()),
            },
            question: QuestionConfig {
                dim: 12,
                slots: 6,
                seed: 1,
            },
            model: ModelConfig {
                region_dim: 8,
                instance_budget: 4,
                glimpse_dim: 4,
                logit_rank: 3,
                heads: 2,
                fused_dim: 10,
                answers: 6,
                order: "i-b-q".into(),
                mask_padding: false,
            },
            train: TrainSection {
                epochs: 200,
                batch_size: 8,
                lr: 0.2,
                momentum: 0.9,
                weight_decay: 1e-4,
                clip_norm: 0.25,
                per_element_clip: false,
                warmup_ratio: 1.0 / 3.0,
                warmup_frac: 0.1,
                dropout: 0.0,
                seed: 1,
            },
        }
    }

    /// Parses and fully validates a TOML config file.
    pub fn load(path: impl AsRef<Path>) -> anyhow::Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| anyhow::anyhow!("cannot read config {}: {e}", path.display()))?;
        Self::parse(&text)
    }

    /// Parses and fully validates TOML text.
    pub fn parse(text: &str) -> anyhow::Result<Self> {
        let cfg: RunConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Serializes the config as TOML.
    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config always serializes")
    }

    /// Checks every field; returns all problems at once, each naming the
    /// offending `section.field`.
    pub fn validate(&self) -> Result<(), ConfigError> {
        fn need(problems: &mut Vec<String>, ok: bool, msg: &str) {
            if !ok {
                problems.push(msg.to_string());
            }
        }
        let mut problems = Vec::new();
        let p = &mut problems;

        need(p, self.decode.grid > 0, "decode.grid: must be positive");
        need(p, self.decode.categories > 0, "decode.categories: must be positive");
        for (name, v) in [
            ("decode.score_threshold", self.decode.score_threshold),
            ("decode.mask_threshold", self.decode.mask_threshold),
            ("nms.post_threshold", self.nms.post_threshold),
        ] {
            if !(0.0..=1.0).contains(&v) {
                p.push(format!("{name}: {v} outside [0, 1]"));
            }
        }
        need(p, self.view.grid > 0, "view.grid: must be positive");
        if let Err(e) = self.view.fill.to_mode() {
            p.push(format!("view.fill: {e}"));
        }
        need(p, self.question.dim > 0, "question.dim: must be positive");
        need(p, self.question.slots > 0, "question.slots: must be positive");

        for (name, v) in [
            ("model.region_dim", self.model.region_dim),
            ("model.instance_budget", self.model.instance_budget),
            ("model.glimpse_dim", self.model.glimpse_dim),
            ("model.logit_rank", self.model.logit_rank),
            ("model.heads", self.model.heads),
            ("model.fused_dim", self.model.fused_dim),
            ("model.answers", self.model.answers),
        ] {
            if v == 0 {
                p.push(format!("{name}: must be positive"));
            }
        }
        if self.model.order.parse::<ComposeOrder>().is_err() {
            p.push(format!(
                "model.order: unknown wiring {:?}, expected one of {}",
                self.model.order,
                ComposeOrder::ALL
                    .iter()
                    .map(|o| format!("{:?}", o.as_str()))
                    .collect::<Vec<_>>()
                    .join(", ")
            ));
        }

        need(p, self.train.epochs > 0, "train.epochs: must be positive");
        need(p, self.train.batch_size > 0, "train.batch_size: must be positive");
        need(
            p,
            self.train.lr.is_finite() && self.train.lr >= 0.0,
            "train.lr: must be finite and non-negative",
        );
        need(
            p,
            self.train.momentum.is_finite() && (0.0..1.0).contains(&self.train.momentum),
            "train.momentum: must lie in [0, 1)",
        );
        need(
            p,
            self.train.weight_decay.is_finite() && self.train.weight_decay >= 0.0,
            "train.weight_decay: must be finite and non-negative",
        );
        need(
            p,
            !self.train.clip_norm.is_nan() && self.train.clip_norm > 0.0,
            "train.clip_norm: must be positive",
        );
        need(
            p,
            self.train.warmup_ratio.is_finite()
                && self.train.warmup_ratio > 0.0
                && self.train.warmup_ratio <= 1.0,
            "train.warmup_ratio: must lie in (0, 1]",
        );
        need(
            p,
            self.train.warmup_frac.is_finite()
                && (0.0..=1.0).contains(&self.train.warmup_frac),
            "train.warmup_frac: must lie in [0, 1]",
        );
        need(
            p,
            self.train.dropout.is_finite() && (0.0..1.0).contains(&self.train.dropout),
            "train.dropout: must lie in [0, 1)",
        );

        if problems.is_empty() {
            Ok(())
        } else {
            Err(ConfigError(problems))
        }
    }

    /// Model shape implied by the config (background columns come from the
    /// view grid, question shape from the encoder section).
    pub fn model_dims(&self) -> ModelDims {
        ModelDims {
            region_dim: self.model.region_dim,
            instance_cols: self.model.instance_budget,
            background_cols: self.view.grid * self.view.grid,
            question_dim: self.question.dim,
            question_slots: self.question.slots,
            glimpse_dim: self.model.glimpse_dim,
            logit_rank: self.model.logit_rank,
            heads: self.model.heads,
            fused_dim: self.model.fused_dim,
            answer_count: self.model.answers,
            order: self
                .model
                .order
                .parse()
                .expect("validated before use"),
            mask_padding: self.model.mask_padding,
        }
    }

    /// Core training settings implied by the config.
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.train.epochs,
            batch_size: self.train.batch_size,
            lr: self.train.lr,
            momentum: self.train.momentum,
            weight_decay: self.train.weight_decay,
            clip_norm: self.train.clip_norm,
            per_element_clip: self.train.per_element_clip,
            warmup_ratio: self.train.warmup_ratio,
            warmup_frac: self.train.warmup_frac,
            dropout: self.train.dropout,
            seed: self.train.seed,
        }
    }
}
