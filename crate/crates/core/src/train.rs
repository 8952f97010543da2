//! Toy optimization loop: SGD with momentum, weight decay, gradient
//! clipping, and a linear learning-rate warm-up, plus the cross-entropy loss
//! the answer classifier trains against.
//!
//! Everything is deterministic for a fixed seed: shuffling and dropout draw
//! from one stream derived from the seed, batches accumulate gradients in
//! ascending sample-index order, and all reductions run in fixed order.

use alloc::format;
use alloc::vec::Vec;

use rand::RngCore;

use crate::attention::{DropoutMode, ModelDims, ModelParams};
use crate::error::{Error, Result};
use crate::mat::Mat;
use crate::math::{exp, ln};
use crate::rng::{self, ChaCha8Rng};

/// One training example: the two view matrices, the encoded question, and
/// the target answer index.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub instance: Mat,
    pub background: Mat,
    pub question: Mat,
    pub answer: usize,
}

/// Numerically stable softmax.
pub fn softmax(xs: &[f64]) -> Vec<f64> {
    let max = xs.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let exps: Vec<f64> = xs.iter().map(|&x| exp(x - max)).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Cross-entropy of the softmax distribution against `target`, with its
/// gradient `softmax(logits) - onehot(target)`.
///
/// Computed as `ln(sum exp(l - max)) - (l[target] - max)`, which stays finite
/// for any finite logits.
pub fn cross_entropy(logits: &[f64], target: usize) -> Result<(f64, Vec<f64>)> {
    if target >= logits.len() {
        return Err(Error::Domain {
            context: "cross_entropy",
            detail: format!("target {target} out of range for {} answers", logits.len()),
        });
    }
    let max = logits.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let exps: Vec<f64> = logits.iter().map(|&x| exp(x - max)).collect();
    let sum: f64 = exps.iter().sum();
    let loss = ln(sum) - (logits[target] - max);
    if !loss.is_finite() {
        return Err(Error::NonFinite {
            context: "cross_entropy",
        });
    }
    let dlogits = exps
        .into_iter()
        .enumerate()
        .map(|(i, e)| e / sum - if i == target { 1.0 } else { 0.0 })
        .collect();
    Ok((loss, dlogits))
}

/// Learning rate at `step`: ramps linearly from `ratio * base_lr` to
/// `base_lr` across the first `total_warmup_steps` steps, constant afterward.
pub fn warmup(step: usize, total_warmup_steps: usize, base_lr: f64, ratio: f64) -> f64 {
    if step >= total_warmup_steps {
        return base_lr;
    }
    let frac = step as f64 / total_warmup_steps as f64;
    base_lr * (ratio + (1.0 - ratio) * frac)
}

/// Clips `grads` in place and returns the pre-clip global L2 norm.
///
/// By default the whole gradient is rescaled by `clip_norm / norm` whenever
/// the global norm exceeds `clip_norm`; with `per_element` each entry is
/// instead clamped to `[-clip_norm, clip_norm]` independently.
pub fn clip_gradients(grads: &mut ModelParams, clip_norm: f64, per_element: bool) -> f64 {
    let norm = grads.global_norm();
    if per_element {
        for (_, t) in grads.tensors_mut() {
            for v in t.data_mut() {
                *v = v.clamp(-clip_norm, clip_norm);
            }
        }
    } else if norm > clip_norm {
        grads.scale_params(clip_norm / norm);
    }
    norm
}

/// Momentum-SGD state: hyperparameters, the step counter driving warm-up,
/// and one velocity buffer per parameter tensor.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    pub lr: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub clip_norm: f64,
    pub warmup_ratio: f64,
    pub warmup_steps: usize,
    pub step: usize,
    velocity: ModelParams,
}

impl OptimizerState {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        dims: ModelDims,
        lr: f64,
        momentum: f64,
        weight_decay: f64,
        clip_norm: f64,
        warmup_ratio: f64,
        warmup_steps: usize,
    ) -> Result<Self> {
        if !(lr >= 0.0 && lr.is_finite()) {
            return Err(Error::Domain {
                context: "OptimizerState",
                detail: format!("lr must be finite and non-negative, got {lr}"),
            });
        }
        if !(0.0..1.0).contains(&momentum) {
            return Err(Error::Domain {
                context: "OptimizerState",
                detail: format!("momentum must be in [0, 1), got {momentum}"),
            });
        }
        if !(weight_decay >= 0.0 && weight_decay.is_finite()) {
            return Err(Error::Domain {
                context: "OptimizerState",
                detail: format!("weight_decay must be non-negative, got {weight_decay}"),
            });
        }
        if clip_norm.is_nan() || clip_norm <= 0.0 {
            return Err(Error::Domain {
                context: "OptimizerState",
                detail: format!("clip_norm must be positive, got {clip_norm}"),
            });
        }
        if !(0.0 < warmup_ratio && warmup_ratio <= 1.0) {
            return Err(Error::Domain {
                context: "OptimizerState",
                detail: format!("warmup_ratio must be in (0, 1], got {warmup_ratio}"),
            });
        }
        Ok(OptimizerState {
            lr,
            momentum,
            weight_decay,
            clip_norm,
            warmup_ratio,
            warmup_steps,
            step: 0,
            velocity: ModelParams::zeros(dims)?,
        })
    }

    /// Learning rate the next step will use.
    pub fn current_lr(&self) -> f64 {
        warmup(self.step, self.warmup_steps, self.lr, self.warmup_ratio)
    }
}

/// One optimizer step: `g' = g + wd * theta; v = mu * v + g';
/// theta -= lr_t * v`, with `lr_t` from the warm-up schedule. Advances the
/// step counter and returns the learning rate that was applied.
pub fn sgd_step(
    params: &mut ModelParams,
    grads: &ModelParams,
    state: &mut OptimizerState,
) -> Result<f64> {
    let lr_t = state.current_lr();
    let (mu, wd) = (state.momentum, state.weight_decay);
    for (((_, theta), (name, g)), (_, v)) in params
        .tensors_mut()
        .into_iter()
        .zip(grads.tensors())
        .zip(state.velocity.tensors_mut())
    {
        if (theta.rows(), theta.cols()) != (g.rows(), g.cols()) {
            return Err(Error::Shape {
                context: "sgd_step",
                expected: format!("{name} {}x{}", theta.rows(), theta.cols()),
                actual: format!("{}x{}", g.rows(), g.cols()),
            });
        }
        for ((tv, &gv), vv) in theta
            .data_mut()
            .iter_mut()
            .zip(g.data())
            .zip(v.data_mut())
        {
            let g_decayed = gv + wd * *tv;
            *vv = mu * *vv + g_decayed;
            *tv -= lr_t * *vv;
        }
    }
    state.step += 1;
    Ok(lr_t)
}

/// Everything the training loop needs besides the data.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub clip_norm: f64,
    /// Clamp entries instead of rescaling the global norm.
    pub per_element_clip: bool,
    /// Warm-up starting multiplier (learning rate at step 0 = ratio * lr).
    pub warmup_ratio: f64,
    /// Fraction of total optimizer steps spent warming up.
    pub warmup_frac: f64,
    pub dropout: f64,
    pub seed: u64,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Domain {
                context: "TrainConfig",
                detail: format!(
                    "epochs and batch_size must be positive (got {}, {})",
                    self.epochs, self.batch_size
                ),
            });
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Domain {
                context: "TrainConfig",
                detail: format!("dropout must be in [0, 1), got {}", self.dropout),
            });
        }
        if !(0.0..=1.0).contains(&self.warmup_frac) {
            return Err(Error::Domain {
                context: "TrainConfig",
                detail: format!("warmup_frac must be in [0, 1], got {}", self.warmup_frac),
            });
        }
        Ok(())
    }
}

/// Per-epoch training metrics, measured over the whole training set in eval
/// mode after the epoch's updates. `lr` is the rate applied by the epoch's
/// final optimizer step.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    pub accuracy: f64,
    pub lr: f64,
}

/// Mean cross-entropy and answer accuracy over `data`, dropout off.
pub fn evaluate(params: &ModelParams, data: &[Sample]) -> Result<(f64, f64)> {
    if data.is_empty() {
        return Err(Error::Domain {
            context: "evaluate",
            detail: "empty dataset".into(),
        });
    }
    let mut loss_sum = 0.0;
    let mut correct = 0usize;
    for s in data {
        let pass = params.forward(&s.instance, &s.background, &s.question, &mut DropoutMode::Eval)?;
        let (loss, _) = cross_entropy(pass.logits(), s.answer)?;
        loss_sum += loss;
        if pass.predicted() == s.answer {
            correct += 1;
        }
    }
    Ok((loss_sum / data.len() as f64, correct as f64 / data.len() as f64))
}

/// In-place Fisher–Yates, self-contained so shuffles never depend on a
/// library's internal algorithm choices.
fn shuffle(rng: &mut ChaCha8Rng, idx: &mut [usize]) {
    for i in (1..idx.len()).rev() {
        let j = (rng.next_u64() % (i as u64 + 1)) as usize;
        idx.swap(i, j);
    }
}

/// Key separating the training stream from other consumers of the same seed.
const TRAIN_STREAM: u64 = 0x5452_4149_4e5f_5347;

/// Runs the full loop on `params`, returning one record per epoch.
///
/// Each epoch shuffles the sample indices, walks them in batches, and within
/// a batch accumulates gradients in ascending sample-index order before
/// averaging, clipping, and stepping. Metrics are measured after the epoch
/// with dropout disabled. Two calls with identical inputs produce
/// bit-identical parameters and records.
pub fn train(
    params: &mut ModelParams,
    data: &[Sample],
    cfg: &TrainConfig,
) -> Result<Vec<EpochRecord>> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::Domain {
            context: "train",
            detail: "empty dataset".into(),
        });
    }
    let t = params.dims.answer_count;
    for (i, s) in data.iter().enumerate() {
        if s.answer >= t {
            return Err(Error::Domain {
                context: "train",
                detail: format!("sample {i}: answer {} out of range (T = {t})", s.answer),
            });
        }
    }

    let batches_per_epoch = data.len().div_ceil(cfg.batch_size);
    let total_steps = cfg.epochs * batches_per_epoch;
    let warmup_steps = crate::math::ceil((total_steps as f64) * cfg.warmup_frac) as usize;
    let mut state = OptimizerState::new(
        params.dims,
        cfg.lr,
        cfg.momentum,
        cfg.weight_decay,
        cfg.clip_norm,
        cfg.warmup_ratio,
        warmup_steps,
    )?;

    let mut rng = rng::seeded(rng::mix(cfg.seed, TRAIN_STREAM));
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut records = Vec::with_capacity(cfg.epochs);

    for epoch in 1..=cfg.epochs {
        shuffle(&mut rng, &mut order);
        let mut last_lr = state.current_lr();
        for chunk in order.chunks(cfg.batch_size) {
            let mut batch: Vec<usize> = chunk.to_vec();
            batch.sort_unstable();
            let mut grads = ModelParams::zeros(params.dims)?;
            for &si in &batch {
                let s = &data[si];
                let mut mode = DropoutMode::Train {
                    rate: cfg.dropout,
                    rng: &mut rng,
                };
                let pass = params.forward(&s.instance, &s.background, &s.question, &mut mode)?;
                let (_, dlogits) = cross_entropy(pass.logits(), s.answer)?;
                let (g, _) = params.backward(&pass, &dlogits)?;
                grads.add_scaled_params(&g, 1.0);
            }
            grads.scale_params(1.0 / batch.len() as f64);
            clip_gradients(&mut grads, cfg.clip_norm, cfg.per_element_clip);
            last_lr = sgd_step(params, &grads, &mut state)?;
        }
        let (loss, accuracy) = evaluate(params, data)?;
        records.push(EpochRecord {
            epoch,
            loss,
            accuracy,
            lr: last_lr,
        });
    }
    Ok(records)
}
