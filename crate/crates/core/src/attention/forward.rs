//! Forward evaluation of the two-stage model, caching every intermediate the
//! analytic backward pass needs.

use alloc::format;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::mat::{argmax, dot, Mat};
use crate::rng::ChaCha8Rng;

use super::params::{ComposeOrder, ModelParams, StageParams, StageShape};
use super::{attention_softmax, tanh_gate, uniform_map};

/// Whether dropout is live. In `Train` mode each site multiplies entries by
/// `0` (with probability `rate`) or `1/(1-rate)`, drawing from the supplied
/// stream in a fixed order: stage-one X then Y, the fused vector, stage-two X
/// then Y. `Eval` (and `rate == 0`) leaves values untouched and draws nothing.
pub enum DropoutMode<'a> {
    Eval,
    Train { rate: f64, rng: &'a mut ChaCha8Rng },
}

impl DropoutMode<'_> {
    fn apply(&mut self, m: Mat) -> (Mat, Option<Vec<f64>>) {
        match self {
            DropoutMode::Eval => (m, None),
            DropoutMode::Train { rate, rng } => {
                let rate = *rate;
                if rate == 0.0 {
                    return (m, None);
                }
                let keep = 1.0 / (1.0 - rate);
                let factors: Vec<f64> = (0..m.rows() * m.cols())
                    .map(|_| if rng.gen::<f64>() < rate { 0.0 } else { keep })
                    .collect();
                let mut out = m;
                for (v, f) in out.data_mut().iter_mut().zip(&factors) {
                    *v *= f;
                }
                (out, Some(factors))
            }
        }
    }

    fn validate(&self) -> Result<()> {
        if let DropoutMode::Train { rate, .. } = self {
            if !(0.0..1.0).contains(rate) {
                return Err(Error::Domain {
                    context: "DropoutMode",
                    detail: format!("dropout rate must be in [0, 1), got {rate}"),
                });
            }
        }
        Ok(())
    }
}

/// Everything one stage computed, kept for the backward pass.
pub(crate) struct StageCache {
    pub shape: StageShape,
    pub attended: bool,
    /// Inputs truncated to `d` rows.
    pub x_trunc: Mat,
    pub y_trunc: Mat,
    /// tanh gate matrices (`kx x kx`, `ky x ky`).
    pub tx: Mat,
    pub ty: Mat,
    /// Gated projections after dropout (`d x kx`, `d x ky`).
    pub xt: Mat,
    pub yt: Mat,
    /// Dropout factors actually applied (entry-per-entry, row-major).
    pub drop_x: Option<Vec<f64>>,
    pub drop_y: Option<Vec<f64>>,
    /// Logit factor projections (`gamma' x kx`, `gamma' x ky`).
    pub px: Mat,
    pub qy: Mat,
    /// Pooling factor projections (`gamma x kx`, `gamma x ky`).
    pub ax: Mat,
    pub by: Mat,
    /// Per-glimpse attention maps (`kx x ky` each).
    pub alphas: Vec<Mat>,
    /// Per-glimpse pooled outputs (length `gamma` each).
    pub glimpses: Vec<Vec<f64>>,
}

/// A completed forward pass: answer logits plus the cached intermediates
/// needed to backpropagate or to inspect the attention maps.
pub struct ForwardPass {
    pub(crate) logits: Vec<f64>,
    pub(crate) s1: StageCache,
    pub(crate) concat: Vec<f64>,
    pub(crate) v: Vec<f64>,
    pub(crate) drop_v: Option<Vec<f64>>,
    pub(crate) s2: StageCache,
    pub(crate) pooled: Vec<f64>,
}

impl ForwardPass {
    /// Raw answer logits (length `answer_count`).
    pub fn logits(&self) -> &[f64] {
        &self.logits
    }

    /// Index of the highest-scoring answer (lowest index wins ties).
    pub fn predicted(&self) -> usize {
        argmax(&self.logits)
    }

    /// The fused vector `v` bridging the two stages (post-dropout).
    pub fn fused_vector(&self) -> &[f64] {
        &self.v
    }

    /// Stage-one attention maps, one per glimpse.
    pub fn intra_maps(&self) -> &[Mat] {
        &self.s1.alphas
    }

    /// Stage-two attention maps, one per glimpse.
    pub fn inter_maps(&self) -> &[Mat] {
        &self.s2.alphas
    }
}

fn check_shape(context: &'static str, m: &Mat, rows: usize, cols: usize) -> Result<()> {
    if m.rows() != rows || m.cols() != cols {
        return Err(Error::Shape {
            context,
            expected: format!("{rows}x{cols}"),
            actual: format!("{}x{}", m.rows(), m.cols()),
        });
    }
    Ok(())
}

/// Columns of `q` that are entirely zero (padding slots). Returns `None` when
/// nothing — or everything — is padding, since masking every column would
/// leave the softmax undefined.
fn padding_mask(q: &Mat) -> Option<Vec<bool>> {
    let mask: Vec<bool> = (0..q.cols())
        .map(|j| q.col(j).iter().all(|&v| v == 0.0))
        .collect();
    if mask.iter().all(|&m| m) || !mask.iter().any(|&m| m) {
        None
    } else {
        Some(mask)
    }
}

fn stage_forward(
    sp: &StageParams,
    shape: StageShape,
    x: &Mat,
    y: &Mat,
    attend: bool,
    ymask: Option<Vec<bool>>,
    mode: &mut DropoutMode,
) -> Result<StageCache> {
    let x_trunc = x.top_rows(shape.d);
    let y_trunc = y.top_rows(shape.d);

    let tx = tanh_gate(&x_trunc, &sp.gate_x.w, &sp.gate_x.b)?;
    let (xt, drop_x) = mode.apply(x_trunc.mul(&tx));
    let ty = tanh_gate(&y_trunc, &sp.gate_y.w, &sp.gate_y.b)?;
    let (yt, drop_y) = mode.apply(y_trunc.mul(&ty));

    let px = sp.logit_x.tn_mul(&xt);
    let qy = sp.logit_y.tn_mul(&yt);
    let ax = sp.pool_x.tn_mul(&xt);
    let by = sp.pool_y.tn_mul(&yt);

    let heads = sp.glimpse_mix.cols();
    let mut alphas = Vec::with_capacity(heads);
    let mut glimpses = Vec::with_capacity(heads);
    for g in 0..heads {
        let alpha = if attend {
            let mut scaled = px.clone();
            for r in 0..scaled.rows() {
                let w = sp.glimpse_mix.at(r, g);
                for v in scaled.row_mut(r) {
                    *v *= w;
                }
            }
            let mut logits = scaled.tn_mul(&qy);
            if let Some(mask) = &ymask {
                for (j, &masked) in mask.iter().enumerate() {
                    if masked {
                        for i in 0..logits.rows() {
                            *logits.at_mut(i, j) = f64::NEG_INFINITY;
                        }
                    }
                }
            }
            attention_softmax(&logits)
        } else {
            uniform_map(shape.kx, shape.ky)
        };
        let s = by.nt_mul(&alpha);
        let pooled: Vec<f64> = (0..ax.rows()).map(|r| dot(ax.row(r), s.row(r))).collect();
        alphas.push(alpha);
        glimpses.push(pooled);
    }

    Ok(StageCache {
        shape,
        attended: attend,
        x_trunc,
        y_trunc,
        tx,
        ty,
        xt,
        yt,
        drop_x,
        drop_y,
        px,
        qy,
        ax,
        by,
        alphas,
        glimpses,
    })
}

impl ModelParams {
    /// Runs the full model on one sample.
    ///
    /// `instance` is `region_dim x instance_cols`, `background` is
    /// `region_dim x background_cols`, `question` is
    /// `question_dim x question_slots`. The composition order in
    /// [`ModelDims`] decides which pair stage one relates and which input
    /// joins at stage two.
    pub fn forward(
        &self,
        instance: &Mat,
        background: &Mat,
        question: &Mat,
        mode: &mut DropoutMode,
    ) -> Result<ForwardPass> {
        mode.validate()?;
        let dims = &self.dims;
        check_shape("forward: instance", instance, dims.region_dim, dims.instance_cols)?;
        check_shape(
            "forward: background",
            background,
            dims.region_dim,
            dims.background_cols,
        )?;
        check_shape(
            "forward: question",
            question,
            dims.question_dim,
            dims.question_slots,
        )?;

        let (x1, y1): (&Mat, &Mat) = match dims.order {
            ComposeOrder::IBQ | ComposeOrder::IB | ComposeOrder::NoAttention => {
                (instance, background)
            }
            ComposeOrder::IQB | ComposeOrder::IQ => (instance, question),
            ComposeOrder::BQI | ComposeOrder::BQ => (background, question),
        };
        let y2: &Mat = match dims.order {
            ComposeOrder::IBQ | ComposeOrder::IB | ComposeOrder::NoAttention => question,
            ComposeOrder::IQB | ComposeOrder::IQ => background,
            ComposeOrder::BQI | ComposeOrder::BQ => instance,
        };

        let shape1 = dims.stage1_shape();
        let shape2 = dims.stage2_shape();
        let mask1 = if shape1.y_is_question && dims.mask_padding {
            padding_mask(question)
        } else {
            None
        };
        let mask2 = if shape2.y_is_question && dims.mask_padding {
            padding_mask(question)
        } else {
            None
        };

        let s1 = stage_forward(
            &self.stage1,
            shape1,
            x1,
            y1,
            dims.order.stage1_attends(),
            mask1,
            mode,
        )?;

        let mut concat = Vec::with_capacity(dims.glimpse_dim * dims.heads);
        for g in &s1.glimpses {
            concat.extend_from_slice(g);
        }
        let v_pre = self.fuse.apply(&concat);
        let (v_mat, drop_v) = mode.apply(Mat::from_vec(v_pre.len(), 1, v_pre)?);
        let v: Vec<f64> = v_mat.data().to_vec();

        let s2 = stage_forward(
            &self.stage2,
            shape2,
            &v_mat,
            y2,
            dims.order.stage2_attends(),
            mask2,
            mode,
        )?;

        // Stage-two glimpses combine by summation.
        let mut pooled = alloc::vec![0.0; dims.glimpse_dim];
        for g in &s2.glimpses {
            for (p, &x) in pooled.iter_mut().zip(g) {
                *p += x;
            }
        }
        let logits = self.classifier.apply(&pooled);
        if !logits.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite {
                context: "forward: answer logits",
            });
        }

        Ok(ForwardPass {
            logits,
            s1,
            concat,
            v,
            drop_v,
            s2,
            pooled,
        })
    }
}
