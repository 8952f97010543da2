//! Analytic gradients for the two-stage model.
//!
//! Every formula here is the hand-derived adjoint of the corresponding
//! forward step; no tape or autodiff is involved. Given the cached
//! [`ForwardPass`](super::ForwardPass) and `dL/dlogits`, the backward pass
//! produces a gradient [`ModelParams`] (same shapes, canonical tensor order)
//! plus gradients with respect to the three inputs.
//!
//! Per stage, with `X~ = X tanh(X^T W + b)` and projections
//! `P = U^T X~`, `Q = Z^T Y~`, `A = U'^T X~`, `B = Z'^T Y~`:
//!
//! - pooling `O_g[r] = sum_ij alpha_g[i,j] A[r,i] B[r,j]` gives
//!   `dA[r,i] = dO_g[r] (B alpha_g^T)[r,i]`,
//!   `dB[r,j] = dO_g[r] (A alpha_g)[r,j]`, and
//!   `dalpha_g[i,j] = sum_r dO_g[r] A[r,i] B[r,j]`;
//! - the joint softmax folds back as
//!   `dL = alpha ⊙ (dalpha - sum(dalpha ⊙ alpha))`;
//! - logits `L_g[i,j] = sum_r p_g[r] P[r,i] Q[r,j]` give
//!   `dp_g[r] = sum_j (P dL)[r,j] Q[r,j]`,
//!   `dP[r,i] += p_g[r] (Q dL^T)[r,i]`,
//!   `dQ[r,j] += p_g[r] (P dL)[r,j]`;
//! - each projection `P = U^T X~` contributes `dU = X~ dP^T` and
//!   `dX~ += U dP`;
//! - the gate `X~ = X T`, `T = tanh(M)`, `M = X^T W + 1b` unwinds as
//!   `dT = X^T dX~`, `dX = dX~ T^T`, `dM = dT ⊙ (1 - T^2)`,
//!   `dW = X dM`, `db = colsum(dM)`, `dX += W dM^T`.
//!
//! Rows removed by input truncation receive zero gradient; dropout factors
//! (0 or 1/keep) multiply straight through.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::mat::{dot, Mat};

use super::forward::{ForwardPass, StageCache};
use super::params::{ComposeOrder, ModelParams, StageParams};

/// Gradients of the loss with respect to the three model inputs, shaped like
/// the inputs themselves.
#[derive(Debug, Clone, PartialEq)]
pub struct InputGrads {
    pub instance: Mat,
    pub background: Mat,
    pub question: Mat,
}

/// Zero-extends `m` to `rows` rows (the adjoint of row truncation).
fn pad_rows(m: &Mat, rows: usize) -> Mat {
    debug_assert!(rows >= m.rows());
    let mut out = Mat::zeros(rows, m.cols());
    for r in 0..m.rows() {
        out.row_mut(r).copy_from_slice(m.row(r));
    }
    out
}

/// Adjoint of one tanh gate. Accumulates `dW`, `db` into `gw`, `gb` and
/// returns the gradient with respect to the (truncated) input.
fn gate_backward(
    w: &Mat,
    x_trunc: &Mat,
    t: &Mat,
    dxt: &Mat,
    gw: &mut Mat,
    gb: &mut Mat,
) -> Mat {
    let dt = x_trunc.tn_mul(dxt); // k x k
    let mut dx = dxt.nt_mul(t); // d x k: product-rule term through X
    let mut dm = dt;
    for (v, &tv) in dm.data_mut().iter_mut().zip(t.data()) {
        *v *= 1.0 - tv * tv;
    }
    gw.add_scaled(&x_trunc.mul(&dm), 1.0);
    for (j, s) in dm.col_sums().iter().enumerate() {
        *gb.at_mut(0, j) += s;
    }
    dx.add_scaled(&w.nt_mul(&dm), 1.0);
    dx
}

/// Adjoint of one attention stage. `dglimpses[g]` is `dL/dO_g`. Parameter
/// gradients accumulate into `g`; the returns are the input gradients padded
/// back to the operands' untruncated row counts.
fn stage_backward(
    sp: &StageParams,
    c: &StageCache,
    dglimpses: &[Vec<f64>],
    g: &mut StageParams,
) -> (Mat, Mat) {
    let gamma = sp.pool_x.cols();
    let rank = sp.logit_x.cols();
    let (kx, ky) = (c.shape.kx, c.shape.ky);

    let mut dax = Mat::zeros(gamma, kx);
    let mut dby = Mat::zeros(gamma, ky);
    let mut dpx = Mat::zeros(rank, kx);
    let mut dqy = Mat::zeros(rank, ky);

    for (gi, dout) in dglimpses.iter().enumerate() {
        let alpha = &c.alphas[gi];

        // Pooling: O[r] = sum_ij alpha[i,j] ax[r,i] by[r,j].
        let s = c.by.nt_mul(alpha); // gamma x kx
        let t = c.ax.mul(alpha); // gamma x ky
        for r in 0..gamma {
            let d = dout[r];
            if d == 0.0 {
                continue;
            }
            for (acc, &sv) in dax.row_mut(r).iter_mut().zip(s.row(r)) {
                *acc += d * sv;
            }
            for (acc, &tv) in dby.row_mut(r).iter_mut().zip(t.row(r)) {
                *acc += d * tv;
            }
        }

        if !c.attended {
            continue; // uniform alpha is a constant: no logit-side gradient
        }

        // dalpha[i,j] = sum_r dout[r] ax[r,i] by[r,j]
        let mut weighted_ax = c.ax.clone();
        for r in 0..gamma {
            let d = dout[r];
            for v in weighted_ax.row_mut(r) {
                *v *= d;
            }
        }
        let dalpha = weighted_ax.tn_mul(&c.by); // kx x ky

        // Joint softmax: dL = alpha ⊙ (dalpha - <dalpha, alpha>).
        let inner: f64 = dot(dalpha.data(), alpha.data());
        let mut dlog = dalpha;
        for (v, &av) in dlog.data_mut().iter_mut().zip(alpha.data()) {
            *v = av * (*v - inner);
        }

        // Logits: L[i,j] = sum_r mix[r,gi] px[r,i] qy[r,j].
        let t1 = c.px.mul(&dlog); // rank x ky
        let q1 = c.qy.nt_mul(&dlog); // rank x kx
        for r in 0..rank {
            let mixv = sp.glimpse_mix.at(r, gi);
            *g.glimpse_mix.at_mut(r, gi) += dot(t1.row(r), c.qy.row(r));
            for (acc, &qv) in dpx.row_mut(r).iter_mut().zip(q1.row(r)) {
                *acc += mixv * qv;
            }
            for (acc, &tv) in dqy.row_mut(r).iter_mut().zip(t1.row(r)) {
                *acc += mixv * tv;
            }
        }
    }

    // Projections: px = logit_x^T xt, ax = pool_x^T xt (same pattern on y).
    g.logit_x.add_scaled(&c.xt.nt_mul(&dpx), 1.0);
    g.logit_y.add_scaled(&c.yt.nt_mul(&dqy), 1.0);
    g.pool_x.add_scaled(&c.xt.nt_mul(&dax), 1.0);
    g.pool_y.add_scaled(&c.yt.nt_mul(&dby), 1.0);

    let mut dxt = sp.logit_x.mul(&dpx);
    dxt.add_scaled(&sp.pool_x.mul(&dax), 1.0);
    let mut dyt = sp.logit_y.mul(&dqy);
    dyt.add_scaled(&sp.pool_y.mul(&dby), 1.0);

    // Dropout applied multiplicative factors; so does its adjoint.
    if let Some(f) = &c.drop_x {
        for (v, &fv) in dxt.data_mut().iter_mut().zip(f) {
            *v *= fv;
        }
    }
    if let Some(f) = &c.drop_y {
        for (v, &fv) in dyt.data_mut().iter_mut().zip(f) {
            *v *= fv;
        }
    }

    let dx = gate_backward(
        &sp.gate_x.w,
        &c.x_trunc,
        &c.tx,
        &dxt,
        &mut g.gate_x.w,
        &mut g.gate_x.b,
    );
    let dy = gate_backward(
        &sp.gate_y.w,
        &c.y_trunc,
        &c.ty,
        &dyt,
        &mut g.gate_y.w,
        &mut g.gate_y.b,
    );

    (pad_rows(&dx, c.shape.x_rows), pad_rows(&dy, c.shape.y_rows))
}

impl ModelParams {
    /// Backpropagates `dlogits = dL/dlogits` through the cached pass.
    ///
    /// Returns parameter gradients (a [`ModelParams`] of identical shapes)
    /// and input gradients. The pass must have been produced by `forward` on
    /// these parameters; dropout factors recorded in the cache are reapplied
    /// so train-mode gradients match the train-mode forward exactly.
    pub fn backward(
        &self,
        pass: &ForwardPass,
        dlogits: &[f64],
    ) -> Result<(ModelParams, InputGrads)> {
        let dims = &self.dims;
        if dlogits.len() != dims.answer_count {
            return Err(Error::Shape {
                context: "backward: dlogits",
                expected: format!("length {}", dims.answer_count),
                actual: format!("length {}", dlogits.len()),
            });
        }
        let mut g = ModelParams::zeros(*dims)?;

        // Classifier: logits = W pooled + b.
        let mut dpooled = alloc::vec![0.0; dims.glimpse_dim];
        for (t, &dl) in dlogits.iter().enumerate() {
            *g.classifier.b.at_mut(0, t) += dl;
            for (r, &pv) in pass.pooled.iter().enumerate() {
                *g.classifier.w.at_mut(t, r) += dl * pv;
                dpooled[r] += self.classifier.w.at(t, r) * dl;
            }
        }

        // Stage two combines glimpses by summation: each glimpse sees dpooled.
        let dg2: Vec<Vec<f64>> = (0..dims.heads).map(|_| dpooled.clone()).collect();
        let (dx2, dy2) = stage_backward(&self.stage2, &pass.s2, &dg2, &mut g.stage2);

        // dx2 is m x 1: the gradient on the post-dropout fused vector.
        let mut dv: Vec<f64> = dx2.data().to_vec();
        if let Some(f) = &pass.drop_v {
            for (v, &fv) in dv.iter_mut().zip(f) {
                *v *= fv;
            }
        }

        // Fusion affine: v_pre = W concat + b.
        let mut dconcat = alloc::vec![0.0; pass.concat.len()];
        for (r, &dvr) in dv.iter().enumerate() {
            *g.fuse.b.at_mut(0, r) += dvr;
            if dvr == 0.0 {
                continue;
            }
            for (cidx, &cv) in pass.concat.iter().enumerate() {
                *g.fuse.w.at_mut(r, cidx) += dvr * cv;
                dconcat[cidx] += self.fuse.w.at(r, cidx) * dvr;
            }
        }

        // Stage one: glimpse g owns concat slice [g*gamma, (g+1)*gamma).
        let dg1: Vec<Vec<f64>> = (0..dims.heads)
            .map(|h| dconcat[h * dims.glimpse_dim..(h + 1) * dims.glimpse_dim].to_vec())
            .collect();
        let (dx1, dy1) = stage_backward(&self.stage1, &pass.s1, &dg1, &mut g.stage1);

        // Route stage gradients back to the named inputs.
        let mut inputs = InputGrads {
            instance: Mat::zeros(dims.region_dim, dims.instance_cols),
            background: Mat::zeros(dims.region_dim, dims.background_cols),
            question: Mat::zeros(dims.question_dim, dims.question_slots),
        };
        match dims.order {
            ComposeOrder::IBQ | ComposeOrder::IB | ComposeOrder::NoAttention => {
                inputs.instance.add_scaled(&dx1, 1.0);
                inputs.background.add_scaled(&dy1, 1.0);
                inputs.question.add_scaled(&dy2, 1.0);
            }
            ComposeOrder::IQB | ComposeOrder::IQ => {
                inputs.instance.add_scaled(&dx1, 1.0);
                inputs.question.add_scaled(&dy1, 1.0);
                inputs.background.add_scaled(&dy2, 1.0);
            }
            ComposeOrder::BQI | ComposeOrder::BQ => {
                inputs.background.add_scaled(&dx1, 1.0);
                inputs.question.add_scaled(&dy1, 1.0);
                inputs.instance.add_scaled(&dy2, 1.0);
            }
        }

        Ok((g, inputs))
    }
}
