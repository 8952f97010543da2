//! Two-stage bilinear relation attention.
//!
//! Stage one relates the instance view `D` to the background view `B` (or to
//! the question, depending on the composition order) and fuses the attended
//! glimpses into one vector `v`; stage two relates `v` to the remaining
//! input, and the pooled result feeds the answer classifier.
//!
//! One stage, given operands `X` (d x kx after truncation) and `Y` (d x ky):
//!
//! 1. gate each side through a tanh conditioning matrix:
//!    `X~ = X * tanh(X^T Wx + bx)`, likewise `Y~`;
//! 2. per glimpse `g`, attention logits
//!    `L_g[i,j] = sum_r p_g[r] (U^T X~)[r,i] (Z^T Y~)[r,j]`,
//!    softmaxed jointly over all `kx * ky` entries;
//! 3. rank-gamma bilinear pooling
//!    `O_g[r] = sum_{i,j} alpha_g[i,j] (X~_i^T U'_r)(Z'_r^T Y~_j)`.
//!
//! When a stage does not attend (ablated orders), `alpha` is the uniform
//! matrix, which collapses step 3 to a bilinear product of mean-pooled
//! projections. Operands with mismatched row counts are aligned by truncating
//! both to the first `min` rows; truncated rows receive zero gradient.
//!
//! The primitives ([`tanh_gate`], [`project_tanh`], [`attention_logits`],
//! [`attention_softmax`], [`bilinear_pool`]) are public so tests can rebuild
//! the composition by hand; [`ModelParams::forward`] and
//! [`ModelParams::backward`] run the whole model with a reusable cache and
//! hand-derived analytic gradients.

mod backward;
mod forward;
pub mod params;

pub use backward::InputGrads;
pub use forward::{DropoutMode, ForwardPass};
pub use params::{Affine, ComposeOrder, GateParams, ModelDims, ModelParams, StageParams};

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::mat::{dot, Mat};
use crate::math::{exp, tanh};

/// The tanh conditioning matrix `tanh(X^T W + b)`, shape `k x k`.
///
/// `x` and `w` are both `d x k`; the bias `b` (`1 x k`) is added to every
/// row. Entries lie strictly in (-1, 1).
pub fn tanh_gate(x: &Mat, w: &Mat, b: &Mat) -> Result<Mat> {
    if x.rows() != w.rows() || x.cols() != w.cols() || b.rows() != 1 || b.cols() != w.cols() {
        return Err(Error::Shape {
            context: "tanh_gate",
            expected: format!("x,w {}x{}, b 1x{}", x.rows(), x.cols(), x.cols()),
            actual: format!(
                "w {}x{}, b {}x{}",
                w.rows(),
                w.cols(),
                b.rows(),
                b.cols()
            ),
        });
    }
    let mut m = x.tn_mul(w);
    for r in 0..m.rows() {
        for c in 0..m.cols() {
            *m.at_mut(r, c) = tanh(m.at(r, c) + b.at(0, c));
        }
    }
    Ok(m)
}

/// Projects `x` through its tanh gate: `X * tanh(X^T W + b)`, keeping the
/// row space of `x` (shape `d x k`). This is the projected representation the
/// attention logits and pooling consume.
pub fn project_tanh(x: &Mat, w: &Mat, b: &Mat) -> Result<Mat> {
    Ok(x.mul(&tanh_gate(x, w, b)?))
}

/// Attention logits `L[i,j] = sum_r p[r] (U^T X~)[r,i] (Z^T Y~)[r,j]`,
/// shape `kx x ky`.
pub fn attention_logits(xt: &Mat, yt: &Mat, u: &Mat, z: &Mat, p: &[f64]) -> Result<Mat> {
    if u.rows() != xt.rows() || z.rows() != yt.rows() || u.cols() != z.cols() {
        return Err(Error::Shape {
            context: "attention_logits",
            expected: format!("u {}x{}, z {}x{}", xt.rows(), u.cols(), yt.rows(), u.cols()),
            actual: format!("u {}x{}, z {}x{}", u.rows(), u.cols(), z.rows(), z.cols()),
        });
    }
    if p.len() != u.cols() {
        return Err(Error::Shape {
            context: "attention_logits",
            expected: format!("p length {}", u.cols()),
            actual: format!("{}", p.len()),
        });
    }
    let px = u.tn_mul(xt); // gamma' x kx
    let qy = z.tn_mul(yt); // gamma' x ky
    let mut scaled = px;
    for (r, &pr) in p.iter().enumerate() {
        for v in scaled.row_mut(r) {
            *v *= pr;
        }
    }
    Ok(scaled.tn_mul(&qy))
}

/// Softmax over *all* entries of the logit matrix jointly, stabilized by max
/// subtraction. Entries of `-inf` get weight exactly 0; if every entry is
/// `-inf` the map falls back to uniform.
pub fn attention_softmax(logits: &Mat) -> Mat {
    let max = logits
        .data()
        .iter()
        .fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let n = logits.rows() * logits.cols();
    if max == f64::NEG_INFINITY {
        return logits.map(|_| 1.0 / n as f64);
    }
    let mut out = logits.map(|v| exp(v - max));
    let sum = out.sum();
    out.scale(1.0 / sum);
    out
}

/// Rank-gamma bilinear pooling:
/// `O[r] = sum_{i,j} alpha[i,j] (X~_i^T U'_r)(Z'_r^T Y~_j)`.
pub fn bilinear_pool(xt: &Mat, yt: &Mat, alpha: &Mat, u2: &Mat, z2: &Mat) -> Result<Vec<f64>> {
    if alpha.rows() != xt.cols() || alpha.cols() != yt.cols() {
        return Err(Error::Shape {
            context: "bilinear_pool",
            expected: format!("alpha {}x{}", xt.cols(), yt.cols()),
            actual: format!("{}x{}", alpha.rows(), alpha.cols()),
        });
    }
    if u2.rows() != xt.rows() || z2.rows() != yt.rows() || u2.cols() != z2.cols() {
        return Err(Error::Shape {
            context: "bilinear_pool",
            expected: format!("u' {}x{}, z' {}x{}", xt.rows(), u2.cols(), yt.rows(), u2.cols()),
            actual: format!("u' {}x{}, z' {}x{}", u2.rows(), u2.cols(), z2.rows(), z2.cols()),
        });
    }
    let ax = u2.tn_mul(xt); // gamma x kx
    let by = z2.tn_mul(yt); // gamma x ky
    let s = by.nt_mul(alpha); // gamma x kx: s[r,i] = sum_j by[r,j] alpha[i,j]
    Ok((0..ax.rows()).map(|r| dot(ax.row(r), s.row(r))).collect())
}

/// The uniform attention map used by non-attending stages.
pub(crate) fn uniform_map(kx: usize, ky: usize) -> Mat {
    let v = 1.0 / (kx * ky) as f64;
    Mat::from_fn(kx, ky, |_, _| v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn tanh_gate_zero_input_and_range() {
        let x = Mat::zeros(3, 2);
        let w = Mat::zeros(3, 2);
        let b = Mat::zeros(1, 2);
        let t = tanh_gate(&x, &w, &b).unwrap();
        assert!(t.data().iter().all(|&v| v == 0.0));
        assert!(project_tanh(&x, &w, &b)
            .unwrap()
            .data()
            .iter()
            .all(|&v| v == 0.0));

        let mut rng = crate::rng::seeded(2);
        let x = Mat::uniform(&mut rng, 3, 2, 3.0);
        let w = Mat::uniform(&mut rng, 3, 2, 3.0);
        let b = Mat::uniform(&mut rng, 1, 2, 3.0);
        let t = tanh_gate(&x, &w, &b).unwrap();
        assert!(t.data().iter().all(|&v| v > -1.0 && v < 1.0));
    }

    #[test]
    fn tanh_gate_matches_elementwise_oracle() {
        let mut rng = crate::rng::seeded(4);
        let x = Mat::uniform(&mut rng, 3, 2, 1.0);
        let w = Mat::uniform(&mut rng, 3, 2, 1.0);
        let b = Mat::uniform(&mut rng, 1, 2, 1.0);
        let t = tanh_gate(&x, &w, &b).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let mut acc = b.at(0, j);
                for r in 0..3 {
                    acc += x.at(r, i) * w.at(r, j);
                }
                assert!((t.at(i, j) - crate::math::tanh(acc)).abs() < 1e-15);
            }
        }
        // and the projection composes back to x's row space
        let proj = project_tanh(&x, &w, &b).unwrap();
        let oracle = x.mul(&t);
        assert_eq!(proj, oracle);
        // shape errors
        assert!(tanh_gate(&x, &Mat::zeros(4, 2), &b).is_err());
    }

    #[test]
    fn logits_zero_p_and_rank1() {
        let mut rng = crate::rng::seeded(6);
        let xt = Mat::uniform(&mut rng, 4, 3, 1.0);
        let yt = Mat::uniform(&mut rng, 4, 2, 1.0);
        let u = Mat::uniform(&mut rng, 4, 2, 1.0);
        let z = Mat::uniform(&mut rng, 4, 2, 1.0);
        let l = attention_logits(&xt, &yt, &u, &z, &[0.0, 0.0]).unwrap();
        assert!(l.data().iter().all(|&v| v == 0.0));

        // gamma'=1 with all-ones factors: logits[i,j] = p * sum(X~_i) * sum(Y~_j)
        let ones = Mat::from_fn(4, 1, |_, _| 1.0);
        let l = attention_logits(&xt, &yt, &ones, &ones, &[0.5]).unwrap();
        for i in 0..3 {
            for j in 0..2 {
                let sx: f64 = xt.col(i).iter().sum();
                let sy: f64 = yt.col(j).iter().sum();
                assert!((l.at(i, j) - 0.5 * sx * sy).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn logits_match_triple_loop_oracle() {
        let mut rng = crate::rng::seeded(7);
        let (d, kx, ky, rank) = (5, 2, 3, 2);
        let xt = Mat::uniform(&mut rng, d, kx, 1.0);
        let yt = Mat::uniform(&mut rng, d, ky, 1.0);
        let u = Mat::uniform(&mut rng, d, rank, 1.0);
        let z = Mat::uniform(&mut rng, d, rank, 1.0);
        let p = vec![0.3, -0.8];
        let l = attention_logits(&xt, &yt, &u, &z, &p).unwrap();
        for i in 0..kx {
            for j in 0..ky {
                let mut want = 0.0;
                for r in 0..rank {
                    let ux = dot(&u.col(r), &xt.col(i));
                    let zy = dot(&z.col(r), &yt.col(j));
                    want += p[r] * ux * zy;
                }
                assert!((l.at(i, j) - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn softmax_normalizes_and_is_shift_invariant() {
        let l = Mat::from_vec(2, 3, vec![0.1, -2.0, 0.7, 3.0, 0.0, -1.0]).unwrap();
        let a = attention_softmax(&l);
        assert!((a.sum() - 1.0).abs() < 1e-12);
        assert!(a.data().iter().all(|&v| (0.0..=1.0).contains(&v)));
        let shifted = l.map(|v| v + 123.456);
        let b = attention_softmax(&shifted);
        for (x, y) in a.data().iter().zip(b.data()) {
            assert!((x - y).abs() < 1e-12);
        }
        // constant logits -> uniform
        let u = attention_softmax(&Mat::from_fn(2, 2, |_, _| 5.0));
        assert!(u.data().iter().all(|&v| (v - 0.25).abs() < 1e-15));
        // single entry -> [[1]]
        let one = attention_softmax(&Mat::from_fn(1, 1, |_, _| -3.2));
        assert_eq!(one.at(0, 0), 1.0);
        // -inf entries get exactly zero weight
        let mut l = Mat::from_fn(1, 2, |_, _| 0.0);
        *l.at_mut(0, 1) = f64::NEG_INFINITY;
        let a = attention_softmax(&l);
        assert_eq!(a.at(0, 0), 1.0);
        assert_eq!(a.at(0, 1), 0.0);
    }

    #[test]
    fn pool_zero_input_single_term_and_oracle() {
        let mut rng = crate::rng::seeded(8);
        let (d, g) = (4, 3);
        let u2 = Mat::uniform(&mut rng, d, g, 1.0);
        let z2 = Mat::uniform(&mut rng, d, g, 1.0);
        // zero X~ -> zero output
        let o = bilinear_pool(
            &Mat::zeros(d, 2),
            &Mat::uniform(&mut rng, d, 2, 1.0),
            &uniform_map(2, 2),
            &u2,
            &z2,
        )
        .unwrap();
        assert!(o.iter().all(|&v| v == 0.0));

        // kx=ky=1 with alpha=1: O[r] = (x^T u_r)(z_r^T y)
        let x = Mat::uniform(&mut rng, d, 1, 1.0);
        let y = Mat::uniform(&mut rng, d, 1, 1.0);
        let alpha = Mat::from_fn(1, 1, |_, _| 1.0);
        let o = bilinear_pool(&x, &y, &alpha, &u2, &z2).unwrap();
        for r in 0..g {
            let want = dot(&x.col(0), &u2.col(r)) * dot(&z2.col(r), &y.col(0));
            assert!((o[r] - want).abs() < 1e-12);
        }

        // random case vs the double-sum oracle
        let (kx, ky) = (3, 2);
        let xt = Mat::uniform(&mut rng, d, kx, 1.0);
        let yt = Mat::uniform(&mut rng, d, ky, 1.0);
        let mut alpha = Mat::uniform(&mut rng, kx, ky, 1.0).map(|v| v.abs());
        let s = alpha.sum();
        alpha.scale(1.0 / s);
        let o = bilinear_pool(&xt, &yt, &alpha, &u2, &z2).unwrap();
        for r in 0..g {
            let mut want = 0.0;
            for i in 0..kx {
                for j in 0..ky {
                    want += alpha.at(i, j)
                        * dot(&xt.col(i), &u2.col(r))
                        * dot(&z2.col(r), &yt.col(j));
                }
            }
            assert!((o[r] - want).abs() < 1e-12);
        }
    }
}
