//! Trainable tensors of the two attention stages, the fusion projection, and
//! the answer classifier, plus the shape bookkeeping that wires the stages
//! for each composition order.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::mat::Mat;
use crate::math::sqrt;
use crate::rng::{self, ChaCha8Rng};

/// How the two attention stages are wired.
///
/// The first letter(s) name stage one's input pair, the last names what joins
/// at stage two. Two-letter orders attend only at stage one (stage two
/// degrades to a uniform-weight bilinear product), and `NoAttention` uses
/// uniform weights at both stages — projections, mean pooling and the
/// classifier only.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ComposeOrder {
    /// instance x background, then question (the full model).
    IBQ,
    /// instance x question, then background.
    IQB,
    /// background x question, then instance.
    BQI,
    /// instance x background only.
    IB,
    /// instance x question only.
    IQ,
    /// background x question only.
    BQ,
    /// no attention anywhere.
    NoAttention,
}

impl ComposeOrder {
    pub const ALL: [ComposeOrder; 7] = [
        ComposeOrder::IBQ,
        ComposeOrder::IQB,
        ComposeOrder::BQI,
        ComposeOrder::IB,
        ComposeOrder::IQ,
        ComposeOrder::BQ,
        ComposeOrder::NoAttention,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ComposeOrder::IBQ => "i-b-q",
            ComposeOrder::IQB => "i-q-b",
            ComposeOrder::BQI => "b-q-i",
            ComposeOrder::IB => "i-b",
            ComposeOrder::IQ => "i-q",
            ComposeOrder::BQ => "b-q",
            ComposeOrder::NoAttention => "none",
        }
    }

    pub fn stage1_attends(&self) -> bool {
        !matches!(self, ComposeOrder::NoAttention)
    }

    pub fn stage2_attends(&self) -> bool {
        matches!(
            self,
            ComposeOrder::IBQ | ComposeOrder::IQB | ComposeOrder::BQI
        )
    }
}

impl core::str::FromStr for ComposeOrder {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "i-b-q" => Ok(ComposeOrder::IBQ),
            "i-q-b" => Ok(ComposeOrder::IQB),
            "b-q-i" => Ok(ComposeOrder::BQI),
            "i-b" => Ok(ComposeOrder::IB),
            "i-q" => Ok(ComposeOrder::IQ),
            "b-q" => Ok(ComposeOrder::BQ),
            "none" => Ok(ComposeOrder::NoAttention),
            _ => Err(Error::Domain {
                context: "ComposeOrder::from_str",
                detail: format!(
                    "unknown order {s:?} (expected i-b-q, i-q-b, b-q-i, i-b, i-q, b-q or none)"
                ),
            }),
        }
    }
}

/// Every size the model depends on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelDims {
    /// Feature dimension L shared by the instance and background views.
    pub region_dim: usize,
    /// Instance columns rho.
    pub instance_cols: usize,
    /// Background columns phi.
    pub background_cols: usize,
    /// Question embedding dimension n.
    pub question_dim: usize,
    /// Question token slots h.
    pub question_slots: usize,
    /// Pooled glimpse dimension gamma.
    pub glimpse_dim: usize,
    /// Rank gamma' of the attention-logit factorization.
    pub logit_rank: usize,
    /// Glimpse (head) count.
    pub heads: usize,
    /// Fused vector dimension m produced by stage one.
    pub fused_dim: usize,
    /// Answer vocabulary size T.
    pub answer_count: usize,
    /// Stage wiring.
    pub order: ComposeOrder,
    /// When true, all-zero question columns (padding) are excluded from
    /// attention by forcing their logits to negative infinity.
    pub mask_padding: bool,
}

/// Shapes of one attention stage: inputs are truncated to `d` rows, the left
/// operand has `kx` columns and the right `ky`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StageShape {
    pub d: usize,
    pub kx: usize,
    pub ky: usize,
    /// Untruncated row counts of the two operands, needed to route input
    /// gradients back out.
    pub x_rows: usize,
    pub y_rows: usize,
    /// Whether the right operand is the question matrix (padding masks only
    /// apply there).
    pub y_is_question: bool,
}

impl ModelDims {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("region_dim", self.region_dim),
            ("instance_cols", self.instance_cols),
            ("background_cols", self.background_cols),
            ("question_dim", self.question_dim),
            ("question_slots", self.question_slots),
            ("glimpse_dim", self.glimpse_dim),
            ("logit_rank", self.logit_rank),
            ("heads", self.heads),
            ("fused_dim", self.fused_dim),
            ("answer_count", self.answer_count),
        ];
        for (name, v) in fields {
            if v == 0 {
                return Err(Error::Domain {
                    context: "ModelDims::validate",
                    detail: format!("{name} must be positive"),
                });
            }
        }
        Ok(())
    }

    /// Shape of stage one under the configured order.
    pub fn stage1_shape(&self) -> StageShape {
        let l = self.region_dim;
        let (n, h) = (self.question_dim, self.question_slots);
        match self.order {
            ComposeOrder::IBQ | ComposeOrder::IB | ComposeOrder::NoAttention => StageShape {
                d: l,
                kx: self.instance_cols,
                ky: self.background_cols,
                x_rows: l,
                y_rows: l,
                y_is_question: false,
            },
            ComposeOrder::IQB | ComposeOrder::IQ => StageShape {
                d: l.min(n),
                kx: self.instance_cols,
                ky: h,
                x_rows: l,
                y_rows: n,
                y_is_question: true,
            },
            ComposeOrder::BQI | ComposeOrder::BQ => StageShape {
                d: l.min(n),
                kx: self.background_cols,
                ky: h,
                x_rows: l,
                y_rows: n,
                y_is_question: true,
            },
        }
    }

    /// Shape of stage two: its left operand is always the fused m-vector.
    pub fn stage2_shape(&self) -> StageShape {
        let m = self.fused_dim;
        let (y_rows, ky, y_is_question) = match self.order {
            ComposeOrder::IBQ | ComposeOrder::IB | ComposeOrder::NoAttention => {
                (self.question_dim, self.question_slots, true)
            }
            ComposeOrder::IQB | ComposeOrder::IQ => {
                (self.region_dim, self.background_cols, false)
            }
            ComposeOrder::BQI | ComposeOrder::BQ => (self.region_dim, self.instance_cols, false),
        };
        StageShape {
            d: m.min(y_rows),
            kx: 1,
            ky,
            x_rows: m,
            y_rows,
            y_is_question,
        }
    }
}

/// One tanh gate: `w` is `d x k`, `b` is `1 x k`.
#[derive(Debug, Clone, PartialEq)]
pub struct GateParams {
    pub w: Mat,
    pub b: Mat,
}

/// All tensors of one bilinear attention stage.
///
/// The logit factors (`logit_x`, `logit_y`) and the per-glimpse mixing
/// vectors (columns of `glimpse_mix`) produce the attention logits; the
/// pooling factors (`pool_x`, `pool_y`) produce the rank-gamma pooled output.
/// The two factor pairs are independent parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct StageParams {
    pub gate_x: GateParams,
    pub gate_y: GateParams,
    /// `d x gamma'` logit factor for the left operand.
    pub logit_x: Mat,
    /// `d x gamma'` logit factor for the right operand.
    pub logit_y: Mat,
    /// `gamma' x heads`; column `g` is glimpse `g`'s mixing vector.
    pub glimpse_mix: Mat,
    /// `d x gamma` pooling factor for the left operand.
    pub pool_x: Mat,
    /// `d x gamma` pooling factor for the right operand.
    pub pool_y: Mat,
}

/// Affine map `y = w x + b`; `w` is `out x in`, `b` is `1 x out`.
#[derive(Debug, Clone, PartialEq)]
pub struct Affine {
    pub w: Mat,
    pub b: Mat,
}

impl Affine {
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.w.cols(), "Affine::apply: wrong input length");
        (0..self.w.rows())
            .map(|r| crate::mat::dot(self.w.row(r), x) + self.b.at(0, r))
            .collect()
    }
}

/// The full parameter set: two stages, the fusion projection between them,
/// and the classifier head.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub dims: ModelDims,
    pub stage1: StageParams,
    /// `(gamma * heads) -> m` projection applied to the concatenated stage-one
    /// glimpses.
    pub fuse: Affine,
    pub stage2: StageParams,
    /// `gamma -> T` answer head.
    pub classifier: Affine,
}

fn uniform_fan_in(rng: &mut ChaCha8Rng, rows: usize, cols: usize, fan_in: usize) -> Mat {
    let scale = 1.0 / sqrt(fan_in as f64);
    Mat::uniform(rng, rows, cols, scale)
}

fn init_stage(rng: &mut ChaCha8Rng, shape: StageShape, dims: &ModelDims) -> StageParams {
    let d = shape.d;
    StageParams {
        gate_x: GateParams {
            w: uniform_fan_in(rng, d, shape.kx, d),
            b: uniform_fan_in(rng, 1, shape.kx, d),
        },
        gate_y: GateParams {
            w: uniform_fan_in(rng, d, shape.ky, d),
            b: uniform_fan_in(rng, 1, shape.ky, d),
        },
        logit_x: uniform_fan_in(rng, d, dims.logit_rank, d),
        logit_y: uniform_fan_in(rng, d, dims.logit_rank, d),
        glimpse_mix: uniform_fan_in(rng, dims.logit_rank, dims.heads, dims.logit_rank),
        pool_x: uniform_fan_in(rng, d, dims.glimpse_dim, d),
        pool_y: uniform_fan_in(rng, d, dims.glimpse_dim, d),
    }
}

fn zero_stage(shape: StageShape, dims: &ModelDims) -> StageParams {
    let d = shape.d;
    StageParams {
        gate_x: GateParams {
            w: Mat::zeros(d, shape.kx),
            b: Mat::zeros(1, shape.kx),
        },
        gate_y: GateParams {
            w: Mat::zeros(d, shape.ky),
            b: Mat::zeros(1, shape.ky),
        },
        logit_x: Mat::zeros(d, dims.logit_rank),
        logit_y: Mat::zeros(d, dims.logit_rank),
        glimpse_mix: Mat::zeros(dims.logit_rank, dims.heads),
        pool_x: Mat::zeros(d, dims.glimpse_dim),
        pool_y: Mat::zeros(d, dims.glimpse_dim),
    }
}

impl ModelParams {
    /// Seeded init: every tensor is uniform in `[-1/sqrt(fan_in),
    /// +1/sqrt(fan_in)]` where `fan_in` is the dimension contracted by the
    /// tensor's consumer. Tensors are drawn in canonical order (see
    /// [`ModelParams::tensors`]), so a seed pins every value.
    pub fn init(dims: ModelDims, seed: u64) -> Result<Self> {
        dims.validate()?;
        let mut rng = rng::seeded(seed);
        let s1 = dims.stage1_shape();
        let s2 = dims.stage2_shape();
        let concat = dims.glimpse_dim * dims.heads;
        let stage1 = init_stage(&mut rng, s1, &dims);
        let fuse = Affine {
            w: uniform_fan_in(&mut rng, dims.fused_dim, concat, concat),
            b: uniform_fan_in(&mut rng, 1, dims.fused_dim, concat),
        };
        let stage2 = init_stage(&mut rng, s2, &dims);
        let classifier = Affine {
            w: uniform_fan_in(&mut rng, dims.answer_count, dims.glimpse_dim, dims.glimpse_dim),
            b: uniform_fan_in(&mut rng, 1, dims.answer_count, dims.glimpse_dim),
        };
        Ok(ModelParams {
            dims,
            stage1,
            fuse,
            stage2,
            classifier,
        })
    }

    /// All-zero parameter set with the same shapes; the gradient container.
    pub fn zeros(dims: ModelDims) -> Result<Self> {
        dims.validate()?;
        let concat = dims.glimpse_dim * dims.heads;
        Ok(ModelParams {
            dims,
            stage1: zero_stage(dims.stage1_shape(), &dims),
            fuse: Affine {
                w: Mat::zeros(dims.fused_dim, concat),
                b: Mat::zeros(1, dims.fused_dim),
            },
            stage2: zero_stage(dims.stage2_shape(), &dims),
            classifier: Affine {
                w: Mat::zeros(dims.answer_count, dims.glimpse_dim),
                b: Mat::zeros(1, dims.answer_count),
            },
        })
    }

    /// Named tensors in canonical order. This order defines parameter
    /// flattening everywhere: optimizer state, checkpoints, gradient reports.
    pub fn tensors(&self) -> Vec<(&'static str, &Mat)> {
        alloc::vec![
            ("stage1.gate_x.w", &self.stage1.gate_x.w),
            ("stage1.gate_x.b", &self.stage1.gate_x.b),
            ("stage1.gate_y.w", &self.stage1.gate_y.w),
            ("stage1.gate_y.b", &self.stage1.gate_y.b),
            ("stage1.logit_x", &self.stage1.logit_x),
            ("stage1.logit_y", &self.stage1.logit_y),
            ("stage1.glimpse_mix", &self.stage1.glimpse_mix),
            ("stage1.pool_x", &self.stage1.pool_x),
            ("stage1.pool_y", &self.stage1.pool_y),
            ("fuse.w", &self.fuse.w),
            ("fuse.b", &self.fuse.b),
            ("stage2.gate_x.w", &self.stage2.gate_x.w),
            ("stage2.gate_x.b", &self.stage2.gate_x.b),
            ("stage2.gate_y.w", &self.stage2.gate_y.w),
            ("stage2.gate_y.b", &self.stage2.gate_y.b),
            ("stage2.logit_x", &self.stage2.logit_x),
            ("stage2.logit_y", &self.stage2.logit_y),
            ("stage2.glimpse_mix", &self.stage2.glimpse_mix),
            ("stage2.pool_x", &self.stage2.pool_x),
            ("stage2.pool_y", &self.stage2.pool_y),
            ("classifier.w", &self.classifier.w),
            ("classifier.b", &self.classifier.b),
        ]
    }

    /// Mutable variant of [`ModelParams::tensors`], same order.
    pub fn tensors_mut(&mut self) -> Vec<(&'static str, &mut Mat)> {
        alloc::vec![
            ("stage1.gate_x.w", &mut self.stage1.gate_x.w),
            ("stage1.gate_x.b", &mut self.stage1.gate_x.b),
            ("stage1.gate_y.w", &mut self.stage1.gate_y.w),
            ("stage1.gate_y.b", &mut self.stage1.gate_y.b),
            ("stage1.logit_x", &mut self.stage1.logit_x),
            ("stage1.logit_y", &mut self.stage1.logit_y),
            ("stage1.glimpse_mix", &mut self.stage1.glimpse_mix),
            ("stage1.pool_x", &mut self.stage1.pool_x),
            ("stage1.pool_y", &mut self.stage1.pool_y),
            ("fuse.w", &mut self.fuse.w),
            ("fuse.b", &mut self.fuse.b),
            ("stage2.gate_x.w", &mut self.stage2.gate_x.w),
            ("stage2.gate_x.b", &mut self.stage2.gate_x.b),
            ("stage2.gate_y.w", &mut self.stage2.gate_y.w),
            ("stage2.gate_y.b", &mut self.stage2.gate_y.b),
            ("stage2.logit_x", &mut self.stage2.logit_x),
            ("stage2.logit_y", &mut self.stage2.logit_y),
            ("stage2.glimpse_mix", &mut self.stage2.glimpse_mix),
            ("stage2.pool_x", &mut self.stage2.pool_x),
            ("stage2.pool_y", &mut self.stage2.pool_y),
            ("classifier.w", &mut self.classifier.w),
            ("classifier.b", &mut self.classifier.b),
        ]
    }

    /// Total scalar parameter count.
    pub fn param_count(&self) -> usize {
        self.tensors()
            .iter()
            .map(|(_, t)| t.rows() * t.cols())
            .sum()
    }

    /// `self += s * other`, tensor by tensor. Panics on shape mismatch (the
    /// two sets must come from the same [`ModelDims`]).
    pub fn add_scaled_params(&mut self, other: &Self, s: f64) {
        for ((_, dst), (_, src)) in self.tensors_mut().into_iter().zip(other.tensors()) {
            dst.add_scaled(src, s);
        }
    }

    /// Multiplies every tensor entry by `s`.
    pub fn scale_params(&mut self, s: f64) {
        for (_, t) in self.tensors_mut() {
            t.scale(s);
        }
    }

    /// Global L2 norm over all tensors, in canonical order.
    pub fn global_norm(&self) -> f64 {
        let ss: f64 = self.tensors().iter().map(|(_, t)| t.sum_sq()).sum();
        sqrt(ss)
    }
}
