//! Instance-mask decoding.
//!
//! The image is divided into an `S x S` grid of cells; each cell owns one
//! dynamic 1x1 convolution kernel and one vector of category scores. The mask
//! logit of cell `(i,j)` at pixel `(y,x)` is the dot product of that cell's
//! kernel with the feature vector at the pixel; the soft mask is the sigmoid
//! of the logit. Candidates are the cells whose best category score clears a
//! confidence threshold.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::mask::{BinMask, MaskSet, ScoredMask};
use crate::mat::{dot, Mat};
use crate::math::sigmoid;

/// Grid geometry: `s` cells per side, `c` semantic categories.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridSpec {
    pub s: usize,
    pub c: usize,
}

impl GridSpec {
    pub fn new(s: usize, c: usize) -> Result<Self> {
        if s == 0 || c == 0 {
            return Err(Error::Domain {
                context: "GridSpec::new",
                detail: format!("s and c must be positive, got s={s}, c={c}"),
            });
        }
        Ok(GridSpec { s, c })
    }

    /// Number of mask channels the grid produces.
    pub fn channels(&self) -> usize {
        self.s * self.s
    }
}

/// Flat channel index of grid cell `(i, j)`: `k = i*s + j`.
pub fn grid_index(i: usize, j: usize, s: usize) -> Result<usize> {
    if i >= s || j >= s {
        return Err(Error::Domain {
            context: "grid_index",
            detail: format!("cell ({i},{j}) outside {s}x{s} grid"),
        });
    }
    Ok(i * s + j)
}

/// Inverse of [`grid_index`]: recovers `(i, j)` from the channel index.
pub fn grid_coords(k: usize, s: usize) -> Result<(usize, usize)> {
    if k >= s * s {
        return Err(Error::Domain {
            context: "grid_coords",
            detail: format!("channel {k} outside {} channels", s * s),
        });
    }
    Ok((k / s, k % s))
}

/// Dense H x W x E feature map, row-major with the channel dim innermost.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    h: usize,
    w: usize,
    e: usize,
    data: Vec<f64>,
}

impl FeatureMap {
    pub fn new(h: usize, w: usize, e: usize, data: Vec<f64>) -> Result<Self> {
        if h == 0 || w == 0 || e == 0 {
            return Err(Error::Domain {
                context: "FeatureMap::new",
                detail: format!("dims must be positive, got {h}x{w}x{e}"),
            });
        }
        if data.len() != h * w * e {
            return Err(Error::Shape {
                context: "FeatureMap::new",
                expected: format!("{} values for {h}x{w}x{e}", h * w * e),
                actual: format!("{}", data.len()),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: "FeatureMap::new",
            });
        }
        Ok(FeatureMap { h, w, e, data })
    }

    pub fn h(&self) -> usize {
        self.h
    }

    pub fn w(&self) -> usize {
        self.w
    }

    pub fn e(&self) -> usize {
        self.e
    }

    /// Feature vector at pixel `(y, x)`.
    #[inline]
    pub fn pixel(&self, y: usize, x: usize) -> &[f64] {
        debug_assert!(y < self.h && x < self.w);
        let base = (y * self.w + x) * self.e;
        &self.data[base..base + self.e]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }
}

/// One 1x1 dynamic kernel (length `e`) per grid cell.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelBank {
    s: usize,
    e: usize,
    data: Vec<f64>,
}

impl KernelBank {
    pub fn new(s: usize, e: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != s * s * e {
            return Err(Error::Shape {
                context: "KernelBank::new",
                expected: format!("{} values for {s}x{s}x{e}", s * s * e),
                actual: format!("{}", data.len()),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: "KernelBank::new",
            });
        }
        Ok(KernelBank { s, e, data })
    }

    pub fn s(&self) -> usize {
        self.s
    }

    pub fn e(&self) -> usize {
        self.e
    }

    /// Kernel for cell `(i, j)`.
    pub fn kernel(&self, i: usize, j: usize) -> &[f64] {
        debug_assert!(i < self.s && j < self.s);
        let base = (i * self.s + j) * self.e;
        &self.data[base..base + self.e]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }
}

/// Per-cell category confidences, each in [0,1].
#[derive(Debug, Clone, PartialEq)]
pub struct CategoryMap {
    s: usize,
    c: usize,
    data: Vec<f64>,
}

impl CategoryMap {
    pub fn new(s: usize, c: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != s * s * c {
            return Err(Error::Shape {
                context: "CategoryMap::new",
                expected: format!("{} values for {s}x{s}x{c}", s * s * c),
                actual: format!("{}", data.len()),
            });
        }
        if data.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::Domain {
                context: "CategoryMap::new",
                detail: alloc::string::String::from("category scores must lie in [0,1]"),
            });
        }
        Ok(CategoryMap { s, c, data })
    }

    pub fn s(&self) -> usize {
        self.s
    }

    pub fn c(&self) -> usize {
        self.c
    }

    /// Scores of cell `(i, j)` over all categories.
    pub fn scores(&self, i: usize, j: usize) -> &[f64] {
        debug_assert!(i < self.s && j < self.s);
        let base = (i * self.s + j) * self.c;
        &self.data[base..base + self.c]
    }

    /// Best category of cell `(i, j)` and its score; ties pick the lowest
    /// category index.
    pub fn best(&self, i: usize, j: usize) -> (usize, f64) {
        let s = self.scores(i, j);
        let cat = crate::mat::argmax(s);
        (cat, s[cat])
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }
}

/// Mask logits for every grid cell: channel `k = i*s + j` holds the H x W
/// per-pixel dot products of kernel `(i,j)` with the feature map.
pub fn decode_logits(f: &FeatureMap, g: &KernelBank) -> Result<Vec<Mat>> {
    if f.e() != g.e() {
        return Err(Error::Shape {
            context: "decode_logits",
            expected: format!("kernel dim {}", f.e()),
            actual: format!("{}", g.e()),
        });
    }
    let mut stack = Vec::with_capacity(g.s() * g.s());
    for i in 0..g.s() {
        for j in 0..g.s() {
            let kern = g.kernel(i, j);
            let m = Mat::from_fn(f.h(), f.w(), |y, x| dot(kern, f.pixel(y, x)));
            stack.push(m);
        }
    }
    Ok(stack)
}

/// Soft masks: sigmoid of [`decode_logits`], channel order following
/// [`grid_index`].
pub fn decode_masks(f: &FeatureMap, g: &KernelBank) -> Result<Vec<Mat>> {
    Ok(decode_logits(f, g)?
        .into_iter()
        .map(|m| m.map(sigmoid))
        .collect())
}

/// Keeps the cells whose best category score clears `score_threshold` (ties
/// retained) and binarizes their soft masks at `mask_threshold` (strictly
/// greater). Cells are visited in channel order, so the result is
/// deterministic.
pub fn select_candidates(
    stack: &[Mat],
    cat: &CategoryMap,
    score_threshold: f64,
    mask_threshold: f64,
) -> Result<MaskSet> {
    if stack.len() != cat.s() * cat.s() {
        return Err(Error::Shape {
            context: "select_candidates",
            expected: format!("{} mask channels", cat.s() * cat.s()),
            actual: format!("{}", stack.len()),
        });
    }
    for t in [score_threshold, mask_threshold] {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::Domain {
                context: "select_candidates",
                detail: format!("threshold {t} outside [0,1]"),
            });
        }
    }
    let (h, w) = if stack.is_empty() {
        (0, 0)
    } else {
        (stack[0].rows(), stack[0].cols())
    };
    let mut members = Vec::new();
    for (k, soft) in stack.iter().enumerate() {
        let (i, j) = grid_coords(k, cat.s())?;
        let (category, score) = cat.best(i, j);
        if score < score_threshold {
            continue;
        }
        let binary = BinMask::from_vec(
            soft.rows(),
            soft.cols(),
            soft.data().iter().map(|&v| v > mask_threshold).collect(),
        )?;
        members.push(ScoredMask::new(soft.clone(), binary, score, category)?);
    }
    MaskSet::new(h, w, members)
}
