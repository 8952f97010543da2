//! Binary masks, scored candidate masks, and sets of them.
//!
//! A [`MaskSet`] is the unit that flows from decoding through suppression into
//! view separation: every member carries its soft mask, its binarization, a
//! confidence score and a category index, and all members share one pixel
//! grid.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::mat::Mat;

/// Binary H x W mask, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinMask {
    h: usize,
    w: usize,
    data: Vec<bool>,
}

impl BinMask {
    /// All-false mask.
    pub fn new(h: usize, w: usize) -> Self {
        BinMask {
            h,
            w,
            data: vec![false; h * w],
        }
    }

    pub fn from_vec(h: usize, w: usize, data: Vec<bool>) -> Result<Self> {
        if data.len() != h * w {
            return Err(Error::Shape {
                context: "BinMask::from_vec",
                expected: format!("{} pixels for {h}x{w}", h * w),
                actual: format!("{}", data.len()),
            });
        }
        Ok(BinMask { h, w, data })
    }

    pub fn h(&self) -> usize {
        self.h
    }

    pub fn w(&self) -> usize {
        self.w
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize) -> bool {
        debug_assert!(y < self.h && x < self.w);
        self.data[y * self.w + x]
    }

    #[inline]
    pub fn set(&mut self, y: usize, x: usize, v: bool) {
        debug_assert!(y < self.h && x < self.w);
        self.data[y * self.w + x] = v;
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    /// Number of true pixels.
    pub fn area(&self) -> usize {
        self.data.iter().filter(|&&v| v).count()
    }

    /// Pixelwise OR with another mask of the same shape.
    pub fn or_assign(&mut self, other: &BinMask) {
        debug_assert_eq!((self.h, self.w), (other.h, other.w));
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a |= b;
        }
    }

    /// Nearest-neighbor resampling onto an `h2 x w2` grid.
    ///
    /// Target pixel (y, x) reads source pixel (y*h/h2, x*w/w2) — the floor of
    /// the scaled index, computed in integer arithmetic so the mapping is
    /// exact.
    pub fn resample(&self, h2: usize, w2: usize) -> BinMask {
        if h2 == self.h && w2 == self.w {
            return self.clone();
        }
        let mut out = BinMask::new(h2, w2);
        for y in 0..h2 {
            let sy = y * self.h / h2;
            for x in 0..w2 {
                let sx = x * self.w / w2;
                out.set(y, x, self.get(sy, sx));
            }
        }
        out
    }
}

/// One decoded candidate: soft mask, binarization, confidence, category.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredMask {
    pub soft: Mat,
    pub binary: BinMask,
    pub score: f64,
    pub category: usize,
}

impl ScoredMask {
    /// Validates ranges and shape agreement between the soft and binary masks.
    pub fn new(soft: Mat, binary: BinMask, score: f64, category: usize) -> Result<Self> {
        if soft.rows() != binary.h() || soft.cols() != binary.w() {
            return Err(Error::Shape {
                context: "ScoredMask::new",
                expected: format!("soft mask {}x{}", binary.h(), binary.w()),
                actual: format!("{}x{}", soft.rows(), soft.cols()),
            });
        }
        if !score.is_finite() || !(0.0..=1.0).contains(&score) {
            return Err(Error::Domain {
                context: "ScoredMask::new",
                detail: format!("score {score} outside [0,1]"),
            });
        }
        if soft.data().iter().any(|&v| !(0.0..=1.0).contains(&v)) {
            return Err(Error::Domain {
                context: "ScoredMask::new",
                detail: alloc::string::String::from("soft mask values outside [0,1]"),
            });
        }
        Ok(ScoredMask {
            soft,
            binary,
            score,
            category,
        })
    }
}

/// A collection of scored masks over one shared pixel grid.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskSet {
    h: usize,
    w: usize,
    masks: Vec<ScoredMask>,
}

impl MaskSet {
    /// Builds a set, checking every member against the shared grid.
    pub fn new(h: usize, w: usize, masks: Vec<ScoredMask>) -> Result<Self> {
        for (i, m) in masks.iter().enumerate() {
            if m.binary.h() != h || m.binary.w() != w {
                return Err(Error::Shape {
                    context: "MaskSet::new",
                    expected: format!("{h}x{w}"),
                    actual: format!("mask {i} is {}x{}", m.binary.h(), m.binary.w()),
                });
            }
        }
        Ok(MaskSet { h, w, masks })
    }

    pub fn empty(h: usize, w: usize) -> Self {
        MaskSet {
            h,
            w,
            masks: Vec::new(),
        }
    }

    pub fn h(&self) -> usize {
        self.h
    }

    pub fn w(&self) -> usize {
        self.w
    }

    pub fn len(&self) -> usize {
        self.masks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masks.is_empty()
    }

    pub fn get(&self, i: usize) -> &ScoredMask {
        &self.masks[i]
    }

    pub fn iter(&self) -> core::slice::Iter<'_, ScoredMask> {
        self.masks.iter()
    }

    /// New set containing clones of the chosen members, in the given order.
    pub fn select(&self, indices: &[usize]) -> MaskSet {
        MaskSet {
            h: self.h,
            w: self.w,
            masks: indices.iter().map(|&i| self.masks[i].clone()).collect(),
        }
    }
}
