//! Instance/background view separation.
//!
//! After suppression, the surviving masks are fused into one binary instance
//! map. Pixels under that map form the instance view; everything else is the
//! background view. The views are pooled into two descriptor matrices:
//!
//! * `D` (`L x rho`) — one column per instance, the masked average of the
//!   feature map over that instance's pixels;
//! * `B` (`L x phi`) — one column per cell of a uniform `G x G` grid, the
//!   average over the cell's *background* pixels.
//!
//! The original pipeline used a generative inpainting network to paint out
//! instances before pooling the background; here that is replaced by a
//! deterministic fill ([`background_image`]) which exists mainly for the
//! image-level demo — descriptor pooling reads the feature map directly.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::mask::{BinMask, MaskSet};
use crate::mask_decoder::FeatureMap;
use crate::mat::Mat;

/// Pixelwise OR of every mask in the set; all-false for an empty set.
pub fn fuse_instances(set: &MaskSet) -> BinMask {
    let mut fused = BinMask::new(set.h(), set.w());
    for m in set.iter() {
        fused.or_assign(&m.binary);
    }
    fused
}

/// Complement of the fused instance mask: the background region.
pub fn background_mask(fused: &BinMask) -> BinMask {
    let data = fused.data().iter().map(|&v| !v).collect();
    BinMask::from_vec(fused.h(), fused.w(), data).unwrap()
}

/// How instance pixels are painted out in [`background_image`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FillMode {
    /// Replace instance pixels with the per-channel mean of the background
    /// pixels; falls back to 0.5 everywhere when no background pixel exists.
    MeanBackground,
    /// Replace instance pixels with a constant.
    Constant(f64),
}

/// Copies background pixels through and paints instance pixels with the fill
/// value. Works on any channel count (3 for the image demo).
pub fn background_image(fused: &BinMask, img: &FeatureMap, fill: FillMode) -> Result<FeatureMap> {
    if fused.h() != img.h() || fused.w() != img.w() {
        return Err(Error::Shape {
            context: "background_image",
            expected: format!("mask {}x{}", img.h(), img.w()),
            actual: format!("{}x{}", fused.h(), fused.w()),
        });
    }
    let e = img.e();
    let fill_vec: Vec<f64> = match fill {
        FillMode::Constant(c) => vec![c; e],
        FillMode::MeanBackground => {
            let mut sums = vec![0.0; e];
            let mut count = 0usize;
            for y in 0..img.h() {
                for x in 0..img.w() {
                    if !fused.get(y, x) {
                        count += 1;
                        for (s, &v) in sums.iter_mut().zip(img.pixel(y, x)) {
                            *s += v;
                        }
                    }
                }
            }
            if count == 0 {
                vec![0.5; e]
            } else {
                sums.iter().map(|s| s / count as f64).collect()
            }
        }
    };
    let mut data = Vec::with_capacity(img.h() * img.w() * e);
    for y in 0..img.h() {
        for x in 0..img.w() {
            if fused.get(y, x) {
                data.extend_from_slice(&fill_vec);
            } else {
                data.extend_from_slice(img.pixel(y, x));
            }
        }
    }
    FeatureMap::new(img.h(), img.w(), e, data)
}

/// Per-instance descriptors: column `i` is the mean feature vector over mask
/// `i`'s pixels (resampled to the feature grid); an empty mask gives a zero
/// column. Output is `E x len(set)`.
pub fn instance_features(f: &FeatureMap, set: &MaskSet) -> Mat {
    let mut out = Mat::zeros(f.e(), set.len());
    for (i, m) in set.iter().enumerate() {
        let mask = m.binary.resample(f.h(), f.w());
        let mut count = 0usize;
        let mut sums = vec![0.0; f.e()];
        for y in 0..f.h() {
            for x in 0..f.w() {
                if mask.get(y, x) {
                    count += 1;
                    for (s, &v) in sums.iter_mut().zip(f.pixel(y, x)) {
                        *s += v;
                    }
                }
            }
        }
        if count > 0 {
            for (r, s) in sums.iter().enumerate() {
                *out.at_mut(r, i) = s / count as f64;
            }
        }
    }
    out
}

/// Uniform-grid background descriptors: the spatial extent is split into a
/// `g x g` grid (integer cell boundaries `cy*h/g`); column `cy*g + cx` is the
/// mean feature vector over the cell's pixels *not* covered by the fused
/// instance mask. A fully covered (or degenerate) cell gives a zero column.
/// Output is `E x g^2`.
pub fn grid_pool(f: &FeatureMap, fused: &BinMask, g: usize) -> Result<Mat> {
    if g == 0 {
        return Err(Error::Domain {
            context: "grid_pool",
            detail: alloc::string::String::from("grid side must be positive"),
        });
    }
    let mask = fused.resample(f.h(), f.w());
    let mut out = Mat::zeros(f.e(), g * g);
    for cy in 0..g {
        let y0 = cy * f.h() / g;
        let y1 = (cy + 1) * f.h() / g;
        for cx in 0..g {
            let x0 = cx * f.w() / g;
            let x1 = (cx + 1) * f.w() / g;
            let mut count = 0usize;
            let mut sums = vec![0.0; f.e()];
            for y in y0..y1 {
                for x in x0..x1 {
                    if !mask.get(y, x) {
                        count += 1;
                        for (s, &v) in sums.iter_mut().zip(f.pixel(y, x)) {
                            *s += v;
                        }
                    }
                }
            }
            if count > 0 {
                let col = cy * g + cx;
                for (r, s) in sums.iter().enumerate() {
                    *out.at_mut(r, col) = s / count as f64;
                }
            }
        }
    }
    Ok(out)
}

/// The paired view descriptors consumed by relation attention.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewFeatures {
    /// Instance view `D`, `L x rho`.
    pub instance: Mat,
    /// Background view `B`, `L x phi`.
    pub background: Mat,
}

impl ViewFeatures {
    /// Validates that the two views share a feature dimension and are finite.
    pub fn new(instance: Mat, background: Mat) -> Result<Self> {
        if instance.rows() != background.rows() {
            return Err(Error::Shape {
                context: "ViewFeatures::new",
                expected: format!("shared feature dim {}", instance.rows()),
                actual: format!("{}", background.rows()),
            });
        }
        if background.cols() == 0 {
            return Err(Error::Domain {
                context: "ViewFeatures::new",
                detail: alloc::string::String::from("background view must have at least one column"),
            });
        }
        if !instance.is_finite() || !background.is_finite() {
            return Err(Error::NonFinite {
                context: "ViewFeatures::new",
            });
        }
        Ok(ViewFeatures {
            instance,
            background,
        })
    }

    /// Total region count `rho + phi`.
    pub fn region_count(&self) -> usize {
        self.instance.cols() + self.background.cols()
    }

    /// Checks the configured region budget.
    pub fn ensure_budget(&self, max_regions: usize) -> Result<()> {
        if self.region_count() > max_regions {
            return Err(Error::Domain {
                context: "ViewFeatures::ensure_budget",
                detail: format!(
                    "rho + phi = {} exceeds budget {max_regions}",
                    self.region_count()
                ),
            });
        }
        Ok(())
    }
}
