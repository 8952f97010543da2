//! Parallel score suppression across overlapping masks.
//!
//! Instead of iteratively deleting overlaps, every mask's score is decayed in
//! one simultaneous pass: mask `b` is penalised by the most suppressive
//! higher-scored mask `a`, and each suppressor's influence is normalised by
//! its own decay floor `phi_a` (how much *it* is suppressed from above).
//!
//! Conventions (all shared by [`suppress`] and [`oracle_suppress`]):
//! * minima over "all higher-scored masks" are 1 when that set is empty, so
//!   the top mask is never touched;
//! * `s_a > s_b` is strict — equal scores never suppress each other;
//! * penalties are clamped to at most 1 so scores never increase;
//! * a suppressor whose own floor is exactly 0 (it is a duplicate of a still
//!   higher mask) is skipped — its suppression duty already belongs to that
//!   higher mask, and skipping avoids a 0/0;
//! * the IoU of two empty masks is 0.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::mask::{BinMask, MaskSet};
use crate::mat::Mat;

/// Intersection-over-union of two binary masks; 0 when both are empty.
pub fn mask_iou(a: &BinMask, b: &BinMask) -> Result<f64> {
    if a.h() != b.h() || a.w() != b.w() {
        return Err(Error::Shape {
            context: "mask_iou",
            expected: format!("{}x{}", a.h(), a.w()),
            actual: format!("{}x{}", b.h(), b.w()),
        });
    }
    let mut inter = 0usize;
    let mut union = 0usize;
    for (&x, &y) in a.data().iter().zip(b.data()) {
        inter += (x && y) as usize;
        union += (x || y) as usize;
    }
    if union == 0 {
        Ok(0.0)
    } else {
        Ok(inter as f64 / union as f64)
    }
}

/// Full pairwise IoU matrix of a set (symmetric; diagonal is the self-IoU).
pub fn iou_matrix(set: &MaskSet) -> Mat {
    let n = set.len();
    let mut m = Mat::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            // members of one MaskSet share a grid, so this cannot fail
            let v = mask_iou(&set.get(i).binary, &set.get(j).binary).unwrap();
            *m.at_mut(i, j) = v;
            *m.at_mut(j, i) = v;
        }
    }
    m
}

/// Decay floor `phi_a`: the minimum of `1 - IoU(k, a)` over all masks `k`
/// scored strictly higher than `a`; 1 when no such mask exists.
pub fn decay_floor(set: &MaskSet, a: usize) -> f64 {
    let sa = set.get(a).score;
    let mut floor: f64 = 1.0;
    for k in 0..set.len() {
        if set.get(k).score > sa {
            let iou = mask_iou(&set.get(k).binary, &set.get(a).binary).unwrap();
            floor = floor.min(1.0 - iou);
        }
    }
    floor
}

/// Per-mask penalties: `penalty_b = min over a with s_a > s_b of
/// (1 - IoU(a,b)) / phi_a`, clamped to at most 1.
pub fn penalties(set: &MaskSet) -> Vec<f64> {
    let iou = iou_matrix(set);
    let floors: Vec<f64> = (0..set.len()).map(|a| floor_from_matrix(set, &iou, a)).collect();
    penalties_from_matrix(set, &iou, &floors)
}

fn floor_from_matrix(set: &MaskSet, iou: &Mat, a: usize) -> f64 {
    let sa = set.get(a).score;
    let mut floor: f64 = 1.0;
    for k in 0..set.len() {
        if set.get(k).score > sa {
            floor = floor.min(1.0 - iou.at(k, a));
        }
    }
    floor
}

fn penalties_from_matrix(set: &MaskSet, iou: &Mat, floors: &[f64]) -> Vec<f64> {
    let n = set.len();
    let mut out = vec![1.0; n];
    for b in 0..n {
        let sb = set.get(b).score;
        let mut pen: f64 = 1.0;
        for a in 0..n {
            if set.get(a).score > sb && floors[a] > 0.0 {
                pen = pen.min((1.0 - iou.at(a, b)) / floors[a]);
            }
        }
        out[b] = pen.min(1.0);
    }
    out
}

/// Result of one suppression pass over a [`MaskSet`].
#[derive(Debug, Clone, PartialEq)]
pub struct SuppressionResult {
    /// Decayed score of every input mask (same order as the input).
    pub updated_scores: Vec<f64>,
    /// Penalty factor applied to every input mask.
    pub penalties: Vec<f64>,
    /// Indices of masks whose updated score clears the post threshold,
    /// sorted by updated score descending (ties by index ascending).
    pub kept: Vec<usize>,
}

/// One simultaneous decay pass over the whole set, reusing a precomputed
/// pairwise IoU matrix. Masks whose updated score falls below
/// `post_threshold` are dropped from `kept`.
pub fn suppress(set: &MaskSet, post_threshold: f64) -> Result<SuppressionResult> {
    if !(0.0..=1.0).contains(&post_threshold) {
        return Err(Error::Domain {
            context: "suppress",
            detail: format!("post_threshold {post_threshold} outside [0,1]"),
        });
    }
    let iou = iou_matrix(set);
    let floors: Vec<f64> = (0..set.len()).map(|a| floor_from_matrix(set, &iou, a)).collect();
    let pens = penalties_from_matrix(set, &iou, &floors);
    Ok(finish(set, pens, post_threshold))
}

/// Reference implementation with plain nested loops and no shared IoU matrix;
/// must agree with [`suppress`] on every input.
pub fn oracle_suppress(set: &MaskSet, post_threshold: f64) -> Result<SuppressionResult> {
    if !(0.0..=1.0).contains(&post_threshold) {
        return Err(Error::Domain {
            context: "oracle_suppress",
            detail: format!("post_threshold {post_threshold} outside [0,1]"),
        });
    }
    let n = set.len();
    let floors: Vec<f64> = (0..n).map(|a| decay_floor(set, a)).collect();
    let mut pens = vec![1.0; n];
    for b in 0..n {
        let sb = set.get(b).score;
        let mut pen: f64 = 1.0;
        for a in 0..n {
            if set.get(a).score > sb && floors[a] > 0.0 {
                let iou = mask_iou(&set.get(a).binary, &set.get(b).binary)?;
                pen = pen.min((1.0 - iou) / floors[a]);
            }
        }
        pens[b] = pen.min(1.0);
    }
    Ok(finish(set, pens, post_threshold))
}

fn finish(set: &MaskSet, pens: Vec<f64>, post_threshold: f64) -> SuppressionResult {
    let updated: Vec<f64> = set
        .iter()
        .zip(&pens)
        .map(|(m, &p)| m.score * p)
        .collect();
    let mut kept: Vec<usize> = (0..set.len())
        .filter(|&i| updated[i] >= post_threshold)
        .collect();
    kept.sort_by(|&x, &y| {
        updated[y]
            .partial_cmp(&updated[x])
            .expect("scores are finite")
            .then(x.cmp(&y))
    });
    SuppressionResult {
        updated_scores: updated,
        penalties: pens,
        kept,
    }
}

/// Histogram of pairwise IoUs for one band of set sizes.
#[derive(Debug, Clone, PartialEq)]
pub struct BandHistogram {
    /// Human-readable band label ("5-10", "11-20", "21+", "all").
    pub label: &'static str,
    /// Number of sets that fell in this band.
    pub set_count: usize,
    /// Total pairs binned.
    pub pair_count: usize,
    /// One count per IoU interval.
    pub counts: Vec<u64>,
}

/// Pairwise-IoU statistics bucketed by IoU interval and banded by set size.
#[derive(Debug, Clone, PartialEq)]
pub struct OverlapHistogram {
    /// Interval edges, ascending from 0 to 1. Interval `k` is
    /// `[edges[k], edges[k+1])`, with the final interval closed on the right.
    pub edges: Vec<f64>,
    /// Bands 5-10, 11-20, 21+ masks, plus an "all" band covering every set.
    pub bands: Vec<BandHistogram>,
}

/// Bins every pairwise IoU of every set into the given intervals.
///
/// Sets are aggregated into size bands of 5-10, 11-20 and 21+ masks, plus an
/// "all" band that includes every set regardless of size (this is where sets
/// with fewer than 5 masks are visible). Sets with fewer than two masks
/// contribute no pairs.
pub fn iou_overlap_stats(sets: &[MaskSet], edges: &[f64]) -> Result<OverlapHistogram> {
    if edges.len() < 2 || edges[0] != 0.0 || *edges.last().unwrap() != 1.0 {
        return Err(Error::Domain {
            context: "iou_overlap_stats",
            detail: format!("edges must run from 0 to 1, got {edges:?}"),
        });
    }
    if edges.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Domain {
            context: "iou_overlap_stats",
            detail: alloc::string::String::from("edges must be strictly ascending"),
        });
    }
    let nbins = edges.len() - 1;
    let mut bands = vec![
        BandHistogram {
            label: "5-10",
            set_count: 0,
            pair_count: 0,
            counts: vec![0; nbins],
        },
        BandHistogram {
            label: "11-20",
            set_count: 0,
            pair_count: 0,
            counts: vec![0; nbins],
        },
        BandHistogram {
            label: "21+",
            set_count: 0,
            pair_count: 0,
            counts: vec![0; nbins],
        },
        BandHistogram {
            label: "all",
            set_count: 0,
            pair_count: 0,
            counts: vec![0; nbins],
        },
    ];
    for set in sets {
        if set.is_empty() {
            continue;
        }
        let band = match set.len() {
            5..=10 => Some(0),
            11..=20 => Some(1),
            n if n >= 21 => Some(2),
            _ => None,
        };
        if let Some(b) = band {
            bands[b].set_count += 1;
        }
        bands[3].set_count += 1;
        let iou = iou_matrix(set);
        for i in 0..set.len() {
            for j in i + 1..set.len() {
                let v = iou.at(i, j);
                let bin = bin_index(edges, v);
                if let Some(b) = band {
                    bands[b].counts[bin] += 1;
                    bands[b].pair_count += 1;
                }
                bands[3].counts[bin] += 1;
                bands[3].pair_count += 1;
            }
        }
    }
    Ok(OverlapHistogram {
        edges: edges.to_vec(),
        bands,
    })
}

fn bin_index(edges: &[f64], v: f64) -> usize {
    let nbins = edges.len() - 1;
    for k in 0..nbins {
        if v < edges[k + 1] {
            return k;
        }
    }
    nbins - 1 // v == 1.0 lands in the final, right-closed interval
}
