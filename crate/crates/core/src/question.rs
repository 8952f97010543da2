//! Deterministic toy question encoder.
//!
//! Stands in for a learned language model: questions are lowercased, split on
//! non-alphanumerics, and each token is mapped to a pseudo-random unit vector
//! keyed by (token hash, seed). The resulting `n x h` matrix has one column
//! per token slot, truncated or right-padded with zero columns to exactly `h`
//! slots. Identical `(text, n, h, seed)` always produce bit-identical output,
//! on every platform — the hash is an explicit integer algorithm, not the
//! process hasher.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::mat::Mat;
use crate::math::sqrt;
use crate::rng;

/// Lowercases and splits on non-alphanumeric characters, dropping empties.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut cur = String::new();
    for ch in text.chars() {
        if ch.is_alphanumeric() {
            for lc in ch.to_lowercase() {
                cur.push(lc);
            }
        } else if !cur.is_empty() {
            tokens.push(core::mem::take(&mut cur));
        }
    }
    if !cur.is_empty() {
        tokens.push(cur);
    }
    tokens
}

/// FNV-1a 64-bit hash of a byte string.
pub fn token_hash(token: &str) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &b in token.as_bytes() {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Embeds a token sequence as an `n x h` matrix: column `t` is the unit
/// vector of token `t` (sequence truncated to `h`), remaining columns are
/// exactly zero.
pub fn embed(tokens: &[String], n: usize, h: usize, seed: u64) -> Result<Mat> {
    if n == 0 || h == 0 {
        return Err(Error::Domain {
            context: "question::embed",
            detail: format!("n and h must be positive, got n={n}, h={h}"),
        });
    }
    let mut q = Mat::zeros(n, h);
    for (t, token) in tokens.iter().take(h).enumerate() {
        let mut r = rng::seeded(rng::mix(seed, token_hash(token)));
        let mut col: Vec<f64> = (0..n).map(|_| r.gen::<f64>() * 2.0 - 1.0).collect();
        let norm = sqrt(col.iter().map(|v| v * v).sum());
        if norm > 0.0 {
            for v in &mut col {
                *v /= norm;
            }
        }
        for (row, &v) in col.iter().enumerate() {
            *q.at_mut(row, t) = v;
        }
    }
    Ok(q)
}

/// Convenience: tokenize then embed.
pub fn encode(text: &str, n: usize, h: usize, seed: u64) -> Result<Mat> {
    embed(&tokenize(text), n, h, seed)
}
