//! Core algorithms for a small, fully deterministic visual question answering
//! pipeline over instance segmentations.
//!
//! The crate covers the whole numeric path:
//!
//! * decoding instance masks from a feature map with per-cell dynamic 1x1
//!   convolution kernels ([`mask_decoder`]),
//! * parallel score decay across overlapping candidates ([`nms`]),
//! * splitting a scene into an instance view and a background view and pooling
//!   both into fixed-size descriptor matrices ([`view`]),
//! * a seeded hash-grid question encoder ([`question`]),
//! * two-stage bilinear relation attention with multi-head glimpses, including
//!   hand-derived analytic gradients ([`attention`]),
//! * a small SGD training loop with momentum, weight decay, gradient clipping
//!   and learning-rate warm-up ([`train`]), finite-difference gradient
//!   verification ([`gradcheck`]), and consensus answer scoring ([`eval`]).
//!
//! Everything is written against `alloc` only; the default `std` feature adds
//! `std::error::Error` integration and nothing else. All transcendental
//! functions are routed through `libm` so results are bit-identical across
//! platforms and feature combinations, and every source of randomness is a
//! seeded ChaCha stream, so identical inputs always produce identical bytes.

#![cfg_attr(not(feature = "std"), no_std)]
// Numeric kernels intentionally use index loops that mirror the subscript
// form of the formulas they implement.
#![allow(clippy::needless_range_loop)]

extern crate alloc;

pub mod attention;
pub mod error;
pub mod eval;
pub mod gradcheck;
pub mod mask;
pub mod mask_decoder;
pub mod mat;
pub mod math;
pub mod nms;
pub mod question;
pub mod rng;
pub mod train;
pub mod view;

pub use error::{Error, Result};
pub use mat::Mat;
