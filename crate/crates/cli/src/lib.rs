//! Command-line companion to [`maskvqa_core`]: binary file formats,
//! run configuration, synthetic-dataset generation, and the plumbing that
//! chains the core stages (mask decoding, suppression, view separation,
//! question encoding, relation attention, training, scoring) into
//! reproducible subcommands.
//!
//! Everything here does IO; all numerics live in the core crate. Every
//! file format written by this crate is byte-specified in `README.md` and
//! round-trips bit-exactly.

pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod dataset;
pub mod metrics;
pub mod pipeline;
pub mod ppm;
pub mod tensor_file;
