//! Seeded random number construction.
//!
//! Every stochastic component in the pipeline (parameter init, data shuffling,
//! dropout, synthetic data, question-token embeddings) draws from a ChaCha
//! stream created here, keyed by an explicit `u64` seed. ChaCha output is
//! platform-independent, so a seed pins the full byte stream.

pub use rand::Rng;
pub use rand_chacha::ChaCha8Rng;

use rand::SeedableRng;

/// Creates the deterministic generator used throughout the crate.
pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Mixes a seed with a secondary key into a new seed.
///
/// Used to derive independent streams (for example one stream per question
/// token) from one user-facing seed. This is the SplitMix64 finalizer, which
/// diffuses every input bit across the output.
pub fn mix(seed: u64, key: u64) -> u64 {
    let mut z = seed ^ key.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
