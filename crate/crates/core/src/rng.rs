//! Seed derivation and the crate-wide RNG.
//!
//! Every stochastic operation takes an explicit `u64` seed and runs on
//! [`ChaCha8Rng`], which produces the same stream on every platform. Parallel
//! protocols (bootstrap resamples, LOCO folds, HPO trials) derive one child
//! seed per job so results do not depend on execution order or worker count.

use rand_chacha::rand_core::SeedableRng;
pub use rand_chacha::ChaCha8Rng;

/// Mixes a master seed with a stream tag and an index into a child seed.
///
/// splitmix64-style finalizer; fixed forever because serialized artifacts
/// (datasets, checkpoints, reports) depend on it.
pub fn derive_seed(master: u64, stream: u64, index: u64) -> u64 {
    let mut z = master
        .wrapping_add(stream.wrapping_mul(0x9e37_79b9_7f4a_7c15))
        .wrapping_add(index.wrapping_mul(0xbf58_476d_1ce4_e5b9));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stream tags keep sibling protocols from colliding on the same master seed.
pub mod stream {
    pub const SYNTH_COUNTRY: u64 = 1;
    pub const MASK: u64 = 2;
    pub const SHUFFLE: u64 = 3;
    pub const INIT: u64 = 4;
    pub const BOOTSTRAP: u64 = 5;
    pub const FOLD: u64 = 6;
    pub const FEWSHOT: u64 = 7;
    pub const TRIAL: u64 = 8;
    pub const SPLIT: u64 = 9;
    pub const IMPORTANCE: u64 = 10;
    pub const DROPOUT: u64 = 11;
    pub const DIVERGENCE: u64 = 12;
    pub const THEORY: u64 = 13;
}

/// ChaCha8 generator for the given seed.
pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
