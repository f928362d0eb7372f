//! Seed derivation and deterministic random number generation.
//!
//! Every randomized stage draws from a ChaCha8 stream seeded through
//! [`derive_seed`], so a single master seed reproduces the whole pipeline
//! bit for bit while keeping the stages' streams independent of each other.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream tags for the pipeline stages. Adding a stage appends a tag; existing
/// tags never change, otherwise stored seeds stop reproducing old artifacts.
pub mod stream {
    pub const WEAR_CURVE: u64 = 1;
    pub const RECORDING: u64 = 2;
    pub const MEASUREMENT: u64 = 3;
    pub const QUANTIZE: u64 = 4;
    pub const MODEL_INIT: u64 = 5;
    pub const SHUFFLE: u64 = 6;
    pub const DROPOUT: u64 = 7;
    pub const TUNER: u64 = 8;
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives an independent sub-seed from a master seed and a stream tag.
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    splitmix64(master ^ splitmix64(stream))
}

/// Derives a sub-seed from a master seed and a multi-part index
/// (e.g. `(trial, epoch)`), folding the parts in order.
pub fn derive_seed_n(master: u64, parts: &[u64]) -> u64 {
    let mut s = master;
    for &p in parts {
        s = splitmix64(s ^ splitmix64(p));
    }
    s
}

/// A deterministic RNG for the given master seed and stream tag.
pub fn stream_rng(master: u64, stream: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, stream))
}

/// A deterministic RNG seeded directly from a derived seed.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
