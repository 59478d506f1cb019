//! Seeded random streams.
//!
//! Every stochastic component draws from ChaCha20 (RFC 8439 block function,
//! a counter-based generator) keyed by `seed` through
//! `SeedableRng::seed_from_u64`, with a distinct stream id per consumer.
//! Streams are therefore reproducible across platforms and independent of
//! each other.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

pub type Rng = ChaCha20Rng;

/// Generator for `(seed, stream)`.
pub fn stream(seed: u64, stream: u64) -> Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Mixes a sub-index into a seed (SplitMix64 finalizer).
pub fn derive(seed: u64, index: u64) -> u64 {
    let mut z = seed
        .wrapping_add(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(index.wrapping_mul(0xBF58_476D_1CE4_E5B9));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

// Stream ids, kept apart so consumers never share draws.
pub(crate) const STREAM_INIT: u64 = 1;
pub(crate) const STREAM_SHUFFLE: u64 = 2;
pub(crate) const STREAM_ATTRIBUTION: u64 = 3;
pub(crate) const STREAM_SAMPLING: u64 = 4;
pub(crate) const STREAM_SYNTH: u64 = 16;
