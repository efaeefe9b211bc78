//! Deterministic random streams.
//!
//! Every random decision is drawn from a stream keyed by a tuple such as
//! `(seed, pass, layer, node)`, so results do not depend on thread
//! scheduling or on the order in which nodes are visited.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[inline]
fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Folds a key tuple into one 64-bit seed.
pub fn mix(parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(0x243F_6A88_85A3_08D3, |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

/// Independent generator for the given key tuple.
pub fn stream(parts: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix(parts))
}

/// Domain tags keep streams for different purposes disjoint.
pub(crate) mod tag {
    pub const INIT: u64 = 1;
    pub const SAMPLE: u64 = 2;
    pub const SPLIT: u64 = 3;
    pub const GENERATE: u64 = 4;
    pub const PREDICT: u64 = 5;
}
