//! Counter-based random streams.
//!
//! Every random draw is addressed by `(seed, stream, index)`, so a sample's
//! value does not depend on which worker produced it or in what order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Words reserved per index; generous enough for rejection loops.
const WORDS_PER_INDEX: u128 = 1 << 16;

/// Stream identifiers used across the crate. Distinct purposes never share a
/// stream, so adding draws in one place cannot shift another.
pub mod streams {
    pub const TUPLES: u64 = 1;
    pub const REGULARITY: u64 = 2;
    pub const GENERATOR: u64 = 3;
    pub const NET_ORDER: u64 = 4;
    pub const PIECE: u64 = 5;
    pub const SHORT_PIECE: u64 = 6;
    pub const HARNESS: u64 = 7;
    pub const SUBSAMPLE: u64 = 8;
}

/// Generator positioned at the start of block `index` of `stream`.
pub fn at(seed: u64, stream: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng.set_word_pos(index as u128 * WORDS_PER_INDEX);
    rng
}

/// Derives a child seed, for nesting independent experiments under one seed.
pub fn derive(seed: u64, tag: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
