//! Counter-based random streams.
//!
//! Every random draw in the crate comes from a ChaCha8 generator addressed by
//! `(seed, purpose, index)`. The purpose tag separates independent uses of the
//! same user seed (pilot batches, outer replicates, restarts); the index picks
//! one of ChaCha's 2^64 streams, normally the replicate number. Work can then be
//! split across any number of threads without changing a single draw.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Purpose tags. Values are arbitrary but fixed forever: changing one changes
/// every reproduced number downstream.
pub mod purpose {
    pub const RESPONSES: u64 = 0x01;
    pub const PILOT: u64 = 0x02;
    pub const REPLICATE: u64 = 0x03;
    pub const SIGNS_LHS: u64 = 0x04;
    pub const SIGNS_RHS: u64 = 0x05;
    pub const GRID: u64 = 0x06;
    pub const DESIGN: u64 = 0x07;
    pub const RESTART: u64 = 0x08;
    pub const RE_SEARCH: u64 = 0x09;
    pub const HIDDEN_SAMPLE: u64 = 0x0a;
    pub const HIDDEN_MOMENTS: u64 = 0x0b;
    pub const SCAN: u64 = 0x0c;
    pub const M_Q: u64 = 0x0d;
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Generator for replicate `index` of the stream family `(seed, purpose)`.
pub fn stream(seed: u64, purpose: u64, index: u64) -> ChaCha8Rng {
    let key = splitmix64(seed ^ splitmix64(purpose));
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    rng.set_stream(index);
    rng
}

/// Derive a child seed, for handing a sub-experiment its own seed space.
pub fn derive_seed(seed: u64, purpose: u64, index: u64) -> u64 {
    splitmix64(splitmix64(seed ^ splitmix64(purpose)) ^ index)
}
