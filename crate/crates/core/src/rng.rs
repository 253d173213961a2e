//! Seeded random streams.
//!
//! Every stochastic operation receives its generator explicitly. Independent
//! streams (per round, per attempt, per cluster count) are derived from the
//! run seed by hashing a tag path, so results never depend on the order in
//! which worker threads pick up work.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The generator used throughout the crate.
pub type SimRng = ChaCha8Rng;

/// Stream tags, so that different consumers of the same seed never collide.
pub mod tag {
    pub const RESAMPLE: u64 = 1;
    pub const FIT: u64 = 2;
    pub const AGGREGATE: u64 = 3;
    pub const NULL_SAMPLE: u64 = 4;
    pub const NULL_GRID: u64 = 5;
    pub const GENERATE: u64 = 6;
    pub const REPETITION: u64 = 7;
    pub const BASELINE: u64 = 8;
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a seed from a base seed and a path of tags.
pub fn derive_seed(seed: u64, tags: &[u64]) -> u64 {
    let mut state = seed;
    let mut out = splitmix64(&mut state);
    for &t in tags {
        state ^= t.wrapping_mul(0xD6E8_FEB8_6659_FD93);
        out ^= splitmix64(&mut state);
        state = out;
    }
    out
}

/// A generator for the stream identified by `tags` under `seed`.
pub fn stream_rng(seed: u64, tags: &[u64]) -> SimRng {
    let mut state = derive_seed(seed, tags);
    let mut bytes = [0u8; 32];
    for chunk in bytes.chunks_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    SimRng::from_seed(bytes)
}
