//! Deterministic RNG construction.
//!
//! All randomness in the crate flows through ChaCha8 generators seeded by
//! splitmix64-mixed streams, so results are identical across platforms and
//! across degrees of client-level parallelism. Each independent consumer
//! (initialization, client sampling, per-epoch shuffles, ...) gets its own
//! stream constant so streams never collide.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const STREAM_INIT: u64 = 0x01;
pub const STREAM_SAMPLE: u64 = 0x02;
pub const STREAM_LOCAL: u64 = 0x03;
pub const STREAM_PARTITION: u64 = 0x04;
pub const STREAM_SUBSAMPLE: u64 = 0x05;
pub const STREAM_EVAL: u64 = 0x06;
pub const STREAM_SYNTH: u64 = 0x07;
pub const STREAM_EPOCH: u64 = 0x08;

/// splitmix64 finalizer; good avalanche, stable everywhere.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mix an ordered list of words into one seed value.
pub fn mix(words: &[u64]) -> u64 {
    let mut acc = 0x243f_6a88_85a3_08d3; // arbitrary non-zero start
    for &w in words {
        acc = splitmix64(acc ^ w);
    }
    acc
}

/// A ChaCha8 generator keyed by the mixed words.
pub fn rng_from(words: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix(words))
}
