//! Seed derivation for replayable random streams.
//!
//! Every stream is a `ChaCha8Rng` seeded from a 64-bit value obtained by
//! hashing a path of integers (master seed, geometry index, round index, ...)
//! with the SplitMix64 finalizer. The mapping is fixed, so any single trial
//! can be regenerated without replaying the ones before it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Stream = ChaCha8Rng;

/// Tag separating geometry-placement streams from noise streams.
pub const TAG_GEOMETRY: u64 = 0x6765_6f6d;
/// Tag for per-round noise/fading streams.
pub const TAG_ROUND: u64 = 0x726f_756e;
/// Tag for source placement when the source is drawn at random.
pub const TAG_SOURCE: u64 = 0x736f_7572;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a child seed from `master` and a path of indices.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(master), |h, &p| splitmix64(h ^ splitmix64(p.wrapping_add(0x5851_f42d_4c95_7f2d))))
}

pub fn stream(seed: u64) -> Stream {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn derived_stream(master: u64, path: &[u64]) -> Stream {
    stream(derive_seed(master, path))
}
