//! Seed derivation for reproducible, schedule-independent random streams.
//!
//! A single 64-bit run seed fans out into independent streams keyed by a
//! stage name, a topic, or a term index. Two streams never share state, so
//! work can be split across threads in any order without changing results.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The RNG used throughout the crate.
pub type StreamRng = ChaCha8Rng;

/// SplitMix64 finalizer; a bijective 64-bit mixer.
pub const fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// 64-bit FNV-1a over bytes. Stable across platforms and releases.
pub const fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xCBF2_9CE4_8422_2325;
    let mut i = 0;
    while i < bytes.len() {
        hash ^= bytes[i] as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01B3);
        i += 1;
    }
    hash
}

/// Seed for the stream belonging to term `index`: `seed ^ mix64(index)`.
pub const fn for_index(seed: u64, index: u64) -> u64 {
    seed ^ mix64(index)
}

/// Seed for a named sub-stream (stage, topic, ...).
pub fn for_label(seed: u64, label: &str) -> u64 {
    mix64(seed ^ fnv1a(label.as_bytes()))
}

pub fn rng(seed: u64) -> StreamRng {
    ChaCha8Rng::seed_from_u64(seed)
}
