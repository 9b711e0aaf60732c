//! Seed derivation for reproducible runs.
//!
//! Every randomized stage (split, folds, per-tree bootstraps, weight init)
//! draws from its own sub-seed so that results do not depend on execution
//! order or thread count.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Derives a sub-seed for a named purpose and index.
pub fn subseed(seed: u64, domain: &str, index: u64) -> u64 {
    splitmix64(seed ^ fnv1a(domain.as_bytes()) ^ splitmix64(index))
}

/// A portable, seedable generator. ChaCha8 streams are identical across
/// platforms and word sizes.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
