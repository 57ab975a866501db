//! Deterministic seed derivation.
//!
//! A single root seed is split per purpose so that, for example, changing
//! the number of training pairs does not alter the initialization draws.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub const PURPOSE_DATA: u64 = 1;
pub const PURPOSE_SHUFFLE: u64 = 2;
pub const PURPOSE_INIT: u64 = 3;
pub const PURPOSE_NOISE: u64 = 4;
pub const PURPOSE_PROBE: u64 = 5;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Child seed for `(root, purpose, index)`.
pub fn derive(root: u64, purpose: u64, index: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(root) ^ purpose) ^ index)
}

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
