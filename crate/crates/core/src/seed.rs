//! Deterministic replicate seeding.
//!
//! Replicate `i` of an experiment with master seed `s` draws from a ChaCha8
//! stream keyed by `derive_seed(s, i)`. The mixing function is fixed:
//!
//! ```text
//! x = s + 0x9E3779B97F4A7C15 * (i + 1)        (wrapping)
//! x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9
//! x = (x ^ (x >> 27)) * 0x94D049BB133111EB
//! x =  x ^ (x >> 31)
//! ```
//!
//! For a fixed master seed the map `i -> x` is a bijection on `u64`: the
//! affine step has an odd multiplier and each finalizer stage is invertible.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Random stream used by every simulation in the crate.
pub type SimRng = ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut x: u64) -> u64 {
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Seed for replicate `replicate` of an experiment keyed by `master_seed`.
#[inline]
pub fn derive_seed(master_seed: u64, replicate: u64) -> u64 {
    mix64(master_seed.wrapping_add(GOLDEN.wrapping_mul(replicate.wrapping_add(1))))
}

/// Stream for one replicate.
pub fn replicate_rng(master_seed: u64, replicate: u64) -> SimRng {
    SimRng::seed_from_u64(derive_seed(master_seed, replicate))
}

/// Stream seeded directly.
pub fn rng_from_seed(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}
