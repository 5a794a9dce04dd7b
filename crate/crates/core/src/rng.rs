//! Seed derivation.
//!
//! Every run has one 64-bit master seed. Independent streams (trials, noise
//! paths, channel draws) get a child seed `child_seed(master, index)`, so a
//! trial's randomness depends only on its index and never on the order in
//! which trials are executed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator used throughout the crate.
pub type SimRng = ChaCha8Rng;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 output function.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Child seed for stream `index` of `master`.
///
/// `splitmix64(master ^ splitmix64(index))`; distinct indices give
/// statistically independent ChaCha streams.
pub fn child_seed(master: u64, index: u64) -> u64 {
    splitmix64(master ^ splitmix64(index))
}

/// Generator seeded directly from `seed`.
pub fn rng_from_seed(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}

/// Generator for stream `index` of `master`.
pub fn child_rng(master: u64, index: u64) -> SimRng {
    rng_from_seed(child_seed(master, index))
}
