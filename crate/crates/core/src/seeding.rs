//! Seed derivation for reproducible, partition-independent random streams.
//!
//! Every random stream in the crate is a `ChaCha8Rng` seeded from a `u64`.
//! Sub-streams (per geometry, per Monte-Carlo chunk) are derived by folding
//! indices into the base seed with the SplitMix64 finalizer:
//!
//! ```text
//! h = splitmix64(base)
//! for i in indices: h = splitmix64(h ^ splitmix64(i + 0x9E3779B97F4A7C15))
//! ```
//!
//! The schedule is part of the reproducibility contract of sweep outputs and
//! must not change.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 output function.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a sub-seed from `base` and a path of stream indices.
pub fn derive_seed(base: u64, indices: &[u64]) -> u64 {
    indices.iter().fold(splitmix64(base), |h, &i| {
        splitmix64(h ^ splitmix64(i.wrapping_add(GOLDEN)))
    })
}

pub fn rng_from_seed(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}
