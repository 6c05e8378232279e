//! Seeded randomness.
//!
//! Every stochastic operation in this crate draws from ChaCha8 (`rand_chacha`),
//! a counter-based stream cipher generator, seeded from an explicit 64-bit
//! value. There is no global RNG state.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Odd 64-bit constant used to derive per-repeat seeds (`master ^ i * K`).
pub const SEED_STRIDE: u64 = 0x9E37_79B9_7F4A_7C15;

pub type Rng = ChaCha8Rng;

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Seed for the `index`-th variant derived from a master seed.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    master ^ index.wrapping_mul(SEED_STRIDE)
}

/// Independent sub-seed for a named pipeline stage.
pub(crate) fn stage_seed(seed: u64, stage: u64) -> u64 {
    mix64(seed ^ mix64(stage.wrapping_add(0x632B_E59B_D9B4_E019)))
}

/// SplitMix64 finalizer. Used as a stateless lattice hash.
pub(crate) fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
