//! Seed derivation for reproducible parallel replication.
//!
//! Every replication owns its own generator, seeded from
//! `(base_seed, cell_index, rep_index)`. Nothing is shared between workers, so
//! results do not depend on scheduling or on the number of threads.
//!
//! The mixing function is
//!
//! ```text
//! seed = fmix(fmix(base) XOR (cell << 32 | rep))
//! ```
//!
//! where `fmix` is the SplitMix64 finalizer. `fmix` is a bijection on `u64`, so
//! for a fixed base the map `(cell, rep) -> seed` is injective over the full
//! `u32 x u32` index range.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator used for every simulation in the crate.
pub type SimRng = ChaCha8Rng;

/// SplitMix64 output finalizer (invertible).
#[inline]
pub fn fmix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn derive_seed(base_seed: u64, cell_index: u32, rep_index: u32) -> u64 {
    let packed = (u64::from(cell_index) << 32) | u64::from(rep_index);
    fmix64(fmix64(base_seed) ^ packed)
}

pub fn rng_from_seed(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}
