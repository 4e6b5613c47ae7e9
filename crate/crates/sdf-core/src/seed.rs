//! Deterministic seed derivation.
//!
//! All randomness in the crate flows from a single root seed through
//! [`derive`], so any unit of work (a tree, a fold, a repetition) can be
//! reproduced in isolation. The derivation is stable: changing it would
//! change every trained model, so it is part of the determinism contract.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive a child seed from `seed` and a path of component indices
/// (e.g. `[LEVEL, level, slot, fold]`).
pub fn derive(seed: u64, path: &[u64]) -> u64 {
    let mut s = splitmix64(seed);
    for &part in path {
        s = splitmix64(s ^ splitmix64(part));
    }
    s
}

/// Stream tags used as the first path component so that different kinds of
/// draws never collide even when their numeric indices do.
pub mod tag {
    pub const VAL_SPLIT: u64 = 1;
    pub const FOLDS: u64 = 2;
    pub const FOREST: u64 = 3;
    pub const SCAN: u64 = 4;
    pub const PAIRS: u64 = 5;
    pub const SPLIT: u64 = 6;
    pub const CASCADE: u64 = 7;
}

/// The crate's RNG: seeded ChaCha8, identical output on every platform.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
