//! Deterministic seed derivation.
//!
//! Every random draw in the toolkit comes from a ChaCha stream whose seed is
//! derived from a single user seed plus a path of integer labels (purpose,
//! trial index, ...). Derivation is a pure function, so a trial's randomness
//! does not depend on which worker runs it or in what order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mix a base seed with a path of labels into a new 64-bit seed.
pub fn derive(base: u64, path: &[u64]) -> u64 {
    path.iter().fold(splitmix64(base), |acc, &label| {
        splitmix64(acc ^ splitmix64(label))
    })
}

/// A generator seeded from `derive(base, path)`.
pub fn rng(base: u64, path: &[u64]) -> Rng {
    Rng::seed_from_u64(derive(base, path))
}

/// Stream labels, kept distinct so different purposes never share draws.
pub mod stream {
    pub const SIGNAL: u64 = 1;
    pub const NOISE: u64 = 2;
    pub const CALIBRATION: u64 = 3;
    pub const H1_TRIAL: u64 = 4;
    pub const LEARNING: u64 = 5;
    pub const PHASE: u64 = 6;
    pub const PILOT_PHASE: u64 = 7;
    pub const POWER_START: u64 = 8;
}
