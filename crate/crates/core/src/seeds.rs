//! Deterministic seed derivation.
//!
//! Every random stream in a simulation is derived from the master seed plus a
//! tag path, so streams never depend on the order in which they are created.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes `tags` into `seed`, one after another.
pub fn derive(seed: u64, tags: &[u64]) -> u64 {
    tags.iter()
        .fold(splitmix64(seed), |acc, &t| splitmix64(acc ^ splitmix64(t)))
}

pub fn rng_from(seed: u64, tags: &[u64]) -> SimRng {
    SimRng::seed_from_u64(derive(seed, tags))
}

/// Stream tags.
pub mod tag {
    pub const POPULATION: u64 = 1;
    pub const SHOP: u64 = 2;
    pub const CUSTOMER: u64 = 3;
    pub const SESSION: u64 = 4;
    pub const RANKER: u64 = 5;
    pub const ORACLE: u64 = 6;
    pub const CORRELATION: u64 = 7;
    pub const RUN: u64 = 8;
}
