//! Seed derivation for reproducible, independent task streams.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

pub type TaskRng = ChaCha20Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for task `index` within `domain` (e.g. state sampling vs. data
/// generation) under a master seed.
pub fn derive_seed(master: u64, domain: u64, index: u64) -> u64 {
    splitmix64(splitmix64(master ^ splitmix64(domain)) ^ index.wrapping_mul(0xD1B5_4A32_D192_ED03))
}

pub fn rng_from_seed(seed: u64) -> TaskRng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// Stream domains used by the experiment runners.
pub mod domain {
    pub const STATE: u64 = 1;
    pub const DATA: u64 = 2;
    pub const ORACLE: u64 = 3;
}
