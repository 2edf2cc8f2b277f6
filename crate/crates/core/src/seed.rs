//! Counter-based seed derivation.
//!
//! Every rollout, replication and sampling stream gets its own seed computed
//! purely from the master seed and its position in the experiment, so
//! results do not depend on how work is scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream tags keep independent consumers of one master seed apart.
pub mod stream {
    pub const ROLLOUT: u64 = 0x01;
    pub const STAGE: u64 = 0x02;
    pub const INTERVAL: u64 = 0x03;
    pub const REPLICATION: u64 = 0x04;
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for child `index` of `parent`.
#[inline]
pub fn derive(parent: u64, index: u64) -> u64 {
    splitmix64(parent ^ splitmix64(index.wrapping_add(0xD1B5_4A32_D192_ED03)))
}

/// Seed for a path of indices below `parent`.
pub fn derive_path(parent: u64, path: &[u64]) -> u64 {
    path.iter().fold(parent, |seed, &i| derive(seed, i))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
