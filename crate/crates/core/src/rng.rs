//! Seeding conventions.
//!
//! Every random stream in the crate is a [`ChaCha8Rng`] seeded through
//! [`rng_from_seed`]. Derived streams (restarts, replicates, grid points) get
//! their seeds from [`mix`], which is a bijection in its second argument for a
//! fixed first argument, so distinct indices never share a stream.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// SplitMix64 finalizer. Bijective on `u64`.
#[inline]
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives the seed of sub-stream `index` from `seed`.
#[inline]
pub fn mix(seed: u64, index: u64) -> u64 {
    splitmix64(seed ^ splitmix64(index))
}

/// Packs a (grid point, replicate) pair into one stream index.
///
/// Injective while both coordinates stay below `2^32`.
#[inline]
pub fn grid_index(point: u32, replicate: u32) -> u64 {
    ((point as u64) << 32) | replicate as u64
}

pub fn rng_from_seed(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
