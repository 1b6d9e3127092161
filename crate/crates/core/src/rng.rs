//! Seed plumbing. Every randomized routine takes a `u64` seed and derives
//! child seeds with [`derive_seed`], so results never depend on thread
//! scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Child seed for `(seed, tag)`. Distinct tags give unrelated streams.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    mix(mix(seed) ^ tag.wrapping_mul(0xd6e8_feb8_6659_fd93))
}

/// Child seed for a path of tags, e.g. `(level, point, repetition)`.
pub fn derive_path(seed: u64, path: &[u64]) -> u64 {
    path.iter().fold(seed, |s, &t| derive_seed(s, t))
}
