//! Seeded random streams.
//!
//! Every run has one root seed. Independent units of work (an episode, a
//! block of Monte Carlo trials) get their own generator whose seed is
//! `derive_seed(root, domain, index)`, a SplitMix64 hash of the three
//! words. Because a unit's stream depends only on its index, serial and
//! parallel runs draw identical numbers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Domain tag for per-episode streams.
pub const EPISODE_DOMAIN: u64 = 0x6570_6973_6f64_6521;
/// Domain tag for Monte Carlo trial blocks.
pub const MONTE_CARLO_DOMAIN: u64 = 0x6d6f_6e74_6563_6172;
/// Domain tag for model initialisation.
pub const TRAINING_DOMAIN: u64 = 0x7472_6169_6e69_6e67;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

pub fn derive_seed(root: u64, domain: u64, index: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(root) ^ domain) ^ index)
}

pub fn rng_from_seed(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn substream(root: u64, domain: u64, index: u64) -> SimRng {
    rng_from_seed(derive_seed(root, domain, index))
}
