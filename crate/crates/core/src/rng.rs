//! Seed plumbing: one base seed fans out into independent, order-free streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SscRng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Counter-style derivation of a child seed from a base seed and a path of
/// integers (cell coordinates, trial index, restart index, ...).
pub fn derive_seed(base: u64, path: &[u64]) -> u64 {
    path.iter().fold(splitmix64(base), |acc, &p| splitmix64(acc ^ splitmix64(p.wrapping_add(0x632B_E59B_D9B4_E019))))
}

pub fn seeded(seed: u64) -> SscRng {
    ChaCha8Rng::seed_from_u64(seed)
}
