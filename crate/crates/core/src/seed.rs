//! Seed derivation for reproducible, independent random streams.
//!
//! Child seeds are produced by folding each key into the parent with the
//! SplitMix64 finalizer:
//!
//! ```text
//! h0 = mix(master)
//! h_{i+1} = mix(h_i ^ mix(key_i + 0x9E3779B97F4A7C15 * (i + 1)))
//! ```
//!
//! A sweep cell uses keys `[n, trial]`, so adding new cells never changes the
//! seed of an existing one.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 output function.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(master: u64, keys: &[u64]) -> u64 {
    let mut h = mix64(master);
    for (i, &k) in keys.iter().enumerate() {
        let salted = k.wrapping_add(GOLDEN.wrapping_mul(i as u64 + 1));
        h = mix64(h ^ mix64(salted));
    }
    h
}

/// The generator used everywhere in the crate.
pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
