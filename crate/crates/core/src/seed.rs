//! Deterministic seed derivation.
//!
//! Child seeds are drawn from a ChaCha stream keyed by the parent seed, one
//! stream per tag, so sibling seeds never depend on evaluation order.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derives a child seed from `base` and a path of tags.
pub fn derive_seed(base: u64, tags: &[u64]) -> u64 {
    tags.iter().fold(base, |acc, &tag| {
        let mut rng = ChaCha8Rng::seed_from_u64(acc);
        rng.set_stream(tag);
        rng.next_u64()
    })
}
