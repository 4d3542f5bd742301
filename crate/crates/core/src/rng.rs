//! Seeding helpers shared by every sampling routine.
//!
//! All randomness in the crate flows through `ChaCha8`, a counter-based stream
//! generator, so every API that samples takes an explicit `u64` seed and
//! parallel callers can partition seed space with [`subseed`].

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Builds the generator for a given seed.
pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derives an independent stream seed via a splitmix64 round.
///
/// Distinct `(base, stream)` pairs map to distinct seeds with overwhelming
/// probability, so per-draw and per-replicate substreams never collide.
pub fn subseed(base: u64, stream: u64) -> u64 {
    let mut z = base
        .wrapping_add(stream.wrapping_mul(0x9e37_79b9_7f4a_7c15))
        .wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
