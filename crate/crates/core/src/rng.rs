//! Seeded random streams. Every stochastic step derives its generator from a
//! root seed plus a small tuple of stream coordinates, so results do not depend
//! on thread scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// SplitMix64 finaliser.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Generator for stream `coords` under `seed`.
pub fn stream(seed: u64, coords: &[u64]) -> Rng {
    let mut state = mix(seed);
    for &c in coords {
        state = mix(state ^ mix(c));
    }
    Rng::seed_from_u64(state)
}
