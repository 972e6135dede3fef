//! Seed derivation for reproducible parallel streams.
//!
//! Every simulated path draws from its own ChaCha8 generator. The generator
//! seed for path `i` of a diagnostic is
//!
//! ```text
//! path_seed = mix64(mix64(master ^ mix64(tag + GOLDEN)) + (i + 1) * GOLDEN)
//! ```
//!
//! where `mix64` is the SplitMix64 finaliser, `GOLDEN = 0x9E3779B97F4A7C15`
//! and `tag` is the FNV-1a hash of the diagnostic's stream label. All
//! arithmetic wraps modulo 2^64. Any alternate implementation that follows
//! this recipe reproduces the same streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 output function.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// 64-bit FNV-1a hash of a stream label.
pub fn stream_tag(label: &str) -> u64 {
    let mut h: u64 = 0xCBF2_9CE4_8422_2325;
    for b in label.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    h
}

/// Seed of path `index` in the stream `tag` under `master`.
pub fn derive_seed(master: u64, index: u64, tag: u64) -> u64 {
    let base = mix64(master ^ mix64(tag.wrapping_add(GOLDEN)));
    mix64(base.wrapping_add(index.wrapping_add(1).wrapping_mul(GOLDEN)))
}

/// The generator used by every sampler in the crate.
pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivation_is_stable() {
        // Frozen values: changing them breaks reproducibility of stored runs.
        assert_eq!(mix64(0), 0);
        assert_eq!(stream_tag(""), 0xCBF2_9CE4_8422_2325);
        assert_eq!(derive_seed(0, 0, 0), derive_seed(0, 0, 0));
        assert_ne!(derive_seed(0, 0, 1), derive_seed(0, 1, 0));
        assert_ne!(derive_seed(1, 0, 0), derive_seed(0, 0, 0));
    }

    #[test]
    fn distinct_paths_get_distinct_seeds() {
        let tag = stream_tag("star");
        let mut seeds: Vec<u64> = (0..10_000).map(|i| derive_seed(7, i, tag)).collect();
        seeds.sort_unstable();
        seeds.dedup();
        assert_eq!(seeds.len(), 10_000);
    }
}
