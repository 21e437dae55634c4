//! Seeded random streams.
//!
//! Every source of randomness is derived from a single run seed plus a named
//! substream, so adding a new consumer never perturbs existing ones.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Well-known substream names.
pub mod streams {
    pub const DATA: &str = "data";
    pub const NOISE: &str = "noise";
    pub const SPLIT: &str = "split";
    pub const INIT: &str = "init";
    pub const MASK: &str = "mask";
    pub const SHUFFLE: &str = "shuffle";
    pub const DISCRIMINATOR: &str = "discriminator";
    pub const POOL: &str = "pool";
}

fn fnv1a(label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive a child seed from `(seed, label, index)`.
pub fn derive_seed(seed: u64, label: &str, index: u64) -> u64 {
    splitmix(seed ^ splitmix(fnv1a(label) ^ splitmix(index)))
}

/// Generator for the named substream `label` at position `index`.
pub fn stream(seed: u64, label: &str, index: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(derive_seed(seed, label, index));
    rng
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng as _;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: Vec<u64> = (0..4).map(|_| stream(7, "data", 0).random()).collect();
        assert!(a.windows(2).all(|w| w[0] == w[1]));
        let b: u64 = stream(7, "noise", 0).random();
        let c: u64 = stream(7, "data", 1).random();
        assert_ne!(a[0], b);
        assert_ne!(a[0], c);
    }
}
