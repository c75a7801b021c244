//! Seed derivation. Every random stream in the crate is keyed by a stable
//! tag and integer coordinates rather than by loop position, so results do
//! not depend on enumeration order or worker scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    h
}

/// Derive a child seed from `base`, a string tag and integer coordinates.
pub fn derive(base: u64, tag: &str, parts: &[u64]) -> u64 {
    let mut h = splitmix64(base ^ fnv1a(tag.as_bytes()));
    for &p in parts {
        h = splitmix64(h ^ p);
    }
    h
}

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derive_is_stable_and_sensitive() {
        assert_eq!(derive(7, "x", &[1, 2]), derive(7, "x", &[1, 2]));
        assert_ne!(derive(7, "x", &[1, 2]), derive(7, "x", &[2, 1]));
        assert_ne!(derive(7, "x", &[1]), derive(7, "y", &[1]));
        assert_ne!(derive(7, "x", &[1]), derive(8, "x", &[1]));
    }
}
