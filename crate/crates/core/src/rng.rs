//! Counter-based randomness.
//!
//! Every random bit used by the lattice webs is a pure function of
//! `(seed, domain, x, t)`, so fields can be queried at any site in O(1)
//! without storing them, and replicas split trivially across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Hash of a seed and a sequence of words. Each word is folded in with a
/// full mixing round so nearby inputs decorrelate.
#[inline]
pub fn hash_words(seed: u64, words: &[u64]) -> u64 {
    let mut h = mix64(seed);
    for &w in words {
        h = mix64(h ^ w);
    }
    h
}

/// Domain tags keep independent streams derived from one seed apart.
pub mod domain {
    pub const ARROW: u64 = 0x4152_524F_5753_0001;
    pub const NOISE: u64 = 0x4E4F_4953_4500_0002;
    pub const REPLICA: u64 = 0x5245_504C_0000_0003;
    pub const POINTS: u64 = 0x504F_494E_5453_0004;
}

/// Seed for replica `r` of an experiment run under `seed`.
#[inline]
pub fn replica_seed(seed: u64, r: u64) -> u64 {
    hash_words(seed, &[domain::REPLICA, r])
}

/// Independent sequential generator for replica `r`.
pub fn replica_rng(seed: u64, r: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(replica_seed(seed, r))
}

/// A fair ±1 sign at lattice coordinates `(x, t)` in stream `domain`.
#[inline]
pub fn site_sign(seed: u64, domain: u64, x: i64, t: i64) -> i8 {
    if hash_words(seed, &[domain, x as u64, t as u64]) >> 63 == 1 {
        1
    } else {
        -1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn site_sign_is_balanced() {
        let n = 200_000i64;
        let s: i64 = (0..n).map(|i| site_sign(11, domain::ARROW, i, -i) as i64).sum();
        assert!((s as f64).abs() < 4.0 * (n as f64).sqrt());
    }

    #[test]
    fn streams_are_distinct() {
        let a: Vec<i8> = (0..64).map(|i| site_sign(3, domain::ARROW, i, 0)).collect();
        let b: Vec<i8> = (0..64).map(|i| site_sign(3, domain::NOISE, i, 0)).collect();
        assert_ne!(a, b);
    }
}
