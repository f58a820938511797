//! Seed derivation for reproducible random streams.
//!
//! All randomness in a run flows from a single 64-bit seed through named
//! sub-streams (`"init"`, `"kernel"`, `"resample"`, `"gt"`, `"metrics"`, ...).
//! Per-particle streams are derived once and owned by their ensemble slot, so
//! results never depend on thread count or scheduling order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// One standard-normal draw.
pub fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mix a master seed, a stream label, and an index into a fresh generator.
pub fn derive_rng(seed: u64, stream: &str, index: u64) -> ChaCha8Rng {
    let mut h = seed;
    for &b in stream.as_bytes() {
        h = splitmix64(h ^ u64::from(b));
    }
    h = splitmix64(h ^ index);
    let mut key = [0u8; 32];
    let mut s = h;
    for chunk in key.chunks_exact_mut(8) {
        s = splitmix64(s);
        chunk.copy_from_slice(&s.to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

/// Derive a bare 64-bit sub-seed (for nesting, e.g. per-trial seeds).
pub fn derive_seed(seed: u64, stream: &str, index: u64) -> u64 {
    let mut h = seed;
    for &b in stream.as_bytes() {
        h = splitmix64(h ^ u64::from(b));
    }
    splitmix64(h ^ index)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let mut a = derive_rng(7, "kernel", 3);
        let mut b = derive_rng(7, "kernel", 3);
        assert_eq!(a.random::<u64>(), b.random::<u64>());

        let mut c = derive_rng(7, "kernel", 4);
        let mut d = derive_rng(7, "resample", 3);
        let x = derive_rng(7, "kernel", 3).random::<u64>();
        assert_ne!(x, c.random::<u64>());
        assert_ne!(x, d.random::<u64>());
    }
}
