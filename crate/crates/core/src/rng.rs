//! Keyed random streams. A stream is identified by (master seed, domain,
//! stream id); streams never share state, so work split across threads draws
//! the same numbers as a sequential run.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub type Stream = ChaCha8Rng;

pub const DOMAIN_MLP: u64 = 1;
pub const DOMAIN_ORACLE: u64 = 2;
pub const DOMAIN_LIPSCHITZ: u64 = 3;
pub const DOMAIN_MAXNORM: u64 = 4;
pub const DOMAIN_POINTS: u64 = 5;
pub const DOMAIN_CHECKS: u64 = 6;

pub fn stream(seed: u64, domain: u64, id: u64) -> Stream {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&domain.to_le_bytes());
    key[16..].copy_from_slice(b"hjb stream key 1");
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(id);
    rng
}

/// Uniform on the open interval (0, 1): (k + ½)·2⁻⁵² for a 52-bit integer k,
/// exactly representable so neither endpoint can occur.
pub fn uniform_open(rng: &mut impl RngCore) -> f64 {
    let k = rng.next_u64() >> 12;
    (k as f64 + 0.5) * (1.0 / (1u64 << 52) as f64)
}

/// Uniform on [lo, hi].
pub fn uniform_in(rng: &mut impl RngCore, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * uniform_open(rng)
}

pub fn standard_normal(rng: &mut impl RngCore) -> f64 {
    rng.sample(StandardNormal)
}

/// SplitMix64 finalizer, used to fold identifiers into 64-bit stream ids.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
