use std::fmt;

use crate::error::{Error, Result};
use crate::rng::mix64;

/// A node label θ in the multilevel index tree: a sequence of (l, i) pairs
/// below the root. Labels with l < 0 or i < 0 only name random streams.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct IndexPath(Vec<(i64, i64)>);

impl IndexPath {
    pub fn root() -> Self {
        Self(Vec::new())
    }

    pub fn child(&self, l: i64, i: i64) -> Self {
        let mut v = self.0.clone();
        v.push((l, i));
        Self(v)
    }

    pub fn entries(&self) -> &[(i64, i64)] {
        &self.0
    }

    /// Stable 64-bit hash, independent of platform and process.
    pub fn hash64(&self) -> u64 {
        let mut h = mix64(self.0.len() as u64 ^ 0x6a09_e667_f3bc_c909);
        for &(l, i) in &self.0 {
            h = mix64(h ^ l as u64);
            h = mix64(h ^ i as u64);
        }
        h
    }
}

impl fmt::Display for IndexPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "0")?;
        for (l, i) in &self.0 {
            write!(f, ",({l},{i})")?;
        }
        Ok(())
    }
}

/// #Θ^N_N from #Θ₀ = 1 and #Θ_k = #Θ_{k−1}·(1 + (2k−1)(2M^k + 1)).
pub fn count_indices(n: u32, m: u64) -> Result<u128> {
    let overflow = || Error::InvalidParameter(format!("index count overflows for N={n}, M={m}"));
    let mut count: u128 = 1;
    for k in 1..=n {
        let mk = (m as u128).checked_pow(k).ok_or_else(overflow)?;
        let factor = mk
            .checked_mul(2)
            .and_then(|v| v.checked_add(1))
            .and_then(|v| v.checked_mul(2 * k as u128 - 1))
            .and_then(|v| v.checked_add(1))
            .ok_or_else(overflow)?;
        count = count.checked_mul(factor).ok_or_else(overflow)?;
    }
    Ok(count)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_counts() {
        assert_eq!(count_indices(0, 3).unwrap(), 1);
        assert_eq!(count_indices(1, 1).unwrap(), 4);
        assert_eq!(count_indices(2, 2).unwrap(), 168);
        assert!(count_indices(40, 1 << 40).is_err());
    }

    #[test]
    fn hashes_distinguish_paths() {
        let a = IndexPath::root().child(1, 2);
        let b = IndexPath::root().child(2, 1);
        let c = IndexPath::root().child(1, 2).child(0, -1);
        assert_ne!(a.hash64(), b.hash64());
        assert_ne!(a.hash64(), c.hash64());
        assert_eq!(a.hash64(), IndexPath::root().child(1, 2).hash64());
        assert_eq!(c.to_string(), "0,(1,2),(0,-1)");
    }
}
