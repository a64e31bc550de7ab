//! Deterministic seed derivation for Monte-Carlo sweeps.
//!
//! Every trajectory gets its own seed derived from the experiment's master
//! seed and a list of salts (cell index, run index, ...). Results are then
//! a pure function of the master seed regardless of how runs are scheduled
//! across workers.

/// SplitMix64 finalizer; a full-period mixing step over `u64`.
#[inline]
pub fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from `master` and an ordered list of salts.
pub fn derive_seed(master: u64, salts: &[u64]) -> u64 {
    let mut s = splitmix64(master);
    for &salt in salts {
        s = splitmix64(s ^ salt.wrapping_mul(0xA24B_AED4_963E_E407));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivation_is_stable_and_salted() {
        let a = derive_seed(42, &[1, 2]);
        let b = derive_seed(42, &[1, 2]);
        let c = derive_seed(42, &[2, 1]);
        let d = derive_seed(43, &[1, 2]);
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(a, d);
    }
}
