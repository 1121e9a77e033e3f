//! Deterministic seed derivation.
//!
//! Every source of randomness in the crate is a ChaCha stream seeded
//! through [`derive_seed`], so any run is reproducible from one root
//! seed regardless of evaluation order or thread count.

/// SplitMix64 finalizer; a cheap, well-mixed u64 -> u64 permutation step.
pub fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from a base seed and a path of indices.
///
/// Distinct paths give independent-looking streams; the same path always
/// gives the same seed.
pub fn derive_seed(base: u64, path: &[u64]) -> u64 {
    let mut h = splitmix64(base);
    for &p in path {
        h = splitmix64(h ^ splitmix64(p));
    }
    h
}
