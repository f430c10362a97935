//! Deterministic seed derivation.
//!
//! Every random stream in the crate is a `ChaCha12` generator seeded through
//! this module. The splitting rule is documented and stable: a child seed is
//! `splitmix64(parent ⊕ fnv1a64(label))`, where `label` is a human-readable
//! path such as `"toric/state/3"`. Labels make streams independent of the
//! order in which they are drawn, so adding a consumer never perturbs the
//! others.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// FNV-1a 64-bit hash of a label.
fn fnv1a64(label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// SplitMix64 finalizer; decorrelates structurally similar inputs.
fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a child seed from a parent seed and a label.
pub fn child_seed(parent: u64, label: &str) -> u64 {
    splitmix64(parent ^ fnv1a64(label))
}

/// Seeded generator for the stream named by `label` under `parent`.
pub fn stream(parent: u64, label: &str) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(child_seed(parent, label))
}
