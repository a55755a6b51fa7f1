//! Deterministic seed derivation.
//!
//! All randomness flows from a single `u64` base seed through the splitmix64
//! finalizer, so ensembles reproduce bit-identically regardless of worker
//! count or execution order. Substreams are labeled with small integers.

/// splitmix64 finalizer (Steele, Lea & Flood 2014); a bijective mixer.
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
    x ^ (x >> 31)
}

/// Seed for trial `index` of an ensemble with the given base seed.
pub fn trial_seed(base_seed: u64, index: u64) -> u64 {
    splitmix64(base_seed ^ splitmix64(index.wrapping_add(1)))
}

/// Labeled substream of a parent seed (state draw, screen draw, noise, ...).
pub fn substream(parent_seed: u64, label: u64) -> u64 {
    splitmix64(parent_seed ^ splitmix64(label.wrapping_mul(2).wrapping_add(1)))
}

/// Substream labels used by the trial runner.
pub mod label {
    pub const STATE: u64 = 0x10;
    pub const SCREEN: u64 = 0x20;
    pub const NOISE: u64 = 0x30;
}
