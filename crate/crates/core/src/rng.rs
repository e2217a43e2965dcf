//! Per-trial seed derivation.
//!
//! Every Monte Carlo trial gets its own 64-bit seed computed from the master
//! seed and the trial coordinates, so results never depend on which worker ran
//! which trial. The seed then keys a ChaCha8 stream inside the sampler.

#[inline]
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Folds `keys` into `master` one word at a time.
pub fn derive_seed(master: u64, keys: &[u64]) -> u64 {
    keys.iter().fold(splitmix64(master), |acc, &k| splitmix64(acc ^ splitmix64(k)))
}

/// Seed of trial `index` of the point `(d, L, p)` in a campaign.
pub fn trial_seed(master: u64, d: u32, l: usize, p: f64, index: u64) -> u64 {
    derive_seed(master, &[d as u64, l as u64, p.to_bits(), index])
}
