//! Counter-based randomness.
//!
//! Every draw is a pure function of integer keys (seed, combo, request,
//! stream), so results never depend on execution order or worker count.

use crate::math;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Hashes a sequence of keys into one 64-bit value.
pub fn hash_keys(keys: &[u64]) -> u64 {
    keys.iter().fold(0x6A09_E667_F3BC_C909, |acc, &k| mix64(acc ^ mix64(k)))
}

/// Uniform in `[0, 1)` from the top 53 bits.
#[inline]
pub fn to_unit(h: u64) -> f64 {
    (h >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

pub fn uniform(keys: &[u64]) -> f64 {
    to_unit(hash_keys(keys))
}

/// Uniform integer in `0..n`.
pub fn below(keys: &[u64], n: usize) -> usize {
    debug_assert!(n > 0);
    ((hash_keys(keys) as u128 * n as u128) >> 64) as usize
}

/// Standard normal via Box-Muller over two keyed uniforms.
pub fn standard_normal(keys: &[u64]) -> f64 {
    let h = hash_keys(keys);
    let u1 = 1.0 - to_unit(mix64(h ^ 0x01));
    let u2 = to_unit(mix64(h ^ 0x02));
    math::sqrt(-2.0 * math::ln(u1)) * math::cos(2.0 * core::f64::consts::PI * u2)
}

/// Randomly shifted Kronecker sequence: point `index` of the sequence
/// `frac(shift + index * alpha)`, with the shift drawn from `keys`.
///
/// Over consecutive indices the points fill `[0, 1)` far more evenly than
/// independent draws, which keeps simulated rates close to their targets.
pub fn shifted_kronecker(keys: &[u64], index: u64, alpha: f64) -> f64 {
    let shift = uniform(keys);
    math::fract(shift + (index as f64) * alpha)
}

/// Irrational step sizes with good one-dimensional discrepancy.
pub const ALPHA_GOLDEN: f64 = 0.618_033_988_749_894_8;
pub const ALPHA_SILVER: f64 = 0.414_213_562_373_095_03;
pub const ALPHA_BRONZE: f64 = 0.302_775_637_731_994_6;
