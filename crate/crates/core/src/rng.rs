//! Counter-based random number generation for reproducible Monte Carlo.
//!
//! Every variate is a pure function of `(seed, draw, index)`, so parallel
//! sampling is reproducible no matter how draws are scheduled across
//! threads. The mixer is the SplitMix64 finalizer (non-cryptographic).

use std::f64::consts::PI;

const GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Cell key for the (seed, draw, index) counter triple.
#[inline]
fn cell_key(seed: u64, draw: u64, index: u64) -> u64 {
    let mut h = mix64(seed ^ GAMMA);
    h = mix64(h ^ draw.wrapping_mul(GAMMA).wrapping_add(1));
    mix64(h ^ index.wrapping_mul(0xC2B2_AE3D_27D4_EB4F).wrapping_add(2))
}

/// Uniform in the open interval (0, 1) with 53-bit resolution.
#[inline]
fn to_open_unit(bits: u64) -> f64 {
    ((bits >> 11) as f64 + 0.5) / (1u64 << 53) as f64
}

/// Standard normal variate for counter cell `(seed, draw, index)`.
///
/// Box-Muller on two decorrelated uniforms derived from the cell key.
pub fn standard_normal(seed: u64, draw: u64, index: u64) -> f64 {
    let key = cell_key(seed, draw, index);
    let u1 = to_open_unit(mix64(key ^ 0xA5A5_A5A5_A5A5_A5A5));
    let u2 = to_open_unit(mix64(key.wrapping_add(GAMMA)));
    (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
}

/// Vector of i.i.d. standard normals, one per mode index.
pub fn standard_normal_vector(seed: u64, draw: u64, len: usize) -> Vec<f64> {
    (0..len)
        .map(|i| standard_normal(seed, draw, i as u64))
        .collect()
}
