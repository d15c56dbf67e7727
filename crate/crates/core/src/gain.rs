//! Directional antenna gain pattern and its smooth surrogate.
//!
//! The exact pattern is `G0 * t^(2p)` on the forward hemisphere (`t > 0`)
//! and zero behind, where `t` is the cosine between boresight and look
//! direction and `G0 = 2(2p + 1)` normalizes the radiated power to match an
//! isotropic element. The hard cutoff at `t = 0` has no useful gradient, so
//! the optimizer works with a softplus-smoothed version that approaches the
//! exact pattern as the sharpness parameter grows.

use crate::params::peak_gain;
use crate::vec3::Vec3;

/// Numerically stable `ln(1 + e^x)`.
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Numerically stable logistic function.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn check_inputs(boresight: Vec3, direction: Vec3) {
    debug_assert!(direction.is_unit(1e-9), "look direction must be unit length");
    // Boresights may sit anywhere inside the closed unit ball while the
    // optimizer iterates; only the final configuration is normalized.
    debug_assert!(
        boresight.norm() <= 1.0 + 1e-9,
        "boresight must lie in the unit ball, norm = {}",
        boresight.norm()
    );
}

/// Exact pattern gain for a boresight `f` and unit look direction.
pub fn directional_gain(boresight: Vec3, direction: Vec3, directivity: u32) -> f64 {
    check_inputs(boresight, direction);
    let t = boresight.dot(direction);
    if t > 0.0 {
        peak_gain(directivity) * t.powi(2 * directivity as i32)
    } else {
        0.0
    }
}

/// Softplus-smoothed pattern gain. Strictly positive everywhere, which keeps
/// gradients alive on the back hemisphere.
pub fn smoothed_gain(boresight: Vec3, direction: Vec3, directivity: u32, smoothness: f64) -> f64 {
    check_inputs(boresight, direction);
    debug_assert!(smoothness > 0.0);
    let t = boresight.dot(direction);
    let s = softplus(smoothness * t) / smoothness;
    peak_gain(directivity) * s.powi(2 * directivity as i32)
}

/// Gradient of `smoothed_gain` with respect to the boresight vector.
pub fn smoothed_gain_grad(boresight: Vec3, direction: Vec3, directivity: u32, smoothness: f64) -> Vec3 {
    check_inputs(boresight, direction);
    debug_assert!(smoothness > 0.0);
    if directivity == 0 {
        // Constant pattern: the smoothed gain is G0 * (softplus/m)^0 = G0.
        return Vec3::ZERO;
    }
    let t = boresight.dot(direction);
    let s = softplus(smoothness * t) / smoothness;
    let scale = 2.0
        * f64::from(directivity)
        * peak_gain(directivity)
        * s.powi(2 * directivity as i32 - 1)
        * sigmoid(smoothness * t);
    direction * scale
}
