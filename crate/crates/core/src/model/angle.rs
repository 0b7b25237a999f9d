//! Arithmetic on the angle manifold: period `4*pi` with `-2*pi` identified
//! with `2*pi`, so that `sin(delta / 2)` is single valued.

use std::f64::consts::PI;

use crate::error::{HglError, Result};

pub const ANGLE_PERIOD: f64 = 4.0 * PI;

/// Maps `theta` to its representative in `[-2*pi, 2*pi)`.
pub fn wrap_angle(theta: f64) -> Result<f64> {
    if !theta.is_finite() {
        return Err(HglError::InvalidArgument(format!(
            "cannot wrap non-finite angle {theta}"
        )));
    }
    Ok(wrap_unchecked(theta))
}

#[inline]
pub(crate) fn wrap_unchecked(theta: f64) -> f64 {
    let half = 0.5 * ANGLE_PERIOD;
    if (-half..half).contains(&theta) {
        return theta;
    }
    let mut w = (theta + half).rem_euclid(ANGLE_PERIOD) - half;
    // rem_euclid can round up to exactly the period
    if w >= half {
        w -= ANGLE_PERIOD;
    }
    if w < -half {
        w = -half;
    }
    w
}

/// Geodesic distance between two angles on the manifold, in `[0, 2*pi]`.
pub fn angle_distance(a: f64, b: f64) -> f64 {
    wrap_unchecked(a - b).abs()
}

/// Unit phasor `r(delta) = (cos delta, sin delta)`.
#[inline]
pub fn phasor(delta: f64) -> [f64; 2] {
    let (s, c) = delta.sin_cos();
    [c, s]
}
