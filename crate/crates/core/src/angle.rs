//! Angle arithmetic on the circle.
//!
//! All angles are plain `f64` radians. Two canonical representations are
//! used: the signed interval (−π, π] (closed at +π, so `wrap_pi(-PI) == PI`)
//! and the unsigned interval [0, 2π).

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Resultant lengths below this are treated as "no mean direction".
pub const RESULTANT_TOL: f64 = 1e-12;

/// Wraps an angle into (−π, π].
///
/// Values already inside the interval are returned unchanged, which makes the
/// map exactly idempotent. Non-finite input yields NaN; use [`try_wrap_pi`]
/// to get an error instead.
#[inline]
pub fn wrap_pi(theta: f64) -> f64 {
    if theta > -PI && theta <= PI {
        return theta;
    }
    let r = (theta + PI).rem_euclid(TAU) - PI;
    if r <= -PI {
        r + TAU
    } else {
        r
    }
}

pub fn try_wrap_pi(theta: f64) -> Result<f64> {
    if !theta.is_finite() {
        return Err(Error::invalid(format!("cannot wrap non-finite angle {theta}")));
    }
    Ok(wrap_pi(theta))
}

/// Wraps an angle into [0, 2π).
#[inline]
pub fn wrap_2pi(theta: f64) -> f64 {
    if (0.0..TAU).contains(&theta) {
        return theta;
    }
    let r = theta.rem_euclid(TAU);
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Signed circular difference `a - b` in (−π, π].
#[inline]
pub fn signed_diff(a: f64, b: f64) -> f64 {
    wrap_pi(a - b)
}

/// Cosine loss `1 - cos(a - b)`, in [0, 2].
#[inline]
pub fn cos_loss(a: f64, b: f64) -> f64 {
    1.0 - (a - b).cos()
}

/// Mean direction and mean resultant length of a sample of angles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircSummary {
    /// `None` when the resultant length is below [`RESULTANT_TOL`].
    pub mean_direction: Option<f64>,
    pub resultant_length: f64,
    pub n: usize,
}

impl CircSummary {
    pub fn is_defined(&self) -> bool {
        self.mean_direction.is_some()
    }
}

/// Sample mean direction `atan2(mean sin, mean cos)` and resultant length.
pub fn circ_mean(angles: &[f64]) -> Result<CircSummary> {
    if angles.is_empty() {
        return Err(Error::invalid("circular mean of an empty sample"));
    }
    let n = angles.len();
    let (s, c) = angles.iter().fold((0.0, 0.0), |(s, c), &a| {
        let (sa, ca) = a.sin_cos();
        (s + sa, c + ca)
    });
    let (s, c) = (s / n as f64, c / n as f64);
    let resultant_length = s.hypot(c).min(1.0);
    let mean_direction = (resultant_length >= RESULTANT_TOL).then(|| s.atan2(c));
    Ok(CircSummary {
        mean_direction,
        resultant_length,
        n,
    })
}
