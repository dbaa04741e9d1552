//! von Mises distribution: density, moments and exact sampling.

use std::f64::consts::{PI, TAU};

use rand::Rng;

use crate::angle::wrap_pi;
use crate::error::{Error, Result};
use crate::special::{bessel_i_scaled, bessel_ratio};

/// Below this concentration draws are taken from the uniform distribution.
const UNIFORM_KAPPA: f64 = 1e-8;

pub fn density(theta: f64, mu: f64, kappa: f64) -> f64 {
    (kappa * ((theta - mu).cos() - 1.0)).exp() / (TAU * bessel_i_scaled(0, kappa))
}

/// `(ℓ, σ₁²) = (E cos ε, Var sin ε)` for ε ~ vM(0, κ).
pub fn moments(kappa: f64) -> Result<(f64, f64)> {
    if !(kappa > 0.0 && kappa.is_finite()) {
        return Err(Error::invalid(format!(
            "concentration must be positive, got {kappa}"
        )));
    }
    Ok((bessel_ratio(1, kappa), 0.5 * (1.0 - bessel_ratio(2, kappa))))
}

/// One draw from vM(mu, kappa) in (−π, π], Best–Fisher rejection sampler.
pub fn sample<R: Rng + ?Sized>(rng: &mut R, mu: f64, kappa: f64) -> f64 {
    if kappa < UNIFORM_KAPPA {
        return wrap_pi(mu + rng.random_range(-PI..PI));
    }
    let tau = 1.0 + (1.0 + 4.0 * kappa * kappa).sqrt();
    let rho = (tau - (2.0 * tau).sqrt()) / (2.0 * kappa);
    let r = (1.0 + rho * rho) / (2.0 * rho);
    loop {
        let u1: f64 = rng.random();
        let u2: f64 = rng.random();
        let z = (PI * u1).cos();
        let f = (1.0 + r * z) / (r + z);
        let c = kappa * (r - f);
        if c * (2.0 - c) - u2 > 0.0 || (c / u2).ln() + 1.0 - c >= 0.0 {
            let u3: f64 = rng.random();
            let theta = f.clamp(-1.0, 1.0).acos();
            return wrap_pi(mu + if u3 > 0.5 { theta } else { -theta });
        }
    }
}
