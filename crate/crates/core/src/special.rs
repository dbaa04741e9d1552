//! Modified Bessel functions of the first kind, integer order.
//!
//! Power series below [`SERIES_CUTOFF`], Hankel asymptotic expansion above.
//! Both branches are computed in exponentially scaled form `e^{-x} I_ν(x)`
//! so that ratios stay finite for large arguments.

use std::f64::consts::PI;

pub const SERIES_CUTOFF: f64 = 50.0;

const SERIES_MAX_TERMS: usize = 500;
const ASYMPTOTIC_MAX_TERMS: usize = 60;

/// `e^{-x} I_ν(x)` for `x >= 0`.
pub fn bessel_i_scaled(nu: u32, x: f64) -> f64 {
    assert!(x >= 0.0, "bessel_i_scaled requires x >= 0, got {x}");
    if x <= SERIES_CUTOFF {
        series(nu, x) * (-x).exp()
    } else {
        asymptotic_scaled(nu, x)
    }
}

/// `I_ν(x)`; overflows to infinity for `x` beyond roughly 700.
pub fn bessel_i(nu: u32, x: f64) -> f64 {
    if x <= SERIES_CUTOFF {
        series(nu, x.abs())
    } else {
        asymptotic_scaled(nu, x) * x.exp()
    }
}

/// `I_ν(x) / I_0(x)`.
pub fn bessel_ratio(nu: u32, x: f64) -> f64 {
    if x == 0.0 {
        return if nu == 0 { 1.0 } else { 0.0 };
    }
    bessel_i_scaled(nu, x) / bessel_i_scaled(0, x)
}

fn series(nu: u32, x: f64) -> f64 {
    let half = 0.5 * x;
    let q = half * half;
    // leading term (x/2)^ν / ν!
    let mut term = (1..=nu).fold(1.0, |t, j| t * half / j as f64);
    let mut sum = term;
    for k in 1..SERIES_MAX_TERMS {
        term *= q / (k as f64 * (k as f64 + nu as f64));
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

fn asymptotic_scaled(nu: u32, x: f64) -> f64 {
    let mu = 4.0 * (nu as f64).powi(2);
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..ASYMPTOTIC_MAX_TERMS {
        let odd = (2 * k - 1) as f64;
        let next = -term * (mu - odd * odd) / (k as f64 * 8.0 * x);
        if next.abs() >= term.abs() {
            break;
        }
        term = next;
        sum += term;
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    sum / (2.0 * PI * x).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    // Reference values from Abramowitz & Stegun table 9.8 / standard tables.
    #[test]
    fn known_values() {
        assert_relative_eq!(bessel_i(0, 0.0), 1.0);
        assert_relative_eq!(bessel_i(1, 0.0), 0.0);
        assert_relative_eq!(bessel_i(0, 1.0), 1.266_065_877_752_008_4, max_relative = 1e-14);
        assert_relative_eq!(bessel_i(1, 1.0), 0.565_159_103_992_485_0, max_relative = 1e-14);
        assert_relative_eq!(bessel_i(2, 1.0), 0.135_747_669_767_038_3, max_relative = 1e-13);
        assert_relative_eq!(bessel_i(0, 3.0), 4.880_792_585_865_024, max_relative = 1e-14);
        assert_relative_eq!(bessel_i(1, 3.0), 3.953_370_217_402_609, max_relative = 1e-14);
        assert_relative_eq!(bessel_i(0, 10.0), 2_815.716_628_466_254, max_relative = 1e-13);
    }

    /// Quadrature oracle: I_ν(x) = (1/π) ∫_0^π e^{x cos t} cos(νt) dt.
    fn quad_scaled(nu: u32, x: f64) -> f64 {
        let m = 20_000;
        let h = PI / m as f64;
        let f = |t: f64| (x * (t.cos() - 1.0)).exp() * (nu as f64 * t).cos();
        let mut s = f(0.0) + f(PI);
        for i in 1..m {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * f(i as f64 * h);
        }
        s * h / 3.0 / PI
    }

    #[test]
    fn series_and_asymptotic_agree_with_quadrature() {
        for &x in &[0.01, 0.5, 2.0, 3.0, 10.0, 30.0, 49.0, 51.0, 80.0, 200.0] {
            for nu in 0..=2 {
                let q = quad_scaled(nu, x);
                assert_relative_eq!(bessel_i_scaled(nu, x), q, epsilon = 1e-14, max_relative = 1e-10);
            }
        }
    }

    #[test]
    fn branches_continuous_at_cutoff() {
        for nu in 0..=2 {
            let below = series(nu, SERIES_CUTOFF) * (-SERIES_CUTOFF).exp();
            let above = asymptotic_scaled(nu, SERIES_CUTOFF);
            assert_relative_eq!(below, above, max_relative = 1e-12);
        }
    }

    #[test]
    fn ratio_limits() {
        assert!(bessel_ratio(1, 1e-6) < 1e-6);
        assert_relative_eq!(bessel_ratio(1, 1e6), 1.0, max_relative = 1e-6);
        assert_eq!(bessel_ratio(0, 0.0), 1.0);
    }
}
