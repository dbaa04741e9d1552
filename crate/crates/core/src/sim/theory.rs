//! Leading-order bias and variance of the local-constant fit under a uniform
//! design with von Mises noise and a Gaussian kernel.

use serde::{Deserialize, Serialize};

use super::dgp::{DgpSpec, LEVELS};
use crate::error::{Error, Result};
use crate::kernels::{Bandwidths, CategoricalKernel, ContinuousKernel};
use crate::vonmises;

/// Central-difference step for derivatives of the regression function.
pub const FD_STEP: f64 = 1e-4;

/// `(ℓ, σ₁²) = (I₁/I₀, (1 - I₂/I₀)/2)` at κ.
pub fn vm_moments(kappa: f64) -> Result<(f64, f64)> {
    vonmises::moments(kappa)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticApprox {
    pub bias: f64,
    /// `μ₂ h² m''/2`; the design-gradient term vanishes for a uniform design.
    pub continuous_bias: f64,
    /// Cross-level term from categorical smoothing.
    pub categorical_bias: f64,
    pub variance: f64,
}

/// Leading terms at `(x, z)` for an arbitrary regression function `m` over
/// `levels` equiprobable levels, X ~ U(0, 1) and vM(0, κ) noise.
#[allow(clippy::too_many_arguments)]
pub fn leading_terms(
    m: impl Fn(f64, u32) -> f64,
    levels: usize,
    kappa: f64,
    n: usize,
    x: f64,
    z: u32,
    h: f64,
    lambda: f64,
) -> Result<AsymptoticApprox> {
    if levels < 2 || z as usize >= levels {
        return Err(Error::invalid(format!(
            "level {z} out of range for {levels} levels"
        )));
    }
    if !(h > 0.0) || !(0.0..=1.0).contains(&lambda) || n == 0 {
        return Err(Error::invalid(
            "bandwidths must satisfy h > 0 and 0 <= lambda <= 1",
        ));
    }
    if !(x >= 2.0 * h && x <= 1.0 - 2.0 * h) {
        return Err(Error::invalid(format!(
            "x = {x} is not interior for h = {h} (need 2h <= x <= 1 - 2h)"
        )));
    }
    let (ell, sigma1_sq) = vm_moments(kappa)?;
    let kernel = ContinuousKernel::Gaussian;
    let d2 = (m(x + FD_STEP, z) - 2.0 * m(x, z) + m(x - FD_STEP, z)) / (FD_STEP * FD_STEP);
    let continuous_bias = kernel.mu2() * h * h * 0.5 * d2;
    let borrow = CategoricalKernel::AitchisonAitken.borrowing_coefficient(lambda, levels);
    let categorical_bias = borrow
        * (0..levels as u32)
            .filter(|&v| v != z)
            .map(|v| (m(x, v) - m(x, z)).sin())
            .sum::<f64>();
    let density = 1.0 / levels as f64;
    let variance = kernel.roughness() * sigma1_sq / (n as f64 * h * ell * ell * density);
    Ok(AsymptoticApprox {
        bias: continuous_bias + categorical_bias,
        continuous_bias,
        categorical_bias,
        variance,
    })
}

/// Leading terms for a simulation design at `(x, z)`.
pub fn asymptotic_approx(spec: &DgpSpec, x: f64, z: u32, bw: &Bandwidths) -> Result<AsymptoticApprox> {
    if bw.h.len() != 1 || bw.lambda.len() != 1 {
        return Err(Error::invalid(
            "the simulation design has one covariate of each kind",
        ));
    }
    let regression = spec.regression;
    leading_terms(
        |x, z| regression.eval(x, z),
        LEVELS,
        spec.kappa,
        spec.n,
        x,
        z,
        bw.h[0],
        bw.lambda[0],
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::dgp::Regression;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    #[test]
    fn moments_oracle() {
        // Quadrature of cos ε and sin² ε against the vM(0, 3) density (mpmath).
        let (ell, s2) = vm_moments(3.0).unwrap();
        assert_abs_diff_eq!(ell, 0.809985293956504527, epsilon = 1e-12);
        assert_abs_diff_eq!(s2, 0.269995097985501509, epsilon = 1e-12);
    }

    #[test]
    fn constant_regression_has_no_bias() {
        let a = leading_terms(|_, _| 1.3, 3, 3.0, 400, 0.5, 1, 0.1, 0.3).unwrap();
        assert_abs_diff_eq!(a.bias, 0.0, epsilon = 1e-9);
        let (ell, s2) = vm_moments(3.0).unwrap();
        let rk = 1.0 / (2.0 * PI.sqrt());
        assert_abs_diff_eq!(
            a.variance,
            rk * s2 / (400.0 * 0.1 * ell * ell / 3.0),
            epsilon = 1e-15
        );
    }

    #[test]
    fn r1_constant_level() {
        let spec = DgpSpec::new(Regression::R1, 3.0, 200).unwrap();
        let bw = Bandwidths::new(vec![0.1], vec![0.2]).unwrap();
        let x = 0.3;
        let a = asymptotic_approx(&spec, x, 2, &bw).unwrap();
        assert_abs_diff_eq!(a.continuous_bias, 0.0, epsilon = 1e-7);
        let want = 0.1 * ((2.0 * PI * x - PI).sin() + (2.0 * PI * (1.0 - x) - PI).sin());
        assert_abs_diff_eq!(a.categorical_bias, want, epsilon = 1e-12);
    }

    #[test]
    fn r2_hand_values() {
        let spec = DgpSpec::new(Regression::R2, 3.0, 500).unwrap();
        let bw = Bandwidths::new(vec![0.1], vec![0.05]).unwrap();
        let a = asymptotic_approx(&spec, 0.5, 0, &bw).unwrap();
        assert_abs_diff_eq!(a.continuous_bias, 0.01 * PI, epsilon = 1e-7);
        assert_abs_diff_eq!(a.categorical_bias, 0.025 * (1.0 - 0.5f64.sqrt()), epsilon = 1e-12);
        assert!(asymptotic_approx(&spec, 0.15, 0, &bw).is_err());
    }
}
