//! Synthetic designs: X ~ U(0, 1), Z uniform on {A, B, C}, von Mises noise.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::angle::wrap_2pi;
use crate::error::{Error, Result};
use crate::rng::replicate_rng;
use crate::sample::MixedSample;
use crate::vonmises;

pub const LEVELS: usize = 3;
pub const LEVEL_NAMES: [&str; LEVELS] = ["A", "B", "C"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regression {
    /// Two opposite full turns and a constant level.
    R1,
    /// Quadratic turns and a bump.
    R2,
}

impl Regression {
    /// Exact regression value (not wrapped) at `x` for level `z` (0 = A).
    pub fn eval(self, x: f64, z: u32) -> f64 {
        match (self, z) {
            (Regression::R1, 0) => 2.0 * PI * x,
            (Regression::R1, 1) => 2.0 * PI * (1.0 - x),
            (Regression::R1, _) => PI,
            (Regression::R2, 0) => PI * x * x,
            (Regression::R2, 1) => PI * (1.0 - x * x),
            (Regression::R2, _) => 1.5 * PI * (PI * x).sin().abs(),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Regression::R1 => "r1",
            Regression::R2 => "r2",
        }
    }
}

impl std::str::FromStr for Regression {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "r1" => Ok(Regression::R1),
            "r2" => Ok(Regression::R2),
            other => Err(Error::invalid(format!(
                "unknown regression '{other}' (expected r1 or r2)"
            ))),
        }
    }
}

pub fn true_regression(id: Regression, x: f64, z: u32) -> f64 {
    id.eval(x, z)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DgpSpec {
    pub regression: Regression,
    pub kappa: f64,
    pub n: usize,
}

impl DgpSpec {
    pub fn new(regression: Regression, kappa: f64, n: usize) -> Result<Self> {
        if !(kappa > 0.0 && kappa.is_finite()) {
            return Err(Error::invalid(format!(
                "concentration must be positive, got {kappa}"
            )));
        }
        if n < 2 {
            return Err(Error::invalid("a synthetic sample needs at least two rows"));
        }
        Ok(Self { regression, kappa, n })
    }

    /// Draws a sample from `rng`: per row X, then Z, then the noise.
    pub fn sample_with<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<MixedSample> {
        let mut x = Vec::with_capacity(self.n);
        let mut z = Vec::with_capacity(self.n);
        let mut theta = Vec::with_capacity(self.n);
        for _ in 0..self.n {
            let xi: f64 = rng.random();
            let zi = rng.random_range(0..LEVELS as u32);
            let eps = vonmises::sample(rng, 0.0, self.kappa);
            x.push(xi);
            z.push(zi);
            theta.push(wrap_2pi(self.regression.eval(xi, zi) + eps));
        }
        MixedSample::univariate(&x, &z, LEVELS, &theta)?
            .with_level_names(vec![LEVEL_NAMES.iter().map(|s| s.to_string()).collect()])
    }

    /// True regression values at the sample's design points.
    pub fn truth_at(&self, sample: &MixedSample) -> Vec<f64> {
        (0..sample.n())
            .map(|i| self.regression.eval(sample.x_row(i)[0], sample.z_row(i)[0]))
            .collect()
    }
}

/// Reproducible sample from stream 0 of `seed`.
pub fn sample_dgp(spec: &DgpSpec, seed: u64) -> Result<MixedSample> {
    spec.sample_with(&mut replicate_rng(seed, 0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::angle::{circ_mean, wrap_pi};
    use approx::assert_abs_diff_eq;

    #[test]
    fn regression_values() {
        assert_abs_diff_eq!(true_regression(Regression::R1, 0.25, 0), PI / 2.0);
        for x in [0.0, 0.3, 0.9] {
            assert_eq!(true_regression(Regression::R1, x, 2), PI);
        }
        assert_abs_diff_eq!(true_regression(Regression::R2, 0.5, 2), 1.5 * PI);
        assert_abs_diff_eq!(true_regression(Regression::R2, 0.5, 0), PI / 4.0);
        assert_abs_diff_eq!(true_regression(Regression::R2, 0.5, 1), 0.75 * PI);
        assert_eq!("R2".parse::<Regression>().unwrap(), Regression::R2);
        assert!("r3".parse::<Regression>().is_err());
    }

    #[test]
    fn seeded_and_concentrated() {
        let spec = DgpSpec::new(Regression::R2, 1e6, 200).unwrap();
        let a = sample_dgp(&spec, 11).unwrap();
        assert_eq!(a, sample_dgp(&spec, 11).unwrap());
        assert_ne!(a, sample_dgp(&spec, 12).unwrap());
        let truth = spec.truth_at(&a);
        assert!(a
            .theta()
            .iter()
            .zip(&truth)
            .all(|(t, m)| wrap_pi(t - m).abs() < 0.01));
        assert_eq!(a.level_name(0, 2), "C");
        assert!(DgpSpec::new(Regression::R1, 0.0, 10).is_err());
    }

    #[test]
    fn noise_matches_von_mises_moments() {
        let spec = DgpSpec::new(Regression::R1, 3.0, 100_000).unwrap();
        let s = sample_dgp(&spec, 3).unwrap();
        let eps: Vec<f64> = s
            .theta()
            .iter()
            .zip(spec.truth_at(&s))
            .map(|(t, m)| t - m)
            .collect();
        // I₁(3)/I₀(3), 30-digit series (mpmath).
        let a1 = 0.809985293956504527;
        let cv = 1.0 - circ_mean(&eps).unwrap().resultant_length;
        assert!((cv - (1.0 - a1)).abs() < 0.01);
        let cos: Vec<f64> = eps.iter().map(|e| e.cos()).collect();
        let m = cos.iter().sum::<f64>() / cos.len() as f64;
        let sd = (cos.iter().map(|c| (c - m).powi(2)).sum::<f64>() / (cos.len() - 1) as f64).sqrt();
        assert!((m - a1).abs() < 3.0 * sd / (cos.len() as f64).sqrt());
        let counts = s.level_counts();
        assert_eq!(counts, &[3]);
        for v in 0..3 {
            let share = s.rows_at_level(0, v).len() as f64 / 1e5;
            assert!((share - 1.0 / 3.0).abs() < 0.01);
        }
    }
}
