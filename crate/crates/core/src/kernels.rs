//! Continuous and categorical kernels and the normalized product-kernel
//! weights used by every fit in the crate.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sample::MixedSample;

/// Unnormalized mass below `DEGENERATE_REL_TOL * n * max_kernel` means the
/// evaluation point has no effective neighbors.
pub const DEGENERATE_REL_TOL: f64 = 1e-12;

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ContinuousKernel {
    #[default]
    Gaussian,
    Epanechnikov,
}

impl ContinuousKernel {
    #[inline]
    pub fn eval(self, u: f64) -> f64 {
        match self {
            ContinuousKernel::Gaussian => INV_SQRT_2PI * (-0.5 * u * u).exp(),
            ContinuousKernel::Epanechnikov => {
                if u.abs() <= 1.0 {
                    0.75 * (1.0 - u * u)
                } else {
                    0.0
                }
            }
        }
    }

    pub fn peak(self) -> f64 {
        self.eval(0.0)
    }

    /// Second moment `∫ u² K(u) du`.
    pub fn mu2(self) -> f64 {
        match self {
            ContinuousKernel::Gaussian => 1.0,
            ContinuousKernel::Epanechnikov => 0.2,
        }
    }

    /// Roughness `∫ K(u)² du`.
    pub fn roughness(self) -> f64 {
        match self {
            ContinuousKernel::Gaussian => 0.5 / PI.sqrt(),
            ContinuousKernel::Epanechnikov => 0.6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CategoricalKernel {
    /// `1 - λ` on a match, `λ / (c - 1)` on a mismatch.
    #[default]
    AitchisonAitken,
}

impl CategoricalKernel {
    #[inline]
    pub fn eval(self, z: u32, zi: u32, lambda: f64, levels: usize) -> f64 {
        match self {
            CategoricalKernel::AitchisonAitken => {
                if z == zi {
                    1.0 - lambda
                } else {
                    lambda / (levels as f64 - 1.0)
                }
            }
        }
    }

    pub fn peak(self, lambda: f64, levels: usize) -> f64 {
        match self {
            CategoricalKernel::AitchisonAitken => (1.0 - lambda).max(lambda / (levels as f64 - 1.0)),
        }
    }

    /// Mismatch-to-match weight ratio to first order in λ; this is the
    /// coefficient that multiplies cross-level discrepancies in the leading
    /// bias term.
    pub fn borrowing_coefficient(self, lambda: f64, levels: usize) -> f64 {
        match self {
            CategoricalKernel::AitchisonAitken => lambda / (levels as f64 - 1.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct KernelSpec {
    pub continuous: ContinuousKernel,
    pub categorical: CategoricalKernel,
}

impl KernelSpec {
    pub fn gaussian() -> Self {
        Self::default()
    }

    pub fn epanechnikov() -> Self {
        Self {
            continuous: ContinuousKernel::Epanechnikov,
            ..Self::default()
        }
    }
}

pub fn eval_continuous(kind: ContinuousKernel, u: f64) -> f64 {
    kind.eval(u)
}

pub fn eval_categorical(kind: CategoricalKernel, z: u32, zi: u32, lambda: f64, levels: usize) -> Result<f64> {
    if levels < 2 {
        return Err(Error::invalid(format!(
            "categorical kernel needs at least 2 levels, got {levels}"
        )));
    }
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::invalid(format!("lambda {lambda} outside [0, 1]")));
    }
    if z as usize >= levels || zi as usize >= levels {
        return Err(Error::invalid(format!(
            "level index out of range for {levels} levels"
        )));
    }
    Ok(kind.eval(z, zi, lambda, levels))
}

/// Smoothing parameters: `h` for continuous covariates, `lambda` for factors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bandwidths {
    pub h: Vec<f64>,
    pub lambda: Vec<f64>,
}

impl Bandwidths {
    pub fn new(h: Vec<f64>, lambda: Vec<f64>) -> Result<Self> {
        let b = Self { h, lambda };
        b.check_values()?;
        Ok(b)
    }

    fn check_values(&self) -> Result<()> {
        if let Some(h) = self.h.iter().find(|h| !(h.is_finite() && **h > 0.0)) {
            return Err(Error::invalid(format!(
                "bandwidth h = {h} must be positive and finite"
            )));
        }
        if let Some(l) = self.lambda.iter().find(|l| !(0.0..=1.0).contains(*l)) {
            return Err(Error::invalid(format!("bandwidth lambda = {l} outside [0, 1]")));
        }
        Ok(())
    }

    /// Checks dimensions and ranges against a sample.
    pub fn validate_for(&self, sample: &MixedSample) -> Result<()> {
        self.check_values()?;
        if self.h.len() != sample.k() || self.lambda.len() != sample.p() {
            return Err(Error::invalid(format!(
                "bandwidths have {} h and {} lambda entries, sample has k = {} and p = {}",
                self.h.len(),
                self.lambda.len(),
                sample.k(),
                sample.p()
            )));
        }
        if let Some(c) = sample.level_counts().iter().find(|&&c| c < 2) {
            return Err(Error::invalid(format!(
                "factor with {c} level(s) cannot be smoothed"
            )));
        }
        Ok(())
    }

    /// Euclidean norm of the concatenated vector `(h, lambda)`.
    pub fn norm(&self) -> f64 {
        self.h
            .iter()
            .chain(&self.lambda)
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }

    pub fn as_vec(&self) -> Vec<f64> {
        self.h.iter().chain(&self.lambda).copied().collect()
    }
}

impl fmt::Display for Bandwidths {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.as_vec().iter().map(|v| format!("{v:.4}")).collect();
        write!(f, "({})", parts.join(", "))
    }
}

/// Unnormalized product kernel between evaluation point `(x, z)` and row `i`.
///
/// Continuous factors are multiplied first, in coordinate order, then the
/// categorical factors. Every code path that builds kernel weights goes
/// through this function so batch and per-point fits agree bit for bit.
#[inline]
pub(crate) fn kernel_weight(
    sample: &MixedSample,
    i: usize,
    x: &[f64],
    z: &[u32],
    bw: &Bandwidths,
    spec: KernelSpec,
) -> f64 {
    let mut w = 1.0;
    for ((&xj, &xij), &h) in x.iter().zip(sample.x_row(i)).zip(&bw.h) {
        w *= spec.continuous.eval((xj - xij) / h) / h;
    }
    for (((&zl, &zil), &lambda), &c) in z
        .iter()
        .zip(sample.z_row(i))
        .zip(&bw.lambda)
        .zip(sample.level_counts())
    {
        w *= spec.categorical.eval(zl, zil, lambda, c);
    }
    w
}

pub(crate) fn kernel_row(
    sample: &MixedSample,
    x: &[f64],
    z: &[u32],
    bw: &Bandwidths,
    spec: KernelSpec,
) -> Vec<f64> {
    (0..sample.n())
        .map(|i| kernel_weight(sample, i, x, z, bw, spec))
        .collect()
}

/// Largest value a single product-kernel term can take.
pub(crate) fn max_kernel_value(sample: &MixedSample, bw: &Bandwidths, spec: KernelSpec) -> f64 {
    let cont: f64 = bw.h.iter().map(|h| spec.continuous.peak() / h).product();
    let cat: f64 = bw
        .lambda
        .iter()
        .zip(sample.level_counts())
        .map(|(&l, &c)| spec.categorical.peak(l, c))
        .product();
    cont * cat
}

pub(crate) fn degenerate_threshold(count: usize, max_kernel: f64) -> f64 {
    DEGENERATE_REL_TOL * count as f64 * max_kernel
}

pub(crate) fn check_point(sample: &MixedSample, x: &[f64], z: &[u32]) -> Result<()> {
    if x.len() != sample.k() || z.len() != sample.p() {
        return Err(Error::invalid(format!(
            "evaluation point has {} continuous and {} categorical values, sample has {} and {}",
            x.len(),
            z.len(),
            sample.k(),
            sample.p()
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("evaluation point has non-finite coordinates"));
    }
    for (&v, &c) in z.iter().zip(sample.level_counts()) {
        if v as usize >= c {
            return Err(Error::invalid(format!("evaluation level {v} out of range")));
        }
    }
    Ok(())
}

pub(crate) fn describe_point(x: &[f64], z: &[u32]) -> String {
    format!("x = {x:?}, z = {z:?}")
}

/// Normalized product-kernel weights of every observation at `(x, z)`.
pub fn product_weights(
    x: &[f64],
    z: &[u32],
    sample: &MixedSample,
    bw: &Bandwidths,
    spec: KernelSpec,
) -> Result<Vec<f64>> {
    bw.validate_for(sample)?;
    check_point(sample, x, z)?;
    let mut row = kernel_row(sample, x, z, bw, spec);
    let mass: f64 = row.iter().sum();
    let threshold = degenerate_threshold(sample.n(), max_kernel_value(sample, bw, spec));
    if !(mass > threshold) {
        return Err(Error::DegenerateNeighborhood {
            point: describe_point(x, z),
            mass,
        });
    }
    row.iter_mut().for_each(|w| *w /= mass);
    Ok(row)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn continuous_examples() {
        assert_abs_diff_eq!(
            eval_continuous(ContinuousKernel::Gaussian, 0.0),
            0.39894,
            epsilon = 1e-5
        );
        assert_eq!(eval_continuous(ContinuousKernel::Epanechnikov, 0.0), 0.75);
        assert_eq!(eval_continuous(ContinuousKernel::Epanechnikov, 1.5), 0.0);
        assert_eq!(
            ContinuousKernel::Gaussian.eval(0.7),
            ContinuousKernel::Gaussian.eval(-0.7)
        );
    }

    #[test]
    fn categorical_examples() {
        let aa = CategoricalKernel::AitchisonAitken;
        assert_abs_diff_eq!(eval_categorical(aa, 2, 2, 0.3, 5).unwrap(), 0.7, epsilon = 1e-15);
        assert_abs_diff_eq!(
            eval_categorical(aa, 1, 2, 0.3, 5).unwrap(),
            0.075,
            epsilon = 1e-15
        );
        assert_eq!(eval_categorical(aa, 1, 2, 0.0, 5).unwrap(), 0.0);
        assert!(eval_categorical(aa, 0, 0, 0.3, 1).is_err());
        assert!(eval_categorical(aa, 0, 0, 1.3, 3).is_err());
        assert!(eval_categorical(aa, 0, 0, -0.1, 3).is_err());
    }

    #[test]
    fn identical_covariates_split_evenly() {
        let s = MixedSample::univariate(&[0.4, 0.4], &[1, 1], 3, &[0.0, 1.0]).unwrap();
        let bw = Bandwidths::new(vec![0.2], vec![0.1]).unwrap();
        let w = product_weights(&[0.4], &[1], &s, &bw, KernelSpec::gaussian()).unwrap();
        assert_eq!(w, vec![0.5, 0.5]);
    }

    #[test]
    fn zero_lambda_without_matches_is_degenerate() {
        let s = MixedSample::univariate(&[0.1, 0.2], &[0, 1], 3, &[0.0, 1.0]).unwrap();
        let bw = Bandwidths::new(vec![0.2], vec![0.0]).unwrap();
        let err = product_weights(&[0.1], &[2], &s, &bw, KernelSpec::gaussian()).unwrap_err();
        assert!(matches!(err, Error::DegenerateNeighborhood { .. }));
    }

    /// Frozen from a direct evaluation of the normalized product kernel:
    /// X = (0.2, 0.5, 0.9), Z = (0, 1, 0), c = 2, x = 0.4, z = 0, h = 0.3,
    /// λ = 0.2.
    #[test]
    fn three_point_weights_match_hand_evaluation() {
        let s = MixedSample::univariate(&[0.2, 0.5, 0.9], &[0, 1, 0], 2, &[0.0; 3]).unwrap();
        let bw = Bandwidths::new(vec![0.3], vec![0.2]).unwrap();
        let w = product_weights(&[0.4], &[0], &s, &bw, KernelSpec::gaussian()).unwrap();
        let expected = [
            0.622_376_942_921_925,
            0.183_812_870_562_075_96,
            0.193_810_186_515_998_93,
        ];
        for (a, b) in w.iter().zip(expected) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-14);
        }
    }

    #[test]
    fn uniform_lambda_flattens_factor() {
        // λ = (c-1)/c gives identical match and mismatch weights.
        let c = 4;
        let lambda = (c as f64 - 1.0) / c as f64;
        let aa = CategoricalKernel::AitchisonAitken;
        let m = aa.eval(0, 0, lambda, c);
        let mm = aa.eval(0, 3, lambda, c);
        assert_abs_diff_eq!(m, mm, epsilon = 1e-15);
        assert_abs_diff_eq!(m, 1.0 / c as f64, epsilon = 1e-15);
    }

    proptest! {
        #[test]
        fn categorical_rows_sum_to_one(lambda in 0.0f64..=1.0, c in 2usize..8, z in 0u32..8) {
            let z = z % c as u32;
            let total: f64 = (0..c as u32)
                .map(|zp| eval_categorical(CategoricalKernel::AitchisonAitken, z, zp, lambda, c).unwrap())
                .sum();
            prop_assert!((total - 1.0).abs() < 1e-14);
        }

        #[test]
        fn weights_normalized_and_permutation_equivariant(
            xs in proptest::collection::vec(0.0f64..1.0, 2..15),
            seed in 0u64..1000,
            h in 0.05f64..1.0,
            lambda in 0.01f64..0.6,
        ) {
            let n = xs.len();
            let zs: Vec<u32> = (0..n).map(|i| ((i as u64 * 7 + seed) % 3) as u32).collect();
            let s = MixedSample::univariate(&xs, &zs, 3, &vec![0.0; n]).unwrap();
            let bw = Bandwidths::new(vec![h], vec![lambda]).unwrap();
            let w = product_weights(&[0.5], &[1], &s, &bw, KernelSpec::gaussian()).unwrap();
            prop_assert!(w.iter().all(|&v| v >= 0.0));
            prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);

            let perm: Vec<usize> = (0..n).rev().collect();
            let sp = s.select_rows(&perm).unwrap();
            let wp = product_weights(&[0.5], &[1], &sp, &bw, KernelSpec::gaussian()).unwrap();
            for (r, &i) in perm.iter().enumerate() {
                prop_assert!((wp[r] - w[i]).abs() < 1e-14);
            }
        }
    }
}
