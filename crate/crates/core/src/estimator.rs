//! Mixed-covariate circular regression: Nadaraya–Watson and local-linear fits
//! of the sine and cosine components, recombined with `atan2`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{
    check_point, degenerate_threshold, describe_point, kernel_row, kernel_weight, max_kernel_value,
    Bandwidths, KernelSpec,
};
use crate::sample::MixedSample;

/// `‖(m1, m2)‖` below this means the fitted direction is undefined.
pub const UNDEFINED_DIRECTION_TOL: f64 = 1e-10;

/// Relative 1-norm condition number above which a local-linear design is
/// treated as singular.
pub const LL_CONDITION_LIMIT: f64 = 1e8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Local constant (Nadaraya–Watson).
    #[default]
    Nw,
    /// Local linear in the continuous covariates.
    Ll,
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "nw" => Ok(Method::Nw),
            "ll" => Ok(Method::Ll),
            other => Err(Error::invalid(format!(
                "unknown method '{other}' (expected nw or ll)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointFit {
    pub angle: f64,
    pub m1: f64,
    pub m2: f64,
    /// Method that produced this value; differs from the requested one only
    /// when local-linear fell back to Nadaraya–Watson.
    pub method: Method,
}

/// Kernel choice plus fitting method.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Estimator {
    pub kernels: KernelSpec,
    pub method: Method,
    /// Retry singular local-linear fits with Nadaraya–Watson.
    #[serde(default)]
    pub ll_fallback: bool,
}

impl Estimator {
    pub fn nw(kernels: KernelSpec) -> Self {
        Self {
            kernels,
            method: Method::Nw,
            ll_fallback: false,
        }
    }

    pub fn ll(kernels: KernelSpec, ll_fallback: bool) -> Self {
        Self {
            kernels,
            method: Method::Ll,
            ll_fallback,
        }
    }

    pub fn fit_point(&self, sample: &MixedSample, bw: &Bandwidths, x: &[f64], z: &[u32]) -> Result<PointFit> {
        bw.validate_for(sample)?;
        check_point(sample, x, z)?;
        let row = kernel_row(sample, x, z, bw, self.kernels);
        let trig = Trig::new(sample.theta());
        let threshold = degenerate_threshold(sample.n(), max_kernel_value(sample, bw, self.kernels));
        self.fit_from_row(sample, bw, &row, &trig, None, threshold, x, z)
    }

    #[allow(clippy::too_many_arguments)]
    pub(crate) fn fit_from_row(
        &self,
        sample: &MixedSample,
        bw: &Bandwidths,
        row: &[f64],
        trig: &Trig,
        skip: Option<usize>,
        threshold: f64,
        x: &[f64],
        z: &[u32],
    ) -> Result<PointFit> {
        match self.method {
            Method::Nw => nw_from_row(row, trig, skip, threshold, x, z),
            Method::Ll => match ll_from_row(sample, bw, row, trig, skip, threshold, x, z) {
                Err(Error::SingularFit { .. }) if self.ll_fallback => {
                    nw_from_row(row, trig, skip, threshold, x, z)
                }
                other => other,
            },
        }
    }

    /// Fits at every `(x, z)` pair, levels in the outer loop.
    pub fn predict_grid(
        &self,
        sample: &MixedSample,
        bw: &Bandwidths,
        grid: &[Vec<f64>],
        levels: &[Vec<u32>],
    ) -> Result<FitResult> {
        if grid.is_empty() || levels.is_empty() {
            return Err(Error::invalid("prediction grid and level list must be nonempty"));
        }
        bw.validate_for(sample)?;
        let points: Vec<EvalPoint> = levels
            .iter()
            .flat_map(|z| {
                grid.iter().map(move |x| EvalPoint {
                    x: x.clone(),
                    z: z.clone(),
                })
            })
            .collect();
        for p in &points {
            check_point(sample, &p.x, &p.z)?;
        }
        let trig = Trig::new(sample.theta());
        let threshold = degenerate_threshold(sample.n(), max_kernel_value(sample, bw, self.kernels));
        let fits: Vec<PointFit> = points
            .par_iter()
            .map(|p| {
                let row = kernel_row(sample, &p.x, &p.z, bw, self.kernels);
                self.fit_from_row(sample, bw, &row, &trig, None, threshold, &p.x, &p.z)
            })
            .collect::<Result<_>>()?;
        Ok(FitResult::assemble(points, fits, self.method, bw.clone()))
    }

    /// Fitted values at the design points, using the full sample.
    pub fn fitted_at_design(&self, sample: &MixedSample, bw: &Bandwidths) -> Result<Vec<PointFit>> {
        let dk = DesignKernel::compute(sample, bw, self.kernels)?;
        let trig = Trig::new(sample.theta());
        (0..sample.n())
            .into_par_iter()
            .map(|i| dk.fit(self, sample, bw, i, &trig, false))
            .collect()
    }

    /// Leave-one-out predictions; `None` marks rows whose fit without
    /// themselves is degenerate or has no defined direction.
    pub fn loo_predictions(&self, sample: &MixedSample, bw: &Bandwidths) -> Result<Vec<Option<PointFit>>> {
        if sample.n() < 2 {
            return Err(Error::invalid("leave-one-out needs at least two observations"));
        }
        let dk = DesignKernel::compute(sample, bw, self.kernels)?;
        let trig = Trig::new(sample.theta());
        Ok((0..sample.n())
            .into_par_iter()
            .map(|i| dk.fit(self, sample, bw, i, &trig, true).ok())
            .collect())
    }
}

pub fn fit_point_nw(
    sample: &MixedSample,
    bw: &Bandwidths,
    x: &[f64],
    z: &[u32],
    spec: KernelSpec,
) -> Result<PointFit> {
    Estimator::nw(spec).fit_point(sample, bw, x, z)
}

pub fn fit_point_ll(
    sample: &MixedSample,
    bw: &Bandwidths,
    x: &[f64],
    z: &[u32],
    spec: KernelSpec,
) -> Result<PointFit> {
    Estimator::ll(spec, false).fit_point(sample, bw, x, z)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalPoint {
    pub x: Vec<f64>,
    pub z: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub points: Vec<EvalPoint>,
    pub m_hat: Vec<f64>,
    pub m1_hat: Vec<f64>,
    pub m2_hat: Vec<f64>,
    pub method: Method,
    /// Per-point method actually used (differs on local-linear fallback).
    pub point_methods: Vec<Method>,
    pub bandwidths: Bandwidths,
}

impl FitResult {
    fn assemble(points: Vec<EvalPoint>, fits: Vec<PointFit>, method: Method, bw: Bandwidths) -> Self {
        Self {
            points,
            m_hat: fits.iter().map(|f| f.angle).collect(),
            m1_hat: fits.iter().map(|f| f.m1).collect(),
            m2_hat: fits.iter().map(|f| f.m2).collect(),
            method,
            point_methods: fits.iter().map(|f| f.method).collect(),
            bandwidths: bw,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn fallback_count(&self) -> usize {
        self.point_methods.iter().filter(|&&m| m != self.method).count()
    }
}

/// Sines and cosines of a response vector.
#[derive(Debug, Clone)]
pub(crate) struct Trig {
    pub sin: Vec<f64>,
    pub cos: Vec<f64>,
}

impl Trig {
    pub fn new(theta: &[f64]) -> Self {
        let (sin, cos) = theta.iter().map(|t| t.sin_cos()).unzip();
        Self { sin, cos }
    }
}

/// Kernel weights between every pair of design points, for batch fits at
/// the observed covariates (full-sample, leave-one-out, or resampled
/// responses). Row `i` holds the weights for evaluation at design point `i`.
#[derive(Debug, Clone)]
pub(crate) struct DesignKernel {
    n: usize,
    weights: Vec<f64>,
    threshold_full: f64,
    threshold_loo: f64,
}

impl DesignKernel {
    pub fn compute(sample: &MixedSample, bw: &Bandwidths, spec: KernelSpec) -> Result<Self> {
        bw.validate_for(sample)?;
        let n = sample.n();
        let mut weights = vec![0.0; n * n];
        weights.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
            let (x, z) = (sample.x_row(i), sample.z_row(i));
            for (r, w) in row.iter_mut().enumerate() {
                *w = kernel_weight(sample, r, x, z, bw, spec);
            }
        });
        let peak = max_kernel_value(sample, bw, spec);
        Ok(Self {
            n,
            weights,
            threshold_full: degenerate_threshold(n, peak),
            threshold_loo: degenerate_threshold(n.saturating_sub(1), peak),
        })
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.weights[i * self.n..(i + 1) * self.n]
    }

    pub fn fit(
        &self,
        est: &Estimator,
        sample: &MixedSample,
        bw: &Bandwidths,
        i: usize,
        trig: &Trig,
        leave_out: bool,
    ) -> Result<PointFit> {
        let (skip, threshold) = if leave_out {
            (Some(i), self.threshold_loo)
        } else {
            (None, self.threshold_full)
        };
        est.fit_from_row(
            sample,
            bw,
            self.row(i),
            trig,
            skip,
            threshold,
            sample.x_row(i),
            sample.z_row(i),
        )
    }
}

fn finish(m1: f64, m2: f64, method: Method, x: &[f64], z: &[u32]) -> Result<PointFit> {
    let norm = m1.hypot(m2);
    if !(norm >= UNDEFINED_DIRECTION_TOL) {
        return Err(Error::UndefinedDirection {
            point: describe_point(x, z),
            norm,
        });
    }
    Ok(PointFit {
        angle: m1.atan2(m2),
        m1,
        m2,
        method,
    })
}

fn nw_from_row(
    row: &[f64],
    trig: &Trig,
    skip: Option<usize>,
    threshold: f64,
    x: &[f64],
    z: &[u32],
) -> Result<PointFit> {
    let (mut mass, mut s1, mut s2) = (0.0, 0.0, 0.0);
    for (r, ((&w, &s), &c)) in row.iter().zip(&trig.sin).zip(&trig.cos).enumerate() {
        if Some(r) == skip {
            continue;
        }
        mass += w;
        s1 += w * s;
        s2 += w * c;
    }
    if !(mass > threshold) {
        return Err(Error::DegenerateNeighborhood {
            point: describe_point(x, z),
            mass,
        });
    }
    finish(s1 / mass, s2 / mass, Method::Nw, x, z)
}

#[allow(clippy::too_many_arguments)]
fn ll_from_row(
    sample: &MixedSample,
    bw: &Bandwidths,
    row: &[f64],
    trig: &Trig,
    skip: Option<usize>,
    threshold: f64,
    x: &[f64],
    z: &[u32],
) -> Result<PointFit> {
    let d = sample.k() + 1;
    let mut a = vec![0.0; d * d];
    let mut b_sin = vec![0.0; d];
    let mut b_cos = vec![0.0; d];
    let mut u = vec![0.0; d];
    let mut mass = 0.0;
    u[0] = 1.0;
    for (r, &w) in row.iter().enumerate() {
        if Some(r) == skip || w == 0.0 {
            continue;
        }
        mass += w;
        // slope columns scaled by h so the condition number is unit-free
        for (j, (&xr, &h)) in sample.x_row(r).iter().zip(&bw.h).enumerate() {
            u[j + 1] = (xr - x[j]) / h;
        }
        for p in 0..d {
            let wu = w * u[p];
            for q in 0..d {
                a[p * d + q] += wu * u[q];
            }
            b_sin[p] += wu * trig.sin[r];
            b_cos[p] += wu * trig.cos[r];
        }
    }
    if !(mass > threshold) {
        return Err(Error::DegenerateNeighborhood {
            point: describe_point(x, z),
            mass,
        });
    }
    let singular = |condition: f64| Error::SingularFit {
        point: describe_point(x, z),
        condition,
    };
    let inv = invert(&a, d).ok_or_else(|| singular(f64::INFINITY))?;
    let condition = norm1(&a, d) * norm1(&inv, d);
    if !(condition <= LL_CONDITION_LIMIT) {
        return Err(singular(condition));
    }
    let m1: f64 = (0..d).map(|q| inv[q] * b_sin[q]).sum();
    let m2: f64 = (0..d).map(|q| inv[q] * b_cos[q]).sum();
    finish(m1, m2, Method::Ll, x, z)
}

/// Gauss–Jordan inverse with partial pivoting; `None` on an exact zero pivot.
fn invert(a: &[f64], d: usize) -> Option<Vec<f64>> {
    let mut m = a.to_vec();
    let mut inv = vec![0.0; d * d];
    for i in 0..d {
        inv[i * d + i] = 1.0;
    }
    for col in 0..d {
        let pivot = (col..d).max_by(|&r, &s| m[r * d + col].abs().total_cmp(&m[s * d + col].abs()))?;
        if m[pivot * d + col] == 0.0 {
            return None;
        }
        if pivot != col {
            for c in 0..d {
                m.swap(pivot * d + c, col * d + c);
                inv.swap(pivot * d + c, col * d + c);
            }
        }
        let p = m[col * d + col];
        for c in 0..d {
            m[col * d + c] /= p;
            inv[col * d + c] /= p;
        }
        for r in 0..d {
            if r != col {
                let f = m[r * d + col];
                if f != 0.0 {
                    for c in 0..d {
                        m[r * d + c] -= f * m[col * d + c];
                        inv[r * d + c] -= f * inv[col * d + c];
                    }
                }
            }
        }
    }
    Some(inv)
}

fn norm1(a: &[f64], d: usize) -> f64 {
    (0..d)
        .map(|c| (0..d).map(|r| a[r * d + c].abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::angle::{signed_diff, wrap_2pi, wrap_pi};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn bw(h: f64, lambda: f64) -> Bandwidths {
        Bandwidths::new(vec![h], vec![lambda]).unwrap()
    }

    fn hand_sample() -> MixedSample {
        MixedSample::univariate(&[0.1, 0.35, 0.6, 0.8], &[0, 1, 0, 1], 2, &[0.3, 1.2, 2.5, -2.8]).unwrap()
    }

    #[test]
    fn constant_response_reproduced() {
        let s = MixedSample::univariate(&[0.1, 0.5, 0.7, 0.9], &[0, 1, 2, 0], 3, &[1.0; 4]).unwrap();
        for est in [
            Estimator::nw(KernelSpec::gaussian()),
            Estimator::ll(KernelSpec::gaussian(), false),
        ] {
            let f = est.fit_point(&s, &bw(0.3, 0.2), &[0.4], &[1]).unwrap();
            assert_abs_diff_eq!(f.angle, 1.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn two_point_symmetric_fit() {
        let s = MixedSample::univariate(&[0.5, 0.5], &[0, 0], 2, &[0.0, FRAC_PI_2]).unwrap();
        let f = fit_point_nw(&s, &bw(0.2, 0.1), &[0.5], &[0], KernelSpec::gaussian()).unwrap();
        assert_abs_diff_eq!(f.angle, PI / 4.0, epsilon = 1e-15);
        assert_abs_diff_eq!(f.m1, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(f.m2, 0.5, epsilon = 1e-15);
    }

    // Frozen from a direct evaluation of the weighted sine/cosine averages
    // for the four-point sample at x = 0.45, z = 0, h = 0.5, λ = 0.2.
    #[test]
    fn nw_matches_hand_evaluation() {
        let f = fit_point_nw(
            &hand_sample(),
            &bw(0.5, 0.2),
            &[0.45],
            &[0],
            KernelSpec::gaussian(),
        )
        .unwrap();
        assert_abs_diff_eq!(f.m1, NW_HAND.0, epsilon = 1e-13);
        assert_abs_diff_eq!(f.m2, NW_HAND.1, epsilon = 1e-13);
        assert_abs_diff_eq!(f.angle, NW_HAND.2, epsilon = 1e-13);
    }

    // Same sample; intercepts of the weighted least-squares solve via the
    // normal equations.
    #[test]
    fn ll_matches_normal_equations() {
        let f = fit_point_ll(
            &hand_sample(),
            &bw(0.5, 0.2),
            &[0.45],
            &[0],
            KernelSpec::gaussian(),
        )
        .unwrap();
        assert_abs_diff_eq!(f.m1, LL_HAND.0, epsilon = 1e-12);
        assert_abs_diff_eq!(f.m2, LL_HAND.1, epsilon = 1e-12);
        assert_abs_diff_eq!(f.angle, LL_HAND.2, epsilon = 1e-12);
    }

    const NW_HAND: (f64, f64, f64) = (
        0.443_368_457_520_672_4,
        -0.052_178_764_643_260_704,
        1.687_944_602_749_379_9,
    );
    const LL_HAND: (f64, f64, f64) = (
        0.442_650_446_203_905_9,
        -0.180_787_136_271_984_06,
        1.958_539_876_424_507_7,
    );

    #[test]
    fn ll_reproduces_linear_sine() {
        // sin Θ = 0.2 + 0.5 x, single category
        let xs: Vec<f64> = (0..9).map(|i| i as f64 / 8.0).collect();
        let theta: Vec<f64> = xs.iter().map(|x| (0.2 + 0.5 * x).asin()).collect();
        let s = MixedSample::univariate(&xs, &[0; 9], 2, &theta).unwrap();
        for &x0 in &[0.05, 0.33, 0.9] {
            let f = fit_point_ll(&s, &bw(0.15, 0.3), &[x0], &[0], KernelSpec::gaussian()).unwrap();
            assert_abs_diff_eq!(f.m1, 0.2 + 0.5 * x0, epsilon = 1e-10);
        }
    }

    #[test]
    fn ll_singular_design_and_fallback() {
        // all covariates identical: slope column is zero
        let s = MixedSample::univariate(&[0.3, 0.3, 0.3], &[0, 0, 1], 2, &[0.1, 0.2, 0.3]).unwrap();
        let err = fit_point_ll(&s, &bw(0.2, 0.1), &[0.3], &[0], KernelSpec::gaussian()).unwrap_err();
        assert!(matches!(err, Error::SingularFit { .. }));
        let est = Estimator::ll(KernelSpec::gaussian(), true);
        let f = est.fit_point(&s, &bw(0.2, 0.1), &[0.3], &[0]).unwrap();
        assert_eq!(f.method, Method::Nw);
        let r = est
            .predict_grid(&s, &bw(0.2, 0.1), &[vec![0.3]], &[vec![0]])
            .unwrap();
        assert_eq!(r.fallback_count(), 1);
    }

    #[test]
    fn undefined_direction_detected() {
        let s = MixedSample::univariate(&[0.5, 0.5], &[0, 0], 2, &[0.0, PI]).unwrap();
        let err = fit_point_nw(&s, &bw(0.2, 0.1), &[0.5], &[0], KernelSpec::gaussian()).unwrap_err();
        assert!(matches!(err, Error::UndefinedDirection { .. }));
    }

    #[test]
    fn predict_grid_layout() {
        let s = hand_sample();
        let est = Estimator::default();
        let b = bw(0.4, 0.3);
        let one = est.predict_grid(&s, &b, &[vec![0.45]], &[vec![0]]).unwrap();
        let direct = est.fit_point(&s, &b, &[0.45], &[0]).unwrap();
        assert_eq!(one.m_hat[0], direct.angle);

        let grid: Vec<Vec<f64>> = (1..=9).map(|i| vec![i as f64 / 10.0]).collect();
        let s3 = MixedSample::univariate(&[0.1, 0.5, 0.9], &[0, 1, 2], 3, &[0.1, 0.2, 0.3]).unwrap();
        let levels: Vec<Vec<u32>> = (0..3).map(|l| vec![l]).collect();
        let r = est.predict_grid(&s3, &b, &grid, &levels).unwrap();
        assert_eq!(r.len(), 27);
        assert_eq!(r.points[9].z, vec![1]);
        assert_eq!(r.points[9].x, vec![0.1]);

        let c = MixedSample::univariate(&[0.1, 0.5, 0.9], &[0, 1, 2], 3, &[2.0; 3]).unwrap();
        let r = est.predict_grid(&c, &b, &grid, &levels).unwrap();
        assert!(r.m_hat.iter().all(|m| (m - 2.0).abs() < 1e-14));
    }

    #[test]
    fn loo_examples() {
        let est = Estimator::default();
        let s = MixedSample::univariate(&[0.5, 0.5], &[0, 0], 2, &[0.0, FRAC_PI_2]).unwrap();
        let loo = est.loo_predictions(&s, &bw(0.2, 0.1)).unwrap();
        assert_abs_diff_eq!(loo[0].unwrap().angle, FRAC_PI_2, epsilon = 1e-15);
        assert_abs_diff_eq!(loo[1].unwrap().angle, 0.0, epsilon = 1e-15);

        let c = MixedSample::univariate(&[0.1, 0.4, 0.9], &[0, 1, 0], 2, &[-0.7; 3]).unwrap();
        let loo = est.loo_predictions(&c, &bw(0.3, 0.2)).unwrap();
        assert!(loo.iter().all(|f| (f.unwrap().angle + 0.7).abs() < 1e-14));

        let single = MixedSample::univariate(&[0.1], &[0], 2, &[0.0]).unwrap();
        assert!(est.loo_predictions(&single, &bw(0.3, 0.2)).is_err());
    }

    #[test]
    fn loo_is_bit_identical_to_refits() {
        let s = MixedSample::univariate(
            &[0.05, 0.3, 0.42, 0.7, 0.95],
            &[0, 1, 1, 0, 2],
            3,
            &[0.4, 1.1, 0.9, -0.2, 2.9],
        )
        .unwrap();
        let b = bw(0.25, 0.15);
        for est in [Estimator::default(), Estimator::ll(KernelSpec::gaussian(), true)] {
            let loo = est.loo_predictions(&s, &b).unwrap();
            for i in 0..s.n() {
                let refit = est
                    .fit_point(&s.without_row(i).unwrap(), &b, s.x_row(i), s.z_row(i))
                    .unwrap();
                assert_eq!(loo[i].unwrap(), refit);
            }
            let full = est.fitted_at_design(&s, &b).unwrap();
            for i in 0..s.n() {
                assert_eq!(full[i], est.fit_point(&s, &b, s.x_row(i), s.z_row(i)).unwrap());
            }
        }
    }

    #[test]
    fn epanechnikov_locality() {
        let s =
            MixedSample::univariate(&[0.1, 0.2, 0.5, 0.9], &[0, 0, 0, 1], 2, &[0.3, 0.4, 1.0, 2.0]).unwrap();
        let b = bw(0.15, 0.0);
        let est = Estimator::nw(KernelSpec::epanechnikov());
        let base = est.fit_point(&s, &b, &[0.15], &[0]).unwrap();
        let moved = s.with_theta(vec![0.3, 0.4, -2.0, 0.1]).unwrap();
        assert_eq!(est.fit_point(&moved, &b, &[0.15], &[0]).unwrap(), base);
    }

    fn random_sample(n: usize, seed: u64) -> MixedSample {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<f64> = (0..n).map(|_| rng.random()).collect();
        let z: Vec<u32> = (0..n).map(|_| rng.random_range(0..3)).collect();
        let t: Vec<f64> = (0..n).map(|_| rng.random_range(-PI..PI)).collect();
        MixedSample::univariate(&x, &z, 3, &t).unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn rotation_equivariance(seed in 0u64..10_000, c in -PI..PI, h in 0.05f64..0.5, l in 0.0f64..0.6) {
            let s = random_sample(30, seed);
            let rotated = s.with_theta(s.theta().iter().map(|t| wrap_pi(t + c)).collect()).unwrap();
            let b = bw(h, l);
            let est = Estimator::default();
            let f = est.fit_point(&s, &b, &[0.5], &[1]);
            prop_assume!(f.is_ok());
            let f = f.unwrap();
            let g = est.fit_point(&rotated, &b, &[0.5], &[1]).unwrap();
            prop_assert!(signed_diff(g.angle, f.angle + c).abs() < 1e-10);
            let (sc, cc) = c.sin_cos();
            prop_assert!((g.m1 - (cc * f.m1 + sc * f.m2)).abs() < 1e-10);
            prop_assert!((g.m2 - (cc * f.m2 - sc * f.m1)).abs() < 1e-10);
        }

        #[test]
        fn wrapping_invariance(seed in 0u64..10_000, h in 0.05f64..0.5, l in 0.0f64..0.6) {
            let s = random_sample(25, seed);
            let shifted = s.with_theta(s.theta().iter().map(|&t| wrap_2pi(t)).collect()).unwrap();
            let b = bw(h, l);
            let est = Estimator::default();
            if let Ok(f) = est.fit_point(&s, &b, &[0.3], &[2]) {
                let g = est.fit_point(&shifted, &b, &[0.3], &[2]).unwrap();
                prop_assert!(signed_diff(f.angle, g.angle).abs() < 1e-12);
            }
        }

        #[test]
        fn nw_bounded(seed in 0u64..10_000, h in 0.01f64..1.0, l in 0.0f64..1.0, x0 in 0.0f64..1.0) {
            let s = random_sample(20, seed);
            if let Ok(f) = fit_point_nw(&s, &bw(h, l), &[x0], &[0], KernelSpec::gaussian()) {
                prop_assert!(f.m1.hypot(f.m2) <= 1.0 + 1e-12);
            }
        }
    }
}
