//! Small descriptive-statistics helpers on real samples.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Empirical quantile conventions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuantileRule {
    /// Linear interpolation between order statistics at 0-based position
    /// `(B - 1) q`.
    #[default]
    Interpolated,
    /// Left-continuous inverse of the empirical CDF: order statistic
    /// `ceil(B q)` (1-based).
    InverseEcdf,
}

impl QuantileRule {
    pub fn eval_sorted(self, sorted: &[f64], q: f64) -> f64 {
        match self {
            QuantileRule::Interpolated => quantile_sorted(sorted, q),
            QuantileRule::InverseEcdf => {
                assert!(!sorted.is_empty(), "quantile of an empty sample");
                let k = (sorted.len() as f64 * q.clamp(0.0, 1.0)).ceil() as usize;
                sorted[k.saturating_sub(1).min(sorted.len() - 1)]
            }
        }
    }
}

/// Interpolated order-statistic quantile of an ascending-sorted slice: the
/// value at 0-based position `(len - 1) * q`, linear between neighbors.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of an empty sample");
    let pos = (sorted.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    if frac == 0.0 {
        sorted[lo]
    } else {
        sorted[lo] + frac * (sorted[hi] - sorted[lo])
    }
}

/// Sorts a copy and returns the quantile.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    quantile_sorted(&v, q)
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Sample standard deviation (divisor `n - 1`).
pub fn sample_sd(values: &[f64]) -> Result<f64> {
    if values.len() < 2 {
        return Err(Error::invalid("standard deviation needs at least two values"));
    }
    let m = mean(values);
    let ss: f64 = values.iter().map(|v| (v - m).powi(2)).sum();
    Ok((ss / (values.len() - 1) as f64).sqrt())
}

/// Variance with divisor `n`.
pub fn population_variance(values: &[f64]) -> f64 {
    let m = mean(values);
    values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / values.len() as f64
}

pub fn iqr(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    quantile_sorted(&v, 0.75) - quantile_sorted(&v, 0.25)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn quantiles_interpolate() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile(&v, 0.0), 1.0);
        assert_eq!(quantile(&v, 1.0), 4.0);
        assert_abs_diff_eq!(quantile(&v, 0.5), 2.5);
        assert_abs_diff_eq!(quantile(&v, 0.25), 1.75);
        assert_eq!(quantile(&[7.0], 0.3), 7.0);
        let r = QuantileRule::InverseEcdf;
        assert_eq!(r.eval_sorted(&v, 0.0), 1.0);
        assert_eq!(r.eval_sorted(&v, 0.25), 1.0);
        assert_eq!(r.eval_sorted(&v, 0.26), 2.0);
        assert_eq!(r.eval_sorted(&v, 1.0), 4.0);
    }

    #[test]
    fn spread_measures() {
        let v = [2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0];
        assert_abs_diff_eq!(population_variance(&v), 4.0);
        assert_abs_diff_eq!(sample_sd(&v).unwrap(), (32.0f64 / 7.0).sqrt());
        assert_abs_diff_eq!(iqr(&v), 5.5 - 4.0);
        assert!(sample_sd(&[1.0]).is_err());
    }
}
