//! Residual diagnostics, circular goodness of fit and uniformity tests.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::angle::{circ_mean, cos_loss, wrap_2pi, wrap_pi, CircSummary, RESULTANT_TOL};
use crate::error::{Error, Result};
use crate::sample::MixedSample;
use crate::stats::quantile_sorted;
use crate::vonmises;

/// Below this sample size the Watson and Kuiper p-values are flagged.
pub const MIN_RELIABLE_N: usize = 8;

const SERIES_TERMS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelCase {
    pub level: String,
    pub n: usize,
    /// `None` for a level with no rows.
    pub case_obs: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GofReport {
    pub n: usize,
    pub case_obs: f64,
    pub by_level: Vec<LevelCase>,
    /// `None` when all responses coincide.
    pub r2_circ: Option<f64>,
}

fn check_lengths(theta: &[f64], fitted: &[f64]) -> Result<()> {
    if theta.len() != fitted.len() {
        return Err(Error::invalid(format!(
            "{} responses but {} fitted values",
            theta.len(),
            fitted.len()
        )));
    }
    if theta.is_empty() {
        return Err(Error::EmptyDataset("no observations to assess".into()));
    }
    Ok(())
}

/// Mean cosine loss between responses and fitted directions.
pub fn case_obs(theta: &[f64], fitted: &[f64]) -> Result<f64> {
    check_lengths(theta, fitted)?;
    let sse: f64 = theta.iter().zip(fitted).map(|(&t, &f)| cos_loss(t, f)).sum();
    Ok(sse / theta.len() as f64)
}

/// Circular coefficient of determination `1 - SSE / SST`.
pub fn r2_circ(theta: &[f64], fitted: &[f64]) -> Result<Option<f64>> {
    check_lengths(theta, fitted)?;
    let n = theta.len() as f64;
    let rbar = circ_mean(theta)?.resultant_length;
    if 1.0 - rbar < RESULTANT_TOL {
        return Ok(None);
    }
    let sst = n * (1.0 - rbar);
    let sse: f64 = theta.iter().zip(fitted).map(|(&t, &f)| cos_loss(t, f)).sum();
    Ok(Some(1.0 - sse / sst))
}

/// Pooled and per-level cosine loss plus circular R², split by factor `factor`.
pub fn gof_report(sample: &MixedSample, fitted: &[f64], factor: usize) -> Result<GofReport> {
    let theta = sample.theta();
    check_lengths(theta, fitted)?;
    if factor >= sample.k() {
        return Err(Error::invalid(format!(
            "factor {factor} out of range for {} categorical covariates",
            sample.k()
        )));
    }
    let by_level = (0..sample.level_counts()[factor])
        .map(|v| {
            let rows = sample.rows_at_level(factor, v as u32);
            let case = (!rows.is_empty()).then(|| {
                rows.iter().map(|&i| cos_loss(theta[i], fitted[i])).sum::<f64>() / rows.len() as f64
            });
            LevelCase {
                level: sample.level_name(factor, v as u32),
                n: rows.len(),
                case_obs: case,
            }
        })
        .collect();
    Ok(GofReport {
        n: theta.len(),
        case_obs: case_obs(theta, fitted)?,
        by_level,
        r2_circ: r2_circ(theta, fitted)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UniformityResult {
    pub n: usize,
    pub rayleigh_rbar: f64,
    /// `2 n R̄²`, asymptotically chi-square with two degrees of freedom.
    pub rayleigh_stat: f64,
    pub rayleigh_p: f64,
    pub watson_u2: f64,
    pub watson_p: f64,
    pub kuiper_v: f64,
    pub kuiper_p: f64,
    /// Set when `n` is below [`MIN_RELIABLE_N`].
    pub approximate: bool,
}

/// Rayleigh, Watson U² and Kuiper tests of circular uniformity.
pub fn uniformity_tests(angles: &[f64]) -> Result<UniformityResult> {
    let n = angles.len();
    if n < 2 {
        return Err(Error::invalid("uniformity tests need at least two angles"));
    }
    if angles.iter().any(|a| !a.is_finite()) {
        return Err(Error::invalid("non-finite angle"));
    }
    let nf = n as f64;
    let rbar = circ_mean(angles)?.resultant_length;
    let z = nf * rbar * rbar;
    let rayleigh_p = (-z).exp()
        * (1.0 + (2.0 * z - z * z) / (4.0 * nf)
            - (24.0 * z - 132.0 * z * z + 76.0 * z.powi(3) - 9.0 * z.powi(4)) / (288.0 * nf * nf));

    let mut u: Vec<f64> = angles.iter().map(|&a| wrap_2pi(a) / TAU).collect();
    u.sort_by(f64::total_cmp);
    let ubar = u.iter().sum::<f64>() / nf;
    let mut u2 = 1.0 / (12.0 * nf) - nf * (ubar - 0.5).powi(2);
    let (mut d_plus, mut d_minus) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for (i, &ui) in u.iter().enumerate() {
        let k = i as f64;
        u2 += (ui - (2.0 * k + 1.0) / (2.0 * nf)).powi(2);
        d_plus = d_plus.max((k + 1.0) / nf - ui);
        d_minus = d_minus.max(ui - k / nf);
    }
    let kuiper_v = d_plus + d_minus;

    let u_star = (u2 - 0.1 / nf + 0.1 / (nf * nf)) * (1.0 + 0.8 / nf);
    let watson_p = watson_tail(u_star);

    let lambda = (nf.sqrt() + 0.155 + 0.24 / nf.sqrt()) * kuiper_v;
    let kuiper_p = if lambda < 0.4 {
        1.0
    } else {
        2.0 * (1..=SERIES_TERMS)
            .map(|k| {
                let kl2 = (k * k) as f64 * lambda * lambda;
                (4.0 * kl2 - 1.0) * (-2.0 * kl2).exp()
            })
            .sum::<f64>()
    };

    Ok(UniformityResult {
        n,
        rayleigh_rbar: rbar,
        rayleigh_stat: 2.0 * z,
        rayleigh_p: rayleigh_p.clamp(0.0, 1.0),
        watson_u2: u2,
        watson_p: watson_p.clamp(0.0, 1.0),
        kuiper_v,
        kuiper_p: kuiper_p.clamp(0.0, 1.0),
        approximate: n < MIN_RELIABLE_N,
    })
}

/// Asymptotic upper tail of Watson's U². Small values use the Jacobi
/// transformed series, which converges quickly there.
fn watson_tail(u: f64) -> f64 {
    if u <= 0.0 {
        return 1.0;
    }
    if u < 0.1 {
        let s: f64 = (0..SERIES_TERMS)
            .map(|k| (-((2 * k + 1) as f64).powi(2) / (8.0 * u)).exp())
            .sum();
        return 1.0 - 2.0 * s / (2.0 * PI * u).sqrt();
    }
    2.0 * (1..=SERIES_TERMS)
        .map(|k| {
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            sign * (-2.0 * (k * k) as f64 * PI * PI * u).exp()
        })
        .sum::<f64>()
}

/// Circular median and quartiles, in (−π, π].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircQuartiles {
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
}

fn mean_abs_deviation(angles: &[f64], c: f64) -> f64 {
    angles.iter().map(|&a| wrap_pi(a - c).abs()).sum::<f64>() / angles.len() as f64
}

/// Minimizer of the mean absolute circular deviation over the data points.
/// Ties are resolved by the circular mean of the tied points.
pub fn circular_median(angles: &[f64]) -> Result<f64> {
    if angles.is_empty() {
        return Err(Error::invalid("circular median of an empty sample"));
    }
    let costs: Vec<f64> = angles.iter().map(|&c| mean_abs_deviation(angles, c)).collect();
    let best = costs.iter().copied().fold(f64::INFINITY, f64::min);
    let tol = 1e-12 * best.max(1.0);
    let mut tied: Vec<f64> = angles
        .iter()
        .zip(&costs)
        .filter(|(_, &c)| c <= best + tol)
        .map(|(&a, _)| wrap_pi(a))
        .collect();
    tied.sort_by(f64::total_cmp);
    tied.dedup_by(|a, b| (*a - *b).abs() < 1e-15);
    match circ_mean(&tied)?.mean_direction {
        Some(m) if tied.len() > 1 => Ok(m),
        _ => Ok(tied[0]),
    }
}

/// Quartiles as quantiles of the signed deviations from the circular median.
pub fn circular_quartiles(angles: &[f64]) -> Result<CircQuartiles> {
    let median = circular_median(angles)?;
    let mut dev: Vec<f64> = angles.iter().map(|&a| wrap_pi(a - median)).collect();
    dev.sort_by(f64::total_cmp);
    Ok(CircQuartiles {
        q1: wrap_pi(median + quantile_sorted(&dev, 0.25)),
        median,
        q3: wrap_pi(median + quantile_sorted(&dev, 0.75)),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelSummary {
    pub level: String,
    pub n: usize,
    /// `None` for an empty level.
    pub summary: Option<CircSummary>,
    pub quartiles: Option<CircQuartiles>,
}

/// Per-level circular summaries of `residuals`, split by factor `factor`.
pub fn circ_summary_by_level(
    sample: &MixedSample,
    residuals: &[f64],
    factor: usize,
) -> Result<Vec<LevelSummary>> {
    if residuals.len() != sample.n() {
        return Err(Error::invalid(format!(
            "{} residuals for {} rows",
            residuals.len(),
            sample.n()
        )));
    }
    if factor >= sample.k() {
        return Err(Error::invalid(format!("factor {factor} out of range")));
    }
    (0..sample.level_counts()[factor])
        .map(|v| {
            let vals: Vec<f64> = sample
                .rows_at_level(factor, v as u32)
                .into_iter()
                .map(|i| residuals[i])
                .collect();
            let (summary, quartiles) = if vals.is_empty() {
                log::warn!(
                    "level {} of factor {factor} has no rows",
                    sample.level_name(factor, v as u32)
                );
                (None, None)
            } else {
                (Some(circ_mean(&vals)?), Some(circular_quartiles(&vals)?))
            };
            Ok(LevelSummary {
                level: sample.level_name(factor, v as u32),
                n: vals.len(),
                summary,
                quartiles,
            })
        })
        .collect()
}

/// von Mises kernel density estimate evaluated on `grid`.
pub fn vm_kde(angles: &[f64], kappa: f64, grid: &[f64]) -> Result<Vec<f64>> {
    if !(kappa > 0.0 && kappa.is_finite()) {
        return Err(Error::invalid(format!(
            "concentration must be positive, got {kappa}"
        )));
    }
    if angles.is_empty() {
        return Err(Error::invalid("density estimate of an empty sample"));
    }
    let n = angles.len() as f64;
    Ok(grid
        .iter()
        .map(|&t| {
            angles
                .iter()
                .map(|&a| vonmises::density(t, a, kappa))
                .sum::<f64>()
                / n
        })
        .collect())
}
