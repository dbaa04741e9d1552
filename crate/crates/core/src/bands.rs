//! Simultaneous bootstrap confidence bands over a grid in one continuous
//! covariate, per categorical level, with the pointwise level calibrated by
//! bisection between the Bonferroni and nominal values.

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::angle::{circ_mean, wrap_pi};
use crate::error::{Error, Result};
use crate::estimator::{Estimator, Trig};
use crate::kernels::{check_point, degenerate_threshold, kernel_row, max_kernel_value, Bandwidths};
use crate::sample::MixedSample;
use crate::select::pseudo_responses;
use crate::stats::QuantileRule;

/// Fraction of dropped replicates above which a warning is logged.
pub const DROP_WARN_FRACTION: f64 = 0.05;
/// Fraction of dropped replicates above which the band is abandoned.
pub const DROP_ABORT_FRACTION: f64 = 0.20;

/// Quantile convention for the band envelope.
pub const BAND_QUANTILE_RULE: QuantileRule = QuantileRule::Interpolated;

/// Slack for comparing an inclusion fraction against `1 - α`.
const COVERAGE_EPS: f64 = 1e-12;

/// Circular residuals `wrap(Θᵢ - m̂ᵢ)` recentered at their mean direction.
pub fn centered_residuals(theta: &[f64], fitted: &[f64]) -> Result<Vec<f64>> {
    if theta.len() != fitted.len() {
        return Err(Error::invalid("responses and fitted values differ in length"));
    }
    let raw: Vec<f64> = theta.iter().zip(fitted).map(|(t, m)| wrap_pi(t - m)).collect();
    let summary = circ_mean(&raw)?;
    let mean = summary.mean_direction.ok_or_else(|| {
        Error::BootstrapAborted(format!(
            "residual mean direction undefined (resultant length {:e})",
            summary.resultant_length
        ))
    })?;
    Ok(raw.iter().map(|r| wrap_pi(r - mean)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandSettings {
    pub replicates: usize,
    pub alpha: f64,
    pub delta_tol: f64,
    pub max_iter: usize,
    pub seed: u64,
    #[serde(default)]
    pub quantile_rule: QuantileRule,
}

impl Default for BandSettings {
    fn default() -> Self {
        Self {
            replicates: 200,
            alpha: 0.05,
            delta_tol: 0.005,
            max_iter: 30,
            seed: 0,
            quantile_rule: BAND_QUANTILE_RULE,
        }
    }
}

/// Bootstrap deviations `Δⱼ⁽ᵇ⁾`, one row per retained replicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaMatrix {
    pub rows: Vec<Vec<f64>>,
    pub dropped: usize,
}

impl DeltaMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let g = rows.first().map_or(0, Vec::len);
        if g == 0 || rows.iter().any(|r| r.len() != g) {
            return Err(Error::invalid("delta rows must be nonempty and of equal length"));
        }
        Ok(Self { rows, dropped: 0 })
    }

    pub fn replicates(&self) -> usize {
        self.rows.len()
    }

    pub fn grid_len(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }

    fn sorted_columns(&self) -> Vec<Vec<f64>> {
        (0..self.grid_len())
            .map(|j| {
                let mut col: Vec<f64> = self.rows.iter().map(|r| r[j]).collect();
                col.sort_by(f64::total_cmp);
                col
            })
            .collect()
    }
}

/// Resampled refits on `grid × {level}` relative to the full-sample fit.
///
/// Returns the deviations and the full-sample fit on the grid.
pub fn bootstrap_deltas(
    sample: &MixedSample,
    bw: &Bandwidths,
    est: &Estimator,
    level: &[u32],
    grid: &[f64],
    replicates: usize,
    seed: u64,
) -> Result<(DeltaMatrix, Vec<f64>)> {
    if sample.k() != 1 {
        return Err(Error::invalid("bands support exactly one continuous covariate"));
    }
    if grid.is_empty() {
        return Err(Error::invalid("band grid is empty"));
    }
    if replicates == 0 {
        return Err(Error::invalid("bands need at least one replicate"));
    }
    bw.validate_for(sample)?;
    for &x in grid {
        check_point(sample, &[x], level)?;
    }
    let fitted: Vec<f64> = est
        .fitted_at_design(sample, bw)?
        .iter()
        .map(|f| f.angle)
        .collect();
    let residuals = centered_residuals(sample.theta(), &fitted)?;
    let rows: Vec<Vec<f64>> = grid
        .iter()
        .map(|&x| kernel_row(sample, &[x], level, bw, est.kernels))
        .collect();
    let threshold = degenerate_threshold(sample.n(), max_kernel_value(sample, bw, est.kernels));
    let fit_grid = |trig: &Trig| -> Result<Vec<f64>> {
        rows.iter()
            .zip(grid)
            .map(|(row, &x)| {
                est.fit_from_row(sample, bw, row, trig, None, threshold, &[x], level)
                    .map(|f| f.angle)
            })
            .collect()
    };
    let center = fit_grid(&Trig::new(sample.theta()))?;
    let outcomes: Vec<Option<Vec<f64>>> = (0..replicates as u64)
        .into_par_iter()
        .map(|b| {
            let trig = Trig::new(&pseudo_responses(&fitted, &residuals, seed, b));
            fit_grid(&trig)
                .ok()
                .map(|star| star.iter().zip(&center).map(|(s, c)| wrap_pi(s - c)).collect())
        })
        .collect();
    let dropped = outcomes.iter().filter(|o| o.is_none()).count();
    let fraction = dropped as f64 / replicates as f64;
    if fraction > DROP_ABORT_FRACTION {
        return Err(Error::BootstrapAborted(format!(
            "{dropped} of {replicates} replicates had degenerate refits"
        )));
    }
    if fraction > DROP_WARN_FRACTION {
        warn!("{dropped} of {replicates} band replicates dropped for degenerate refits");
    }
    let rows = outcomes.into_iter().flatten().collect();
    Ok((DeltaMatrix { rows, dropped }, center))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CalibrationStatus {
    /// Even the Bonferroni level undercovers; `α/G` returned.
    BonferroniSufficient,
    /// The nominal level already covers; `α` returned.
    NominalSufficient,
    Bisected,
    /// Iteration cap hit; the last level known to cover is returned.
    MaxIterReached,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub alpha_final: f64,
    pub p_in: f64,
    pub status: CalibrationStatus,
    pub iterations: usize,
}

/// Per-grid-point quantile envelope at pointwise level `alpha_prime`.
fn envelope(sorted: &[Vec<f64>], alpha_prime: f64, rule: QuantileRule) -> Vec<(f64, f64)> {
    sorted
        .iter()
        .map(|col| {
            (
                rule.eval_sorted(col, alpha_prime / 2.0),
                rule.eval_sorted(col, 1.0 - alpha_prime / 2.0),
            )
        })
        .collect()
}

fn inclusion(deltas: &DeltaMatrix, env: &[(f64, f64)]) -> f64 {
    let inside = deltas
        .rows
        .iter()
        .filter(|row| row.iter().zip(env).all(|(d, (lo, hi))| d >= lo && d <= hi))
        .count();
    inside as f64 / deltas.replicates() as f64
}

/// Fraction of replicates inside the envelope at every grid point.
pub fn inclusion_fraction(deltas: &DeltaMatrix, alpha_prime: f64, rule: QuantileRule) -> f64 {
    inclusion(deltas, &envelope(&deltas.sorted_columns(), alpha_prime, rule))
}

/// Calibration with the default quantile convention.
pub fn calibrate_alpha(
    deltas: &DeltaMatrix,
    alpha: f64,
    delta_tol: f64,
    max_iter: usize,
) -> Result<Calibration> {
    calibrate_alpha_with_rule(deltas, alpha, delta_tol, max_iter, BAND_QUANTILE_RULE)
}

pub fn calibrate_alpha_with_rule(
    deltas: &DeltaMatrix,
    alpha: f64,
    delta_tol: f64,
    max_iter: usize,
    rule: QuantileRule,
) -> Result<Calibration> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    if deltas.replicates() < 2 {
        return Err(Error::invalid("calibration needs at least two replicates"));
    }
    if !(delta_tol > 0.0) {
        return Err(Error::invalid("calibration tolerance must be positive"));
    }
    let sorted = deltas.sorted_columns();
    let p = |a: f64| inclusion(deltas, &envelope(&sorted, a, rule));
    let target = 1.0 - alpha;
    let covers = |v: f64| v >= target - COVERAGE_EPS;
    let mut lo = alpha / deltas.grid_len() as f64;
    let mut hi = alpha;
    let p_lo = p(lo);
    if !covers(p_lo) {
        return Ok(Calibration {
            alpha_final: lo,
            p_in: p_lo,
            status: CalibrationStatus::BonferroniSufficient,
            iterations: 0,
        });
    }
    let p_hi = p(hi);
    if covers(p_hi) {
        return Ok(Calibration {
            alpha_final: hi,
            p_in: p_hi,
            status: CalibrationStatus::NominalSufficient,
            iterations: 0,
        });
    }
    let mut p_low_side = p_lo;
    for iter in 1..=max_iter {
        let mid = 0.5 * (lo + hi);
        let pm = p(mid);
        if (pm - target).abs() < delta_tol {
            return Ok(Calibration {
                alpha_final: mid,
                p_in: pm,
                status: CalibrationStatus::Bisected,
                iterations: iter,
            });
        }
        if covers(pm) {
            lo = mid;
            p_low_side = pm;
        } else {
            hi = mid;
        }
    }
    Ok(Calibration {
        alpha_final: lo,
        p_in: p_low_side,
        status: CalibrationStatus::MaxIterReached,
        iterations: max_iter,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandResult {
    pub level: Vec<u32>,
    pub grid: Vec<f64>,
    pub center: Vec<f64>,
    pub lower_offset: Vec<f64>,
    pub upper_offset: Vec<f64>,
    /// `center + lower_offset`, wrapped to (−π, π].
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub alpha_final: f64,
    pub p_in_achieved: f64,
    pub calibration_status: CalibrationStatus,
    pub iterations: usize,
    pub replicates_used: usize,
    pub replicates_dropped: usize,
}

pub fn simultaneous_band(
    sample: &MixedSample,
    bw: &Bandwidths,
    est: &Estimator,
    level: &[u32],
    grid: &[f64],
    settings: &BandSettings,
) -> Result<BandResult> {
    let (deltas, center) =
        bootstrap_deltas(sample, bw, est, level, grid, settings.replicates, settings.seed)?;
    let cal = calibrate_alpha_with_rule(
        &deltas,
        settings.alpha,
        settings.delta_tol,
        settings.max_iter,
        settings.quantile_rule,
    )?;
    let env = envelope(&deltas.sorted_columns(), cal.alpha_final, settings.quantile_rule);
    let lower_offset: Vec<f64> = env.iter().map(|e| e.0).collect();
    let upper_offset: Vec<f64> = env.iter().map(|e| e.1).collect();
    Ok(BandResult {
        level: level.to_vec(),
        grid: grid.to_vec(),
        lower: center
            .iter()
            .zip(&lower_offset)
            .map(|(c, o)| wrap_pi(c + o))
            .collect(),
        upper: center
            .iter()
            .zip(&upper_offset)
            .map(|(c, o)| wrap_pi(c + o))
            .collect(),
        center,
        lower_offset,
        upper_offset,
        alpha_final: cal.alpha_final,
        p_in_achieved: inclusion(&deltas, &env),
        calibration_status: cal.status,
        iterations: cal.iterations,
        replicates_used: deltas.replicates(),
        replicates_dropped: deltas.dropped,
    })
}
