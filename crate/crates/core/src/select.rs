//! Bandwidth selectors: leave-one-out cross-validation, the residual
//! bootstrap criterion, and the rule of thumb.

use log::warn;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::angle::{cos_loss, wrap_2pi};
use crate::bands::centered_residuals;
use crate::error::{Error, Result};
use crate::estimator::{DesignKernel, Estimator, Trig};
use crate::kernels::Bandwidths;
use crate::rng::replicate_rng;
use crate::sample::MixedSample;
use crate::stats::{iqr, sample_sd};

/// Loss charged to a fit that could not be computed.
pub const FAILED_FIT_LOSS: f64 = 2.0;

pub const DEFAULT_H_COUNT: usize = 20;
pub const DEFAULT_LAMBDA_COUNT: usize = 11;
pub const DEFAULT_H_RANGE: (f64, f64) = (0.05, 2.0);
pub const DEFAULT_BOOTSTRAP_REPLICATES: usize = 100;

const GOLDEN_ITERATIONS: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Selector {
    Cv,
    Boot,
    Rot,
}

impl Selector {
    pub const ALL: [Selector; 3] = [Selector::Cv, Selector::Boot, Selector::Rot];

    pub fn as_str(self) -> &'static str {
        match self {
            Selector::Cv => "cv",
            Selector::Boot => "boot",
            Selector::Rot => "rot",
        }
    }
}

impl std::fmt::Display for Selector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Selector {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cv" => Ok(Selector::Cv),
            "boot" | "bootstrap" => Ok(Selector::Boot),
            "rot" => Ok(Selector::Rot),
            other => Err(Error::invalid(format!(
                "unknown selector '{other}' (expected cv, boot or rot)"
            ))),
        }
    }
}

pub fn geometric_grid(min: f64, max: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![min],
        _ => {
            let step = (max / min).ln() / (count - 1) as f64;
            (0..count)
                .map(|i| {
                    if i + 1 == count {
                        max
                    } else {
                        min * (step * i as f64).exp()
                    }
                })
                .collect()
        }
    }
}

pub fn linear_grid(min: f64, max: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![min],
        _ => (0..count)
            .map(|i| min + (max - min) * i as f64 / (count - 1) as f64)
            .collect(),
    }
}

/// Candidate bandwidths: the cartesian product of one value list per
/// coordinate, scanned exhaustively.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpec {
    pub h_values: Vec<Vec<f64>>,
    pub lambda_values: Vec<Vec<f64>>,
    /// Golden-section refinement inside the winning grid cell.
    #[serde(default)]
    pub refine: bool,
    #[serde(default)]
    pub seed: u64,
}

impl SearchSpec {
    pub fn new(h_values: Vec<Vec<f64>>, lambda_values: Vec<Vec<f64>>) -> Result<Self> {
        let s = Self {
            h_values,
            lambda_values,
            refine: false,
            seed: 0,
        };
        s.validate()?;
        Ok(s)
    }

    /// Geometric h-grid over `[0.05 σ̂ⱼ, 2 σ̂ⱼ]` and linear λ-grid over
    /// `[0, (c - 1)/c]`.
    pub fn with_counts(sample: &MixedSample, h_count: usize, lambda_count: usize) -> Result<Self> {
        let h_values = (0..sample.k())
            .map(|j| {
                let sd = sample_sd(&sample.x_column(j))?;
                if !(sd > 0.0) {
                    return Err(Error::invalid(format!(
                        "continuous covariate {j} has zero variance"
                    )));
                }
                Ok(geometric_grid(
                    DEFAULT_H_RANGE.0 * sd,
                    DEFAULT_H_RANGE.1 * sd,
                    h_count,
                ))
            })
            .collect::<Result<_>>()?;
        let lambda_values = sample
            .level_counts()
            .iter()
            .map(|&c| linear_grid(0.0, (c as f64 - 1.0) / c as f64, lambda_count))
            .collect();
        Self::new(h_values, lambda_values)
    }

    pub fn default_for(sample: &MixedSample) -> Result<Self> {
        Self::with_counts(sample, DEFAULT_H_COUNT, DEFAULT_LAMBDA_COUNT)
    }

    pub fn single(bw: &Bandwidths) -> Self {
        Self {
            h_values: bw.h.iter().map(|&h| vec![h]).collect(),
            lambda_values: bw.lambda.iter().map(|&l| vec![l]).collect(),
            refine: false,
            seed: 0,
        }
    }

    pub fn with_refine(mut self, refine: bool) -> Self {
        self.refine = refine;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    fn validate(&self) -> Result<()> {
        if self
            .h_values
            .iter()
            .chain(&self.lambda_values)
            .any(|v| v.is_empty())
        {
            return Err(Error::invalid("search grids must be nonempty"));
        }
        if self
            .h_values
            .iter()
            .flatten()
            .any(|&h| !(h > 0.0 && h.is_finite()))
        {
            return Err(Error::invalid("search h values must be positive and finite"));
        }
        if self
            .lambda_values
            .iter()
            .flatten()
            .any(|&l| !(0.0..=1.0).contains(&l))
        {
            return Err(Error::invalid("search lambda values must lie in [0, 1]"));
        }
        Ok(())
    }

    fn axes(&self) -> impl Iterator<Item = &Vec<f64>> {
        self.h_values.iter().chain(&self.lambda_values)
    }

    pub fn len(&self) -> usize {
        self.axes().map(Vec::len).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn at(&self, mut index: usize) -> Bandwidths {
        let axes: Vec<&Vec<f64>> = self.axes().collect();
        let mut coords = vec![0.0; axes.len()];
        for (a, axis) in axes.iter().enumerate().rev() {
            coords[a] = axis[index % axis.len()];
            index /= axis.len();
        }
        let lambda = coords.split_off(self.h_values.len());
        Bandwidths { h: coords, lambda }
    }

    /// Every grid candidate; the last λ coordinate varies fastest.
    pub fn candidates(&self) -> Vec<Bandwidths> {
        (0..self.len()).map(|i| self.at(i)).collect()
    }

    /// Index of the grid point nearest to `bw`, coordinate by coordinate
    /// (log scale for h, linear for λ).
    pub fn nearest_index(&self, bw: &Bandwidths) -> usize {
        let nearest = |axis: &[f64], v: f64, log: bool| {
            let d = |g: f64| {
                if log {
                    (g.ln() - v.ln()).abs()
                } else {
                    (g - v).abs()
                }
            };
            (0..axis.len())
                .min_by(|&a, &b| d(axis[a]).total_cmp(&d(axis[b])))
                .unwrap_or(0)
        };
        let mut index = 0;
        for (axis, &v) in self.h_values.iter().zip(&bw.h) {
            index = index * axis.len() + nearest(axis, v, true);
        }
        for (axis, &v) in self.lambda_values.iter().zip(&bw.lambda) {
            index = index * axis.len() + nearest(axis, v, false);
        }
        index
    }

    pub fn candidate(&self, index: usize) -> Bandwidths {
        self.at(index)
    }

    fn check_dims(&self, sample: &MixedSample) -> Result<()> {
        if self.h_values.len() != sample.k() || self.lambda_values.len() != sample.p() {
            return Err(Error::invalid("search space dimensions do not match the sample"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub bandwidths: Bandwidths,
    pub criterion: f64,
    /// Winning grid index before any refinement.
    pub grid_index: usize,
    pub refined: bool,
    pub boundary_hits: Vec<String>,
    pub candidates_evaluated: usize,
}

/// Leave-one-out cosine prediction loss.
pub fn cv_loss(sample: &MixedSample, bw: &Bandwidths, est: &Estimator) -> Result<f64> {
    let loo = est.loo_predictions(sample, bw)?;
    if loo.iter().all(Option::is_none) {
        return Err(Error::SelectionInfeasible(format!(
            "every leave-one-out fit is degenerate at H = {bw}"
        )));
    }
    let total: f64 = loo
        .iter()
        .zip(sample.theta())
        .map(|(f, &t)| f.map_or(FAILED_FIT_LOSS, |f| cos_loss(t, f.angle)))
        .sum();
    Ok(total / sample.n() as f64)
}

pub fn select_cv(sample: &MixedSample, search: &SearchSpec, est: &Estimator) -> Result<Selection> {
    search.check_dims(sample)?;
    scan(search, "cv", |bw| cv_loss(sample, bw, est))
}

/// Minimizes `criterion` over the grid, then optionally refines. Candidates
/// whose criterion is infeasible are skipped; ties go to the lowest index.
fn scan<F>(search: &SearchSpec, name: &str, criterion: F) -> Result<Selection>
where
    F: Fn(&Bandwidths) -> Result<f64> + Sync,
{
    let candidates = search.candidates();
    let values: Vec<f64> = candidates
        .par_iter()
        .map(|bw| match criterion(bw) {
            Ok(v) => Ok(v),
            Err(Error::SelectionInfeasible(_)) => Ok(f64::INFINITY),
            Err(e) => Err(e),
        })
        .collect::<Result<_>>()?;
    let (grid_index, &best) = values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1).then(a.0.cmp(&b.0)))
        .expect("nonempty search grid");
    if !best.is_finite() {
        return Err(Error::SelectionInfeasible(format!(
            "{name} criterion infeasible at every candidate"
        )));
    }
    let mut bandwidths = candidates[grid_index].clone();
    let mut value = best;
    let mut refined = false;
    if search.refine {
        let (bw, v) = refine(search, &bandwidths, value, &criterion);
        refined = v < value;
        bandwidths = bw;
        value = v;
    }
    let boundary_hits = boundary_hits(search, &candidates[grid_index]);
    for hit in &boundary_hits {
        warn!("{name} selection on the search boundary: {hit}");
    }
    Ok(Selection {
        bandwidths,
        criterion: value,
        grid_index,
        refined,
        boundary_hits,
        candidates_evaluated: candidates.len(),
    })
}

fn boundary_hits(search: &SearchSpec, bw: &Bandwidths) -> Vec<String> {
    let mut hits = Vec::new();
    for (j, (axis, &h)) in search.h_values.iter().zip(&bw.h).enumerate() {
        if axis.len() > 1 && (h == axis[0] || h == axis[axis.len() - 1]) {
            hits.push(format!("h[{j}] = {h}"));
        }
    }
    for (l, (axis, &v)) in search.lambda_values.iter().zip(&bw.lambda).enumerate() {
        if axis.len() > 1 && v == axis[axis.len() - 1] {
            hits.push(format!("lambda[{l}] = {v}"));
        }
    }
    hits
}

type Transform = fn(f64) -> f64;

/// One coordinate-wise golden-section pass, each coordinate searched
/// between the neighbors of the current grid value.
fn refine<F>(search: &SearchSpec, start: &Bandwidths, start_value: f64, criterion: &F) -> (Bandwidths, f64)
where
    F: Fn(&Bandwidths) -> Result<f64>,
{
    let mut best = start.clone();
    let mut best_value = start_value;
    let k = search.h_values.len();
    let eval = |bw: &Bandwidths| criterion(bw).unwrap_or(f64::INFINITY);
    for (a, axis) in search.axes().enumerate() {
        let is_h = a < k;
        let current = if is_h { best.h[a] } else { best.lambda[a - k] };
        let Some(pos) = axis.iter().position(|&v| v == current) else {
            continue;
        };
        let lo = axis[pos.saturating_sub(1)];
        let hi = axis[(pos + 1).min(axis.len() - 1)];
        if lo == hi {
            continue;
        }
        let (to, from): (Transform, Transform) = if is_h { (f64::ln, f64::exp) } else { (|v| v, |v| v) };
        let with = |t: f64| {
            let mut bw = best.clone();
            if is_h {
                bw.h[a] = from(t);
            } else {
                bw.lambda[a - k] = from(t).clamp(0.0, 1.0);
            }
            bw
        };
        let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
        let (mut x0, mut x3) = (to(lo), to(hi));
        let mut x1 = x3 - inv_phi * (x3 - x0);
        let mut x2 = x0 + inv_phi * (x3 - x0);
        let mut f1 = eval(&with(x1));
        let mut f2 = eval(&with(x2));
        for _ in 0..GOLDEN_ITERATIONS {
            if f1 <= f2 {
                x3 = x2;
                x2 = x1;
                f2 = f1;
                x1 = x3 - inv_phi * (x3 - x0);
                f1 = eval(&with(x1));
            } else {
                x0 = x1;
                x1 = x2;
                f1 = f2;
                x2 = x0 + inv_phi * (x3 - x0);
                f2 = eval(&with(x2));
            }
        }
        let (t, f) = if f1 <= f2 { (x1, f1) } else { (x2, f2) };
        if f < best_value {
            best = with(t);
            best_value = f;
        }
    }
    (best, best_value)
}

/// Pilot fit and resampled pseudo-responses shared by every candidate
/// bandwidth (common random numbers).
#[derive(Debug, Clone)]
pub struct BootstrapDesign {
    pilot: Vec<f64>,
    pseudo: Vec<Trig>,
}

impl BootstrapDesign {
    /// Residuals from `h0`, reference fit from `h1`, `b` resamples.
    pub fn new(
        sample: &MixedSample,
        h0: &Bandwidths,
        h1: &Bandwidths,
        b: usize,
        seed: u64,
        est: &Estimator,
    ) -> Result<Self> {
        if b == 0 {
            return Err(Error::invalid("bootstrap needs at least one replicate"));
        }
        let fitted0: Vec<f64> = est
            .fitted_at_design(sample, h0)?
            .iter()
            .map(|f| f.angle)
            .collect();
        let residuals = centered_residuals(sample.theta(), &fitted0)?;
        let pilot: Vec<f64> = if h1 == h0 {
            fitted0
        } else {
            est.fitted_at_design(sample, h1)?
                .iter()
                .map(|f| f.angle)
                .collect()
        };
        let pseudo = (0..b)
            .map(|r| Trig::new(&pseudo_responses(&pilot, &residuals, seed, r as u64)))
            .collect();
        Ok(Self { pilot, pseudo })
    }

    pub fn replicates(&self) -> usize {
        self.pseudo.len()
    }

    pub fn pilot(&self) -> &[f64] {
        &self.pilot
    }

    /// Bootstrap risk at `bw`.
    pub fn risk(&self, sample: &MixedSample, bw: &Bandwidths, est: &Estimator) -> Result<BootstrapRisk> {
        let dk = DesignKernel::compute(sample, bw, est.kernels)?;
        let per_replicate: Vec<(f64, usize)> = self
            .pseudo
            .par_iter()
            .map(|trig| {
                let mut total = 0.0;
                let mut failed = 0;
                for (i, &target) in self.pilot.iter().enumerate() {
                    match dk.fit(est, sample, bw, i, trig, false) {
                        Ok(f) => total += cos_loss(target, f.angle),
                        Err(_) => {
                            total += FAILED_FIT_LOSS;
                            failed += 1;
                        }
                    }
                }
                (total / sample.n() as f64, failed)
            })
            .collect();
        let value = per_replicate.iter().map(|r| r.0).sum::<f64>() / per_replicate.len() as f64;
        let failed_fits = per_replicate.iter().map(|r| r.1).sum();
        Ok(BootstrapRisk { value, failed_fits })
    }
}

/// `wrap(pilot_i + ε̃*_i)` with residual indices drawn from stream `stream`.
pub(crate) fn pseudo_responses(pilot: &[f64], residuals: &[f64], seed: u64, stream: u64) -> Vec<f64> {
    let mut rng = replicate_rng(seed, stream);
    let n = residuals.len();
    pilot
        .iter()
        .map(|&m| wrap_2pi(m + residuals[rng.random_range(0..n)]))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapRisk {
    pub value: f64,
    /// Refits charged the maximal loss.
    pub failed_fits: usize,
}

#[allow(clippy::too_many_arguments)]
pub fn bootstrap_risk(
    sample: &MixedSample,
    bw: &Bandwidths,
    h0: &Bandwidths,
    h1: &Bandwidths,
    b: usize,
    seed: u64,
    est: &Estimator,
) -> Result<BootstrapRisk> {
    BootstrapDesign::new(sample, h0, h1, b, seed, est)?.risk(sample, bw, est)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapSelection {
    pub selection: Selection,
    /// Cross-validation pilot, used for both `H0` and `H1`.
    pub pilot: Selection,
    pub replicates: usize,
}

pub fn select_bootstrap(
    sample: &MixedSample,
    b: usize,
    search: &SearchSpec,
    est: &Estimator,
) -> Result<BootstrapSelection> {
    let pilot = select_cv(sample, search, est)?;
    let selection = select_bootstrap_with_pilot(sample, b, search, est, &pilot.bandwidths)?;
    Ok(BootstrapSelection {
        selection,
        pilot,
        replicates: b,
    })
}

/// Bootstrap selection with a caller-supplied pilot for both `H0` and `H1`.
pub fn select_bootstrap_with_pilot(
    sample: &MixedSample,
    b: usize,
    search: &SearchSpec,
    est: &Estimator,
    pilot: &Bandwidths,
) -> Result<Selection> {
    search.check_dims(sample)?;
    let design = BootstrapDesign::new(sample, pilot, pilot, b, search.seed, est)?;
    scan(search, "bootstrap", |bw| Ok(design.risk(sample, bw, est)?.value))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RotConstants {
    pub c_h: f64,
    pub c_lambda: f64,
    pub gamma: f64,
}

impl Default for RotConstants {
    fn default() -> Self {
        Self {
            c_h: 1.06,
            c_lambda: 1.0,
            gamma: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RotSelection {
    pub bandwidths: Bandwidths,
    /// Factors whose λ was clamped to `(c - 1)/c`.
    pub clamped: Vec<usize>,
}

/// `hⱼ = c_h σ̂ⱼ n^{-1/5}`, `λₗ = c_λ cₗ^{-γ} n^{-1/5}`.
pub fn select_rot(sample: &MixedSample, constants: &RotConstants) -> Result<RotSelection> {
    if [constants.c_h, constants.c_lambda, constants.gamma]
        .iter()
        .any(|c| !(*c > 0.0 && c.is_finite()))
    {
        return Err(Error::invalid("rule-of-thumb constants must be positive"));
    }
    if sample.n() < 2 {
        return Err(Error::invalid("rule of thumb needs at least two observations"));
    }
    let rate = (sample.n() as f64).powf(-0.2);
    let h = (0..sample.k())
        .map(|j| {
            let sd = sample_sd(&sample.x_column(j))?;
            if !(sd > 0.0) {
                return Err(Error::invalid(format!(
                    "continuous covariate {j} has zero variance"
                )));
            }
            Ok(constants.c_h * sd * rate)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut clamped = Vec::new();
    let lambda = sample
        .level_counts()
        .iter()
        .enumerate()
        .map(|(l, &c)| {
            let raw = constants.c_lambda * (c as f64).powf(-constants.gamma) * rate;
            let cap = (c as f64 - 1.0) / c as f64;
            if raw > cap {
                warn!("rule-of-thumb lambda[{l}] = {raw} clamped to {cap}");
                clamped.push(l);
                cap
            } else {
                raw
            }
        })
        .collect();
    Ok(RotSelection {
        bandwidths: Bandwidths::new(h, lambda)?,
        clamped,
    })
}

/// `1.06 · min(s, IQR/1.349) · n^{-1/5}`.
pub fn robust_rot_univariate(x: &[f64]) -> Result<f64> {
    let s = sample_sd(x)?;
    let scale = s.min(iqr(x) / 1.349);
    if !(scale > 0.0) {
        return Err(Error::invalid("robust scale of the covariate is zero"));
    }
    Ok(1.06 * scale * (x.len() as f64).powf(-0.2))
}
