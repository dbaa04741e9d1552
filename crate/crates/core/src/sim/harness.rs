//! Two-phase Monte Carlo benchmark of bandwidth selectors.
//!
//! Phase I averages the in-sample CASE over `n1` samples to build a risk
//! surface on a bandwidth grid. Phase II runs each selector on `n2` fresh
//! samples and scores its choice on that surface.

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dgp::DgpSpec;
use crate::angle::{cos_loss, wrap_pi};
use crate::error::{Error, Result};
use crate::estimator::{DesignKernel, Estimator, Trig};
use crate::kernels::{Bandwidths, KernelSpec};
use crate::rng::replicate_rng;
use crate::sample::MixedSample;
use crate::select::{
    geometric_grid, linear_grid, select_bootstrap, select_cv, select_rot, RotConstants, SearchSpec, Selector,
    DEFAULT_BOOTSTRAP_REPLICATES, FAILED_FIT_LOSS,
};
use crate::stats::mean;

/// Phase II samples use streams from here on, Phase I streams below it.
pub const PHASE2_STREAM: u64 = 1 << 32;

pub const DESK_N1: usize = 50;
pub const DESK_N2: usize = 200;
pub const FULL_N1: usize = 100;
pub const FULL_N2: usize = 500;
pub const DESK_H_GRID: (f64, f64, usize) = (0.02, 0.5, 15);
pub const DESK_LAMBDA_GRID: (f64, f64, usize) = (0.0, 0.35, 8);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CaseValue {
    pub value: f64,
    /// Rows whose fit failed and were charged the maximal loss.
    pub failed_rows: usize,
}

/// Mean cosine loss between `truth` and the full-sample fit at the design
/// points.
pub fn case_against(
    truth: &[f64],
    sample: &MixedSample,
    bw: &Bandwidths,
    est: &Estimator,
) -> Result<CaseValue> {
    if truth.len() != sample.n() {
        return Err(Error::invalid("one true value per row is required"));
    }
    let dk = DesignKernel::compute(sample, bw, est.kernels)?;
    let trig = Trig::new(sample.theta());
    let mut total = 0.0;
    let mut failed_rows = 0;
    for (i, &m) in truth.iter().enumerate() {
        match dk.fit(est, sample, bw, i, &trig, false) {
            Ok(f) => total += cos_loss(m, f.angle),
            Err(_) => {
                total += FAILED_FIT_LOSS;
                failed_rows += 1;
            }
        }
    }
    Ok(CaseValue {
        value: total / sample.n() as f64,
        failed_rows,
    })
}

/// CASE of the fit on `sample` against the design's true regression.
pub fn case_true(
    sample: &MixedSample,
    bw: &Bandwidths,
    spec: &DgpSpec,
    est: &Estimator,
) -> Result<CaseValue> {
    case_against(&spec.truth_at(sample), sample, bw, est)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarianceDivisor {
    #[default]
    N,
    NMinusOne,
}

impl VarianceDivisor {
    pub fn variance(self, values: &[f64]) -> f64 {
        let m = mean(values);
        let ss: f64 = values.iter().map(|v| (v - m).powi(2)).sum();
        match self {
            VarianceDivisor::N => ss / values.len() as f64,
            VarianceDivisor::NMinusOne if values.len() > 1 => ss / (values.len() - 1) as f64,
            VarianceDivisor::NMinusOne => 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskSurface {
    pub grid: SearchSpec,
    /// Mean CASE per grid candidate, in `grid.candidates()` order.
    pub values: Vec<f64>,
    pub oracle_index: usize,
    pub n1: usize,
    pub failed_rows: usize,
}

impl RiskSurface {
    pub fn oracle(&self) -> Bandwidths {
        self.grid.candidate(self.oracle_index)
    }

    pub fn oracle_value(&self) -> f64 {
        self.values[self.oracle_index]
    }

    /// Grid index nearest to `bw` and the surface value there.
    pub fn score(&self, bw: &Bandwidths) -> (usize, f64) {
        let i = self.grid.nearest_index(bw);
        (i, self.values[i])
    }
}

/// Arg-min with ties broken toward the larger bandwidth norm.
fn oracle_index(grid: &SearchSpec, values: &[f64]) -> usize {
    let best = values.iter().copied().fold(f64::INFINITY, f64::min);
    let mut winner = None::<(usize, f64)>;
    for (i, _) in values.iter().enumerate().filter(|(_, &v)| v == best) {
        let norm = grid.candidate(i).norm();
        if winner.is_none_or(|(_, wn)| norm > wn) {
            winner = Some((i, norm));
        }
    }
    winner.map_or(0, |(i, _)| i)
}

pub fn phase1_surface(
    spec: &DgpSpec,
    n1: usize,
    grid: &SearchSpec,
    seed: u64,
    est: &Estimator,
) -> Result<RiskSurface> {
    if n1 == 0 || grid.is_empty() {
        return Err(Error::invalid(
            "phase I needs at least one sample and one grid point",
        ));
    }
    let candidates = grid.candidates();
    let per_sample: Vec<Vec<CaseValue>> = (0..n1 as u64)
        .into_par_iter()
        .map(|j| {
            let sample = spec.sample_with(&mut replicate_rng(seed, j))?;
            let truth = spec.truth_at(&sample);
            candidates
                .iter()
                .map(|bw| case_against(&truth, &sample, bw, est))
                .collect()
        })
        .collect::<Result<_>>()?;
    let values: Vec<f64> = (0..candidates.len())
        .map(|g| per_sample.iter().map(|s| s[g].value).sum::<f64>() / n1 as f64)
        .collect();
    let failed_rows = per_sample.iter().flatten().map(|c| c.failed_rows).sum();
    Ok(RiskSurface {
        oracle_index: oracle_index(grid, &values),
        grid: grid.clone(),
        values,
        n1,
        failed_rows,
    })
}

/// A bandwidth selector as seen by the harness: sample and per-sample seed
/// in, bandwidths out.
pub type SelectorFn<'a> = dyn Fn(&MixedSample, u64) -> Result<Bandwidths> + Sync + 'a;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectorScore {
    pub method: String,
    pub mean_risk: f64,
    pub var_risk: f64,
    /// Surface value at the snapped selection, per evaluation sample.
    pub risks: Vec<f64>,
    /// `‖H_method‖ / ‖H_oracle‖` using the unsnapped selection.
    pub norm_ratios: Vec<f64>,
    pub selected: Vec<Bandwidths>,
    pub snapped_index: Vec<usize>,
}

/// Scores arbitrary selectors on `n2` fresh samples.
pub fn phase2_eval_with(
    spec: &DgpSpec,
    n2: usize,
    surface: &RiskSurface,
    selectors: &[(&str, &SelectorFn<'_>)],
    seed: u64,
    divisor: VarianceDivisor,
) -> Result<Vec<SelectorScore>> {
    if n2 == 0 {
        return Err(Error::invalid("phase II needs at least one sample"));
    }
    let oracle_norm = surface.oracle().norm();
    let picks: Vec<Vec<Bandwidths>> = (0..n2 as u64)
        .into_par_iter()
        .map(|j| {
            let mut rng = replicate_rng(seed, PHASE2_STREAM + j);
            let sample = spec.sample_with(&mut rng)?;
            let selector_seed: u64 = rng.random();
            selectors.iter().map(|(_, f)| f(&sample, selector_seed)).collect()
        })
        .collect::<Result<_>>()?;
    Ok(selectors
        .iter()
        .enumerate()
        .map(|(s, (name, _))| {
            let selected: Vec<Bandwidths> = picks.iter().map(|p| p[s].clone()).collect();
            let (snapped_index, risks): (Vec<usize>, Vec<f64>) =
                selected.iter().map(|bw| surface.score(bw)).unzip();
            SelectorScore {
                method: name.to_string(),
                mean_risk: mean(&risks),
                var_risk: divisor.variance(&risks),
                norm_ratios: selected.iter().map(|bw| bw.norm() / oracle_norm).collect(),
                risks,
                selected,
                snapped_index,
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarnessConfig {
    pub dgp: DgpSpec,
    pub n1: usize,
    pub n2: usize,
    pub h_grid: Vec<f64>,
    pub lambda_grid: Vec<f64>,
    pub bootstrap_replicates: usize,
    pub selectors: Vec<Selector>,
    pub rot: RotConstants,
    pub variance_divisor: VarianceDivisor,
    pub seed: u64,
}

impl HarnessConfig {
    pub fn desk(dgp: DgpSpec, seed: u64) -> Self {
        let (h0, h1, hc) = DESK_H_GRID;
        let (l0, l1, lc) = DESK_LAMBDA_GRID;
        Self {
            dgp,
            n1: DESK_N1,
            n2: DESK_N2,
            h_grid: geometric_grid(h0, h1, hc),
            lambda_grid: linear_grid(l0, l1, lc),
            bootstrap_replicates: DEFAULT_BOOTSTRAP_REPLICATES,
            selectors: Selector::ALL.to_vec(),
            rot: RotConstants::default(),
            variance_divisor: VarianceDivisor::N,
            seed,
        }
    }

    /// Desk grid with the larger sample counts.
    pub fn full(dgp: DgpSpec, seed: u64) -> Self {
        Self {
            n1: FULL_N1,
            n2: FULL_N2,
            ..Self::desk(dgp, seed)
        }
    }

    pub fn search(&self) -> Result<SearchSpec> {
        SearchSpec::new(vec![self.h_grid.clone()], vec![self.lambda_grid.clone()])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarnessReport {
    pub config: HarnessConfig,
    pub surface: RiskSurface,
    pub scores: Vec<SelectorScore>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub kappa: f64,
    pub n: usize,
    pub method: String,
    pub mean: f64,
    pub variance: f64,
}

impl HarnessReport {
    pub fn score(&self, method: Selector) -> Option<&SelectorScore> {
        self.scores.iter().find(|s| s.method == method.as_str())
    }

    /// One row per selector plus the oracle row (variance 0).
    pub fn table_rows(&self) -> Vec<TableRow> {
        let row = |method: &str, mean: f64, variance: f64| TableRow {
            kappa: self.config.dgp.kappa,
            n: self.config.dgp.n,
            method: method.to_string(),
            mean,
            variance,
        };
        self.scores
            .iter()
            .map(|s| row(&s.method, s.mean_risk, s.var_risk))
            .chain(std::iter::once(row("oracle", self.surface.oracle_value(), 0.0)))
            .collect()
    }

    /// Selector risks strictly below the oracle value (always zero unless the
    /// surface was tampered with).
    pub fn dominance_violations(&self) -> usize {
        let oracle = self.surface.oracle_value();
        self.scores
            .iter()
            .flat_map(|s| &s.risks)
            .filter(|&&r| r < oracle)
            .count()
    }
}

/// Phase I and Phase II with the NW estimator and Gaussian/Aitchison–Aitken
/// kernels.
pub fn run(config: &HarnessConfig) -> Result<HarnessReport> {
    let est = Estimator::nw(KernelSpec::gaussian());
    let search = config.search()?;
    let surface = phase1_surface(&config.dgp, config.n1, &search, config.seed, &est)?;
    log::info!(
        "phase I done: oracle {:?} at {:.5}",
        surface.oracle(),
        surface.oracle_value()
    );
    let b = config.bootstrap_replicates;
    let cv = |s: &MixedSample, _: u64| Ok(select_cv(s, &search, &est)?.bandwidths);
    let boot = |s: &MixedSample, seed: u64| {
        Ok(select_bootstrap(s, b, &search.clone().with_seed(seed), &est)?
            .selection
            .bandwidths)
    };
    let rot = |s: &MixedSample, _: u64| Ok(select_rot(s, &config.rot)?.bandwidths);
    let selectors: Vec<(&str, &SelectorFn<'_>)> = config
        .selectors
        .iter()
        .map(|sel| -> (&str, &SelectorFn<'_>) {
            match sel {
                Selector::Cv => ("cv", &cv),
                Selector::Boot => ("boot", &boot),
                Selector::Rot => ("rot", &rot),
            }
        })
        .collect();
    let scores = phase2_eval_with(
        &config.dgp,
        config.n2,
        &surface,
        &selectors,
        config.seed,
        config.variance_divisor,
    )?;
    Ok(HarnessReport {
        config: config.clone(),
        surface,
        scores,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McBias {
    pub mean: f64,
    /// Monte Carlo standard error of `mean`.
    pub se: f64,
    pub replicates: usize,
}

/// Monte Carlo mean of `wrap(m̂(x, z) - m(x, z))` over fresh samples.
#[allow(clippy::too_many_arguments)]
pub fn monte_carlo_bias(
    spec: &DgpSpec,
    x: f64,
    z: u32,
    bw: &Bandwidths,
    est: &Estimator,
    replicates: usize,
    seed: u64,
) -> Result<McBias> {
    if replicates < 2 {
        return Err(Error::invalid("Monte Carlo bias needs at least two replicates"));
    }
    let truth = spec.regression.eval(x, z);
    let errors: Vec<f64> = (0..replicates as u64)
        .into_par_iter()
        .map(|r| {
            let sample = spec.sample_with(&mut replicate_rng(seed, r))?;
            Ok(wrap_pi(est.fit_point(&sample, bw, &[x], &[z])?.angle - truth))
        })
        .collect::<Result<_>>()?;
    let m = mean(&errors);
    let sd = VarianceDivisor::NMinusOne.variance(&errors).sqrt();
    Ok(McBias {
        mean: m,
        se: sd / (replicates as f64).sqrt(),
        replicates,
    })
}

/// Least-squares slope of `ln y` on `ln x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::invalid("slope needs at least two paired points"));
    }
    if x.iter().chain(y).any(|v| !(*v > 0.0)) {
        return Err(Error::invalid("log-log slope needs positive values"));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let (mx, my) = (mean(&lx), mean(&ly));
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    Ok(sxy / sxx)
}
