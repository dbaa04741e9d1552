use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use circreg::estimator::Method;
use circreg::select::Selector;
use circreg::sim::Regression;

#[derive(Debug, Parser)]
#[command(name = "circreg", version, about = "Kernel regression for circular responses")]
pub struct Cli {
    /// Master seed for every random stream in the run.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Worker threads (results do not depend on this).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// TOML run configuration; command-line flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit the regression and write fitted curves per condition.
    Fit(DataArgs),
    /// Select bandwidths and report them.
    Bandwidth(DataArgs),
    /// Simultaneous bootstrap confidence bands per condition.
    Bands(BandArgs),
    /// Goodness of fit, residual uniformity tests and summaries.
    Diagnose(DiagnoseArgs),
    /// Two-phase Monte Carlo comparison of the selectors.
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// Trial-level CSV.
    #[arg(long)]
    pub input: Option<PathBuf>,

    /// TOML column mapping for the input.
    #[arg(long)]
    pub schema: Option<PathBuf>,

    /// Comma-separated continuous predictors: target_distance, distance_error.
    #[arg(long, value_delimiter = ',')]
    pub predictors: Option<Vec<String>>,

    #[arg(long, value_parser = parse_method)]
    pub method: Option<Method>,

    #[arg(long, value_parser = parse_selector)]
    pub selector: Option<Selector>,

    /// Fixed bandwidths (h values then λ values), skipping selection.
    #[arg(long, value_delimiter = ',')]
    pub bandwidths: Option<Vec<f64>>,

    /// Bootstrap resamples for the bootstrap selector.
    #[arg(long)]
    pub boot_replicates: Option<usize>,

    /// Golden-section refinement after the grid search.
    #[arg(long)]
    pub refine: bool,

    /// Points per evaluation grid.
    #[arg(long)]
    pub grid_size: Option<usize>,

    /// Output directory.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct BandArgs {
    #[command(flatten)]
    pub data: DataArgs,

    /// Bootstrap resamples for the band.
    #[arg(long)]
    pub band_replicates: Option<usize>,

    #[arg(long)]
    pub alpha: Option<f64>,

    /// Calibration tolerance on the inclusion fraction.
    #[arg(long)]
    pub delta: Option<f64>,

    #[arg(long)]
    pub max_iter: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct DiagnoseArgs {
    #[command(flatten)]
    pub data: DataArgs,

    /// Also write von Mises kernel density estimates of the residuals with
    /// this concentration.
    #[arg(long)]
    pub kde_kappa: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    Table1Desk,
    Table2Desk,
    Table1Full,
    Table2Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Scale {
    Desk,
    Full,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// Full table presets (every κ and n of the table).
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,

    #[arg(long, value_parser = parse_regression)]
    pub regression: Option<Regression>,

    #[arg(long, value_delimiter = ',')]
    pub kappa: Option<Vec<f64>>,

    /// Sample sizes.
    #[arg(long, value_delimiter = ',')]
    pub n: Option<Vec<usize>>,

    #[arg(long, value_enum)]
    pub scale: Option<Scale>,

    /// Override the number of Phase I samples.
    #[arg(long)]
    pub n1: Option<usize>,

    /// Override the number of Phase II samples.
    #[arg(long)]
    pub n2: Option<usize>,

    #[arg(long)]
    pub boot_replicates: Option<usize>,

    /// Use divisor N - 1 for the reported variances.
    #[arg(long)]
    pub unbiased_variance: bool,

    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse().map_err(|e: circreg::Error| e.to_string())
}

fn parse_selector(s: &str) -> Result<Selector, String> {
    s.parse().map_err(|e: circreg::Error| e.to_string())
}

fn parse_regression(s: &str) -> Result<Regression, String> {
    s.parse().map_err(|e: circreg::Error| e.to_string())
}
