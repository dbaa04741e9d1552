//! Kernel regression for a circular response on mixed continuous and
//! categorical covariates.

#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![cfg_attr(test, allow(clippy::excessive_precision, clippy::needless_range_loop))]

pub mod angle;
pub mod bands;
pub mod dataio;
pub mod diagnostics;
pub mod error;
pub mod estimator;
pub mod kernels;
pub mod rng;
pub mod sample;
pub mod select;
pub mod sim;
pub mod special;
pub mod stats;
pub mod vonmises;

pub use angle::{circ_mean, cos_loss, signed_diff, wrap_2pi, wrap_pi, CircSummary};
pub use bands::{simultaneous_band, BandResult, BandSettings, CalibrationStatus};
pub use dataio::{load_trials, LoadedTrials, Predictor, RunConfig, TrialSchema};
pub use diagnostics::{gof_report, uniformity_tests, vm_kde, GofReport, UniformityResult};
pub use error::{Error, Result};
pub use estimator::{fit_point_ll, fit_point_nw, Estimator, EvalPoint, FitResult, Method, PointFit};
pub use kernels::{Bandwidths, CategoricalKernel, ContinuousKernel, KernelSpec};
pub use sample::MixedSample;
pub use select::{select_bootstrap, select_cv, select_rot, SearchSpec, Selection, Selector};
