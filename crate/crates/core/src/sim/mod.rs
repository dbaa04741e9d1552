//! Simulation designs, the selector benchmark and asymptotic approximations.

pub mod dgp;
pub mod harness;
pub mod theory;

pub use dgp::{sample_dgp, true_regression, DgpSpec, Regression};
pub use harness::{
    case_true, loglog_slope, monte_carlo_bias, phase1_surface, phase2_eval_with, run, HarnessConfig,
    HarnessReport, McBias, RiskSurface, SelectorScore, TableRow, VarianceDivisor,
};
pub use theory::{asymptotic_approx, vm_moments, AsymptoticApprox};
