//! Two-sample test for equality of multivariate extremal dependence based on
//! the symmetrized Kullback–Leibler divergence of exceedance-cell
//! probabilities.
//!
//! The pipeline: standardize both samples to unit-Pareto margins
//! ([`margins`]), keep the `k_n` observations with the largest risk
//! `r(X)` and count them in the cells of a partition of `{r > 1}`
//! ([`partition`]), compare the two cell tables with the Jeffreys divergence
//! ([`divergence`]), and calibrate against a chi-squared law or a split-half
//! subsample bootstrap ([`inference`]). [`copulas`] and [`experiments`]
//! drive Monte Carlo size and power studies; [`ingest`] turns six-minute
//! rain-gauge series into seasonal daily-maximum pairs.
//!
//! Numerical code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the common `f64` instantiation.

pub mod copulas;
pub mod divergence;
mod error;
pub mod experiments;
pub mod inference;
pub mod ingest;
pub mod margins;
pub mod numerics;
pub mod partition;
mod scalar;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub use copulas::{match_chi, CopulaModel, Family};
pub use divergence::{d3_from_chi, extremal_correlation, jeffreys, kl_divergence};
pub use inference::{run_test, Calibration, MarginMode, TestConfig};
pub use margins::{to_pareto, to_pseudo, MarginState, MarginalCdf, StandardMargin};
pub use partition::{count_cells, RiskFunctional, Scheme};

pub type Sample = margins::Sample<f64>;
pub type Sample32 = margins::Sample<f32>;
pub type Partition = partition::Partition<f64>;
pub type CellProbabilities = divergence::CellProbabilities<f64>;
pub type Divergence = divergence::Divergence<f64>;
pub type ChiEstimate = divergence::ChiEstimate<f64>;
pub type TestReport = inference::TestReport<f64>;
pub type NullDistribution = inference::NullDistribution<f64>;
