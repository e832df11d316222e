//! Bayesian intensity mapping with log-Gaussian Cox processes on pixel grids.
//!
//! The point pattern is discretized into pixel counts, modelled as Poisson
//! with log-intensity given by an additive latent Gaussian field: intercept,
//! linear covariate effects, categorical effects, first-order random walks
//! over binned covariates and an intrinsic CAR effect over areal units.
//! Posteriors are approximated by a Laplace approximation around the latent
//! mode, integrated over a one-dimensional hyperparameter grid.
//!
//! Module map:
//! - [`gmrf`]: sparse precisions, Cholesky factorization, constraints
//! - [`model`]: pixel data, covariate preprocessing, latent-field assembly
//! - [`laplace`]: mode finding, hyperparameter posterior, mixture marginals
//! - [`predict`]: intensity surfaces, count probabilities, areal aggregation
//! - [`eval`]: ROC/AUC and unit-blocked cross-validation
//! - [`sim`]: synthetic data and quadrature oracles
//! - [`run`]: file-level orchestration behind the `coxmap` binary

pub mod error;
pub mod eval;
pub mod gmrf;
pub mod laplace;
pub mod model;
pub mod predict;
pub mod run;
pub mod sim;

pub use error::{Error, Result};
