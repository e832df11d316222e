//! Laplace approximation of the latent-field posterior.
//!
//! For each value of the (at most one) estimated precision the latent mode is
//! found by Newton iteration, the log marginal of the hyperparameter is
//! approximated by the Gaussian integral around that mode, and the per-point
//! Gaussian approximations are mixed over a grid to give marginals for every
//! latent component and pixel linear predictor.

pub mod fit;
pub mod likelihood;
pub mod mode;

pub use fit::{
    fit, golden_section_max, log_hyper_posterior, FitResult, GridPoint, HyperEval, HyperSummary,
    Marginal, Z_975,
};
pub use likelihood::{Likelihood, PixelTerm, MAX_LINEAR_PREDICTOR};
pub use mode::{find_mode, joint_log_posterior, JointEval, LaplaceEngine, ModeResult};
