//! Synthetic datasets from the generative model and quadrature oracles.

pub mod quadrature;
pub mod simulate;

pub use quadrature::{
    integrate, integrate_2d, posterior_moments, quadrature_oracle, QuadratureMoments,
};
pub use simulate::{
    simulate_dataset, CovariateDistribution, LatticeSpec, SimCovariate, SimDataset, SimSpec,
    SimTruth,
};
