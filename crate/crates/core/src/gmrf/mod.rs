//! Gaussian Markov random field building blocks: sparse symmetric storage,
//! areal adjacency, intrinsic CAR and random-walk precisions, sparse Cholesky
//! factorization and linear equality constraints.

pub mod cholesky;
pub mod constraint;
pub mod graph;
pub mod precision;
pub mod sparse;

pub use cholesky::{factorize, CholeskyFactor, SelectedInverse, SymbolicCholesky};
pub use constraint::{constrain_mean, ConstraintRow, Kriging, LinearConstraint};
pub use graph::AdjacencyGraph;
pub use precision::{build_car_precision, build_rw1_precision};
pub use sparse::SparseSymmetric;
