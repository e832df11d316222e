use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("{path}: row {row}: {message}")]
    Parse {
        path: String,
        row: usize,
        message: String,
    },

    #[error("invalid adjacency graph: {0}")]
    InvalidGraph(String),

    #[error("unit with no neighbors: {0}")]
    IsolatedUnit(usize),

    #[error("degenerate random walk: {0} bins")]
    DegenerateRandomWalk(usize),

    #[error("matrix is not positive definite at pivot {pivot}")]
    NotPositiveDefinite { pivot: usize },

    #[error("redundant constraints")]
    RedundantConstraints,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("zero variance covariate{}", if .0.is_empty() { String::new() } else { format!(" `{}`", .0) })]
    ZeroVarianceCovariate(String),

    #[error("degenerate covariate range for binning")]
    DegenerateRange,

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("diverging linear predictor at pixel {pixel} (value {value})")]
    DivergingPredictor { pixel: usize, value: f64 },

    #[error("newton iteration did not converge after {iterations} iterations (log posterior trace: {trace:?})")]
    NoConvergence { iterations: usize, trace: Vec<f64> },

    #[error("mode finding failed at every grid point")]
    AllGridPointsFailed,

    #[error("pixel {0} is not mapped to a unit")]
    UnmappedPixel(usize),

    #[error("degenerate labels: both classes are required")]
    DegenerateLabels,

    #[error("too few units for cross-validation: {units} units, {folds} folds")]
    TooFewUnits { units: usize, folds: usize },

    #[error("duplicate pixel_id {0}")]
    DuplicatePixel(i64),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("output file {0} exists (use --force to overwrite)")]
    OutputExists(PathBuf),
}

impl Error {
    /// Stable machine-readable code used by the command-line front end.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Io(_) => "io",
            Error::Json(_) => "json",
            Error::Parse { .. } => "parse",
            Error::InvalidGraph(_) => "invalid_graph",
            Error::IsolatedUnit(_) => "isolated_unit",
            Error::DegenerateRandomWalk(_) => "degenerate_random_walk",
            Error::NotPositiveDefinite { .. } => "not_positive_definite",
            Error::RedundantConstraints => "redundant_constraints",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::ZeroVarianceCovariate(_) => "zero_variance_covariate",
            Error::DegenerateRange => "degenerate_range",
            Error::InvalidModel(_) => "invalid_model",
            Error::DivergingPredictor { .. } => "diverging_predictor",
            Error::NoConvergence { .. } => "no_convergence",
            Error::AllGridPointsFailed => "all_grid_points_failed",
            Error::UnmappedPixel(_) => "unmapped_pixel",
            Error::DegenerateLabels => "degenerate_labels",
            Error::TooFewUnits { .. } => "too_few_units",
            Error::DuplicatePixel(_) => "duplicate_pixel",
            Error::Config(_) => "config",
            Error::OutputExists(_) => "output_exists",
        }
    }
}
