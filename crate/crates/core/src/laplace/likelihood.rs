use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest linear predictor accepted before exponentiation.
pub const MAX_LINEAR_PREDICTOR: f64 = 30.0;

/// Observation model for one pixel given its linear predictor `x`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Likelihood {
    /// `y ~ Poisson(C exp(x))`, log-factorial term dropped.
    #[default]
    Poisson,
    /// `y ~ N(x, 1 / precision)`, identity link; used to check the Laplace
    /// machinery where it is exact.
    Gaussian { precision: f64 },
}

/// Log-likelihood contribution and its first two derivatives in `x`, with the
/// second derivative negated (observed information).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PixelTerm {
    pub value: f64,
    pub gradient: f64,
    pub information: f64,
}

impl Likelihood {
    pub fn term(&self, y: f64, x: f64, cell_area: f64, pixel: usize) -> Result<PixelTerm> {
        match *self {
            Likelihood::Poisson => {
                if !(x <= MAX_LINEAR_PREDICTOR) {
                    return Err(Error::DivergingPredictor { pixel, value: x });
                }
                let mu = cell_area * x.exp();
                Ok(PixelTerm {
                    value: y * x - mu,
                    gradient: y - mu,
                    information: mu,
                })
            }
            Likelihood::Gaussian { precision } => {
                let r = y - x;
                Ok(PixelTerm {
                    value: -0.5 * precision * r * r,
                    gradient: precision * r,
                    information: precision,
                })
            }
        }
    }
}
