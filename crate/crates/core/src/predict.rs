//! Intensity surfaces, count probabilities and areal aggregation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::laplace::{FitResult, MAX_LINEAR_PREDICTOR};
use crate::model::PixelTable;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    /// `C exp(mu)`, the intensity at the posterior mean predictor.
    PlugIn,
    /// `C exp(mu + sigma^2 / 2)`, the posterior mean intensity.
    #[default]
    Lognormal,
}

impl std::str::FromStr for Estimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "plug-in" | "plugin" | "plug-in-mean" => Ok(Estimator::PlugIn),
            "lognormal" | "lognormal-corrected" => Ok(Estimator::Lognormal),
            other => Err(Error::Config(format!(
                "unknown estimator `{other}` (expected plug-in or lognormal)"
            ))),
        }
    }
}

impl std::fmt::Display for Estimator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Estimator::PlugIn => "plug-in",
            Estimator::Lognormal => "lognormal",
        })
    }
}

/// Expected count in one pixel of area `cell_area` given the Gaussian
/// marginal `N(mean, variance)` of its linear predictor.
pub fn intensity(mean: f64, variance: f64, cell_area: f64, estimator: Estimator) -> Result<f64> {
    let x = match estimator {
        Estimator::PlugIn => mean,
        Estimator::Lognormal => mean + 0.5 * variance,
    };
    if !(x <= MAX_LINEAR_PREDICTOR) {
        return Err(Error::DivergingPredictor { pixel: 0, value: x });
    }
    Ok(cell_area * x.exp())
}

fn intensities(
    mean: &[f64],
    var: &[f64],
    cell_area: f64,
    estimator: Estimator,
) -> Result<Vec<f64>> {
    mean.iter()
        .zip(var)
        .enumerate()
        .map(|(i, (&m, &v))| {
            intensity(m, v, cell_area, estimator).map_err(|e| match e {
                Error::DivergingPredictor { value, .. } => {
                    Error::DivergingPredictor { pixel: i, value }
                }
                other => other,
            })
        })
        .collect()
}

/// Intensities of the training pixels of `fit`.
pub fn pixel_intensity(fit: &FitResult, estimator: Estimator) -> Result<Vec<f64>> {
    let mean: Vec<f64> = fit.predictor.iter().map(|m| m.mean).collect();
    let var: Vec<f64> = fit.predictor.iter().map(|m| m.sd * m.sd).collect();
    intensities(&mean, &var, fit.layout.cell_area, estimator)
}

/// `P(N = k)` for `N ~ Poisson(lambda)`.
pub fn count_probability(lambda: f64, k: u64) -> f64 {
    if lambda == 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    let log_fact: f64 = (1..=k).map(|j| (j as f64).ln()).sum();
    (k as f64 * lambda.ln() - lambda - log_fact).exp()
}

/// `P(N > k)` for `N ~ Poisson(lambda)`.
pub fn exceedance(lambda: f64, k: u64) -> f64 {
    let below: f64 = (0..=k).map(|j| count_probability(lambda, j)).sum();
    (1.0 - below).max(0.0)
}

/// Probability of at least one event, `1 - exp(-lambda)`.
pub fn event_probability(lambda: f64) -> f64 {
    -(-lambda).exp_m1()
}

/// Logistic-regression form `odds / (1 + odds)` for `odds = C lambda'`.
pub fn logistic_probability(odds: f64) -> f64 {
    odds / (1.0 + odds)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnitSurface {
    pub unit_id: Vec<usize>,
    pub lambda: Vec<f64>,
    pub p: Vec<f64>,
}

/// Sums pixel intensities over units `0..n_units`.
pub fn aggregate(lambda: &[f64], partition: &[usize], n_units: usize) -> Result<UnitSurface> {
    if lambda.len() != partition.len() {
        return Err(Error::DimensionMismatch {
            expected: lambda.len(),
            got: partition.len(),
        });
    }
    let mut total = vec![0.0; n_units];
    for (i, (&l, &u)) in lambda.iter().zip(partition).enumerate() {
        if u >= n_units {
            return Err(Error::UnmappedPixel(i));
        }
        total[u] += l;
    }
    Ok(UnitSurface {
        unit_id: (0..n_units).collect(),
        p: total.iter().map(|&l| event_probability(l)).collect(),
        lambda: total,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionSurface {
    pub estimator: Estimator,
    pub pixel_id: Vec<i64>,
    pub lambda: Vec<f64>,
    pub p: Vec<f64>,
    pub units: UnitSurface,
}

impl PredictionSurface {
    fn build(
        pixels: &PixelTable,
        lambda: Vec<f64>,
        n_units: usize,
        estimator: Estimator,
    ) -> Result<Self> {
        let units = aggregate(&lambda, pixels.unit_ids(), n_units)?;
        Ok(PredictionSurface {
            estimator,
            pixel_id: pixels.pixel_ids().to_vec(),
            p: lambda.iter().map(|&l| event_probability(l)).collect(),
            lambda,
            units,
        })
    }

    /// Count probabilities `P(N = 0..=k_max)` per pixel.
    pub fn count_table(&self, k_max: u64) -> Vec<Vec<f64>> {
        self.lambda
            .iter()
            .map(|&l| (0..=k_max).map(|k| count_probability(l, k)).collect())
            .collect()
    }
}

fn unit_count(fit: &FitResult, pixels: &PixelTable) -> usize {
    match &fit.layout.graph {
        Some(g) => g.n_units(),
        None => pixels.unit_ids().iter().max().map_or(0, |m| m + 1),
    }
}

/// Surface over the training pixels of `fit`.
pub fn training_surface(
    fit: &FitResult,
    pixels: &PixelTable,
    estimator: Estimator,
) -> Result<PredictionSurface> {
    if pixels.len() != fit.predictor.len() {
        return Err(Error::DimensionMismatch {
            expected: fit.predictor.len(),
            got: pixels.len(),
        });
    }
    let lambda = pixel_intensity(fit, estimator)?;
    PredictionSurface::build(pixels, lambda, unit_count(fit, pixels), estimator)
}

/// Surface over arbitrary pixels described by the covariates of the fitted
/// layout. Covariates outside the training bin range clamp to the end bins.
pub fn predict_surface(
    fit: &FitResult,
    pixels: &PixelTable,
    estimator: Estimator,
) -> Result<PredictionSurface> {
    let incidence = fit.layout.design(pixels)?;
    let (mean, var) = fit.predictor_moments(&incidence, None);
    let lambda = intensities(&mean, &var, pixels.cell_area(), estimator)?;
    PredictionSurface::build(pixels, lambda, unit_count(fit, pixels), estimator)
}
