use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::effects::{EffectKind, EffectSpec};

/// Prior density of `u = log(theta)` for an estimated precision.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum HyperPrior {
    /// `log(theta) ~ N(log(median), log_sd^2)`.
    LogNormal { median: f64, log_sd: f64 },
    /// Log density of `log(theta)` tabulated on an increasing grid, linearly
    /// interpolated and held constant beyond the ends.
    Tabulated {
        log_theta: Vec<f64>,
        log_density: Vec<f64>,
    },
}

impl Default for HyperPrior {
    fn default() -> Self {
        HyperPrior::LogNormal {
            median: 10.0,
            log_sd: 1.5,
        }
    }
}

impl HyperPrior {
    pub fn log_density(&self, log_theta: f64) -> f64 {
        match self {
            HyperPrior::LogNormal { median, log_sd } => {
                let z = (log_theta - median.ln()) / log_sd;
                -0.5 * z * z - log_sd.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln()
            }
            HyperPrior::Tabulated {
                log_theta: xs,
                log_density: ys,
            } => {
                if log_theta <= xs[0] {
                    return ys[0];
                }
                let last = xs.len() - 1;
                if log_theta >= xs[last] {
                    return ys[last];
                }
                let k = xs.partition_point(|&x| x <= log_theta) - 1;
                let t = (log_theta - xs[k]) / (xs[k + 1] - xs[k]);
                ys[k] + t * (ys[k + 1] - ys[k])
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            HyperPrior::LogNormal { median, log_sd } => {
                if *median > 0.0 && *log_sd > 0.0 && median.is_finite() && log_sd.is_finite() {
                    Ok(())
                } else {
                    Err(Error::Config(
                        "log-normal hyperprior needs median > 0 and log_sd > 0".into(),
                    ))
                }
            }
            HyperPrior::Tabulated {
                log_theta,
                log_density,
            } => {
                let ok = log_theta.len() >= 2
                    && log_theta.len() == log_density.len()
                    && log_theta.windows(2).all(|w| w[0] < w[1])
                    && log_density.iter().all(|v| v.is_finite());
                if ok {
                    Ok(())
                } else {
                    Err(Error::Config(
                        "tabulated hyperprior must be increasing and finite".into(),
                    ))
                }
            }
        }
    }
}

/// Settings for the single hyperparameter integrated over a grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimatedHyper {
    /// Effect whose precision is estimated.
    pub effect: String,
    #[serde(default)]
    pub prior: HyperPrior,
    /// Bracket on `log(theta)` for the golden-section mode search.
    #[serde(default = "default_search")]
    pub search_log_interval: [f64; 2],
    #[serde(default = "default_grid_points")]
    pub grid_points: usize,
    /// Grid spacing in units of the estimated posterior sd of `log(theta)`.
    #[serde(default = "default_grid_step")]
    pub grid_step_sd: f64,
}

fn default_search() -> [f64; 2] {
    [-3.0, 7.0]
}

fn default_grid_points() -> usize {
    15
}

fn default_grid_step() -> f64 {
    0.5
}

impl EstimatedHyper {
    pub fn new(effect: &str) -> Self {
        EstimatedHyper {
            effect: effect.into(),
            prior: HyperPrior::default(),
            search_log_interval: default_search(),
            grid_points: default_grid_points(),
            grid_step_sd: default_grid_step(),
        }
    }
}

/// Which precisions are estimated and which are fixed.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct HyperSpec {
    #[serde(default)]
    pub estimated: Option<EstimatedHyper>,
    /// Overrides of effect prior precisions, by effect name.
    #[serde(default)]
    pub fixed: BTreeMap<String, f64>,
}

impl HyperSpec {
    /// Estimates the spatial precision when a CAR effect is present and fixes
    /// everything else.
    pub fn default_for(effects: &[EffectSpec]) -> Self {
        let estimated = effects
            .iter()
            .find(|e| e.kind == EffectKind::CarSpatial)
            .map(|e| EstimatedHyper::new(&e.name));
        HyperSpec {
            estimated,
            fixed: BTreeMap::new(),
        }
    }

    pub fn fixed_only() -> Self {
        HyperSpec::default()
    }

    pub fn n_estimated(&self) -> usize {
        usize::from(self.estimated.is_some())
    }

    pub fn validate(&self, effects: &[EffectSpec]) -> Result<()> {
        if let Some(est) = &self.estimated {
            if !effects.iter().any(|e| e.name == est.effect) {
                return Err(Error::Config(format!(
                    "estimated hyperparameter refers to unknown effect `{}`",
                    est.effect
                )));
            }
            est.prior.validate()?;
            let [lo, hi] = est.search_log_interval;
            if !(lo < hi) {
                return Err(Error::Config("search interval must be increasing".into()));
            }
            if est.grid_points == 0 || !(est.grid_step_sd > 0.0) {
                return Err(Error::Config(
                    "grid needs at least one point and a positive step".into(),
                ));
            }
        }
        for (name, v) in &self.fixed {
            if !effects.iter().any(|e| &e.name == name) {
                return Err(Error::Config(format!(
                    "fixed precision for unknown effect `{name}`"
                )));
            }
            if !(*v > 0.0) {
                return Err(Error::Config(format!(
                    "fixed precision for `{name}` must be positive"
                )));
            }
        }
        Ok(())
    }
}
