use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EffectKind {
    Intercept,
    Linear,
    Categorical,
    Rw1,
    Rw1Cyclic,
    CarSpatial,
}

impl EffectKind {
    /// Effects indexed by a level (bin, category or unit) rather than a slope.
    pub fn is_level_indexed(self) -> bool {
        matches!(
            self,
            EffectKind::Categorical
                | EffectKind::Rw1
                | EffectKind::Rw1Cyclic
                | EffectKind::CarSpatial
        )
    }

    pub fn is_intrinsic(self) -> bool {
        matches!(
            self,
            EffectKind::Rw1 | EffectKind::Rw1Cyclic | EffectKind::CarSpatial
        )
    }
}

/// Declaration of one additive term of the linear predictor.
///
/// For random walks and the spatial effect `prior_precision` is the precision
/// scale `tau` of the structured prior; for the other kinds it is the precision
/// of an independent Gaussian prior on each coefficient.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EffectSpec {
    pub name: String,
    pub kind: EffectKind,
    /// Covariate column; defaults to `name` for covariate-driven kinds.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub covariate: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_levels: Option<usize>,
    #[serde(default)]
    pub prior_mean: f64,
    pub prior_precision: f64,
    #[serde(default)]
    pub sum_to_zero: bool,
}

/// Default prior settings for the landslide configuration.
pub mod defaults {
    pub const INTERCEPT_MEAN: f64 = -2.0;
    pub const INTERCEPT_PRECISION: f64 = 1.0;
    pub const LINEAR_PRECISION: f64 = 2.0;
    pub const CATEGORICAL_PRECISION: f64 = 100.0;
    pub const RW1_PRECISION: f64 = 25.0;
    pub const RW1_BINS: usize = 20;
    pub const CYCLIC_BINS: usize = 16;
    /// Starting value for the spatial precision before it is estimated.
    pub const CAR_PRECISION: f64 = 1.0;
}

impl EffectSpec {
    pub fn intercept() -> Self {
        EffectSpec {
            name: "intercept".into(),
            kind: EffectKind::Intercept,
            covariate: None,
            n_levels: None,
            prior_mean: defaults::INTERCEPT_MEAN,
            prior_precision: defaults::INTERCEPT_PRECISION,
            sum_to_zero: false,
        }
    }

    pub fn linear(covariate: &str) -> Self {
        EffectSpec {
            name: covariate.into(),
            kind: EffectKind::Linear,
            covariate: Some(covariate.into()),
            n_levels: None,
            prior_mean: 0.0,
            prior_precision: defaults::LINEAR_PRECISION,
            sum_to_zero: false,
        }
    }

    pub fn categorical(covariate: &str, n_levels: usize) -> Self {
        EffectSpec {
            name: covariate.into(),
            kind: EffectKind::Categorical,
            covariate: Some(covariate.into()),
            n_levels: Some(n_levels),
            prior_mean: 0.0,
            prior_precision: defaults::CATEGORICAL_PRECISION,
            sum_to_zero: true,
        }
    }

    pub fn rw1(covariate: &str, n_bins: usize) -> Self {
        EffectSpec {
            name: format!("{covariate}_rw1"),
            kind: EffectKind::Rw1,
            covariate: Some(covariate.into()),
            n_levels: Some(n_bins),
            prior_mean: 0.0,
            prior_precision: defaults::RW1_PRECISION,
            sum_to_zero: true,
        }
    }

    pub fn rw1_cyclic(covariate: &str, n_bins: usize) -> Self {
        EffectSpec {
            name: format!("{covariate}_rw1"),
            kind: EffectKind::Rw1Cyclic,
            covariate: Some(covariate.into()),
            n_levels: Some(n_bins),
            prior_mean: 0.0,
            prior_precision: defaults::RW1_PRECISION,
            sum_to_zero: true,
        }
    }

    pub fn car(name: &str) -> Self {
        EffectSpec {
            name: name.into(),
            kind: EffectKind::CarSpatial,
            covariate: None,
            n_levels: None,
            prior_mean: 0.0,
            prior_precision: defaults::CAR_PRECISION,
            sum_to_zero: true,
        }
    }

    pub fn with_precision(mut self, precision: f64) -> Self {
        self.prior_precision = precision;
        self
    }

    pub fn with_mean(mut self, mean: f64) -> Self {
        self.prior_mean = mean;
        self
    }

    pub fn covariate_name(&self) -> &str {
        self.covariate.as_deref().unwrap_or(&self.name)
    }
}

/// How a covariate enters the preset model configurations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "role", rename_all = "snake_case")]
pub enum CovariateRole {
    Continuous,
    Categorical {
        n_levels: usize,
    },
    /// Angular covariate such as aspect, always a cyclic random walk.
    Cyclic,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CovariateDecl {
    pub name: String,
    #[serde(flatten)]
    pub role: CovariateRole,
}

/// Covariates to be mapped through Table-2 style presets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CovariateCatalog {
    pub covariates: Vec<CovariateDecl>,
    /// Continuous covariates given a random-walk component in mod2b/mod3.
    #[serde(default = "default_nonlinear_subset")]
    pub nonlinear_subset: Vec<String>,
}

pub fn default_nonlinear_subset() -> Vec<String> {
    ["aspect", "elevation", "slope", "distance_to_faults"]
        .into_iter()
        .map(String::from)
        .collect()
}

fn normalized(name: &str) -> String {
    name.trim()
        .to_ascii_lowercase()
        .chars()
        .map(|c| if c == ' ' || c == '-' { '_' } else { c })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    /// All linear except for the cyclic aspect effect, no spatial effect.
    Mod1,
    /// Every continuous covariate linear plus random walk, no spatial effect.
    Mod2,
    /// Random walks only on the nonlinear subset, no spatial effect.
    Mod2b,
    /// As `Mod2b` plus the CAR spatial effect over areal units.
    Mod3,
}

impl std::str::FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mod1" => Ok(Preset::Mod1),
            "mod2" => Ok(Preset::Mod2),
            "mod2b" => Ok(Preset::Mod2b),
            "mod3" => Ok(Preset::Mod3),
            other => Err(Error::Config(format!(
                "unknown preset `{other}` (expected mod1, mod2, mod2b or mod3)"
            ))),
        }
    }
}

impl std::fmt::Display for Preset {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Preset::Mod1 => "mod1",
            Preset::Mod2 => "mod2",
            Preset::Mod2b => "mod2b",
            Preset::Mod3 => "mod3",
        })
    }
}

/// Name of the spatial effect produced by presets.
pub const SPATIAL_EFFECT: &str = "spatial";

impl Preset {
    pub fn has_spatial_effect(self) -> bool {
        self == Preset::Mod3
    }

    pub fn effects(self, catalog: &CovariateCatalog) -> Vec<EffectSpec> {
        let subset: Vec<String> = catalog
            .nonlinear_subset
            .iter()
            .map(|s| normalized(s))
            .collect();
        let mut out = vec![EffectSpec::intercept()];
        for decl in &catalog.covariates {
            match &decl.role {
                CovariateRole::Continuous => {
                    out.push(EffectSpec::linear(&decl.name));
                    let nonlinear = match self {
                        Preset::Mod1 => false,
                        Preset::Mod2 => true,
                        Preset::Mod2b | Preset::Mod3 => subset.contains(&normalized(&decl.name)),
                    };
                    if nonlinear {
                        out.push(EffectSpec::rw1(&decl.name, defaults::RW1_BINS));
                    }
                }
                CovariateRole::Categorical { n_levels } => {
                    out.push(EffectSpec::categorical(&decl.name, *n_levels));
                }
                CovariateRole::Cyclic => {
                    out.push(EffectSpec::rw1_cyclic(&decl.name, defaults::CYCLIC_BINS));
                }
            }
        }
        if self.has_spatial_effect() {
            out.push(EffectSpec::car(SPATIAL_EFFECT));
        }
        out
    }
}

pub(crate) fn looks_like_aspect(name: &str) -> bool {
    normalized(name).contains("aspect")
}
