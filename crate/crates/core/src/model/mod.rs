//! Pixel data, covariate preprocessing and latent-field assembly.

pub mod covariate;
pub mod effects;
pub mod hyper;
pub mod pixels;
pub mod structure;

pub use covariate::{bin_covariate, destandardize, standardize, BinEdges, Standardization};
pub use effects::{
    CovariateCatalog, CovariateDecl, CovariateRole, EffectKind, EffectSpec, Preset, SPATIAL_EFFECT,
};
pub use hyper::{EstimatedHyper, HyperPrior, HyperSpec};
pub use pixels::{PixelRow, PixelTable, DEFAULT_CELL_AREA};
pub use structure::{
    assemble_model, resolve_effects, Block, Incidence, LatentLayout, ModelStructure,
    INTRINSIC_JITTER,
};
