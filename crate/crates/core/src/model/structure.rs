use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gmrf::{
    build_car_precision, build_rw1_precision, AdjacencyGraph, ConstraintRow, LinearConstraint,
    SparseSymmetric,
};
use crate::laplace::Likelihood;
use crate::model::covariate::{bin_covariate, standardize, BinEdges, Standardization};
use crate::model::effects::{looks_like_aspect, EffectKind, EffectSpec};
use crate::model::hyper::{EstimatedHyper, HyperSpec};
use crate::model::pixels::PixelTable;

/// Contiguous slice of the latent vector owned by one effect.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub name: String,
    pub kind: EffectKind,
    pub covariate: Option<String>,
    pub offset: usize,
    pub len: usize,
    pub prior_mean: f64,
    /// Precision scale applied to `structure`; the starting value when the
    /// block's precision is estimated.
    pub precision: f64,
    /// Block-local precision structure at unit scale.
    pub structure: SparseSymmetric,
    /// Dimension of the subspace on which the (constrained) prior is proper.
    pub rank: usize,
    pub sum_to_zero: bool,
}

impl Block {
    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len
    }
}

/// Row-compressed pixel-to-latent incidence: pixel `i` has linear predictor
/// `sum_k weights[k] * eta[cols[k]]` over `row_ptr[i]..row_ptr[i + 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Incidence {
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub weights: Vec<f64>,
}

impl Incidence {
    pub fn n_rows(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn nnz(&self) -> usize {
        self.cols.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
        (&self.cols[a..b], &self.weights[a..b])
    }

    pub fn predictor(&self, eta: &[f64]) -> Vec<f64> {
        (0..self.n_rows())
            .map(|i| {
                let (c, w) = self.row(i);
                c.iter().zip(w).map(|(&j, &a)| a * eta[j]).sum()
            })
            .collect()
    }

    /// `A' v`
    pub fn transpose_mul(&self, v: &[f64], dim: usize) -> Vec<f64> {
        let mut out = vec![0.0; dim];
        for (i, &vi) in v.iter().enumerate() {
            let (c, w) = self.row(i);
            for (&j, &a) in c.iter().zip(w) {
                out[j] += a * vi;
            }
        }
        out
    }
}

/// Relative diagonal added to intrinsic (random-walk and CAR) structures so
/// that the joint curvature stays invertible when several intrinsic blocks
/// share the intercept's constant direction. The sum-to-zero constraints
/// remove the affected directions.
pub const INTRINSIC_JITTER: f64 = 1e-5;

/// Everything needed to map pixels onto the latent field and evaluate its
/// prior; independent of the training counts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatentLayout {
    pub latent_dim: usize,
    pub blocks: Vec<Block>,
    /// Per covariate name.
    pub standardization: BTreeMap<String, Standardization>,
    /// Per binned effect name, edges on the standardized scale.
    pub bins: BTreeMap<String, BinEdges>,
    pub constraint: LinearConstraint,
    pub graph: Option<AdjacencyGraph>,
    pub estimated_block: Option<usize>,
    pub hyper: Option<EstimatedHyper>,
    pub cell_area: f64,
}

impl LatentLayout {
    pub fn block(&self, name: &str) -> Option<&Block> {
        self.blocks.iter().find(|b| b.name == name)
    }

    pub fn block_index(&self, name: &str) -> Option<usize> {
        self.blocks.iter().position(|b| b.name == name)
    }

    pub fn spatial_block(&self) -> Option<&Block> {
        self.blocks
            .iter()
            .find(|b| b.kind == EffectKind::CarSpatial)
    }

    pub fn estimated(&self) -> Option<&Block> {
        self.estimated_block.map(|k| &self.blocks[k])
    }

    /// Precision scale of every block, with `theta` substituted for the
    /// estimated block (ignored when nothing is estimated).
    pub fn block_scales(&self, theta: f64) -> Vec<f64> {
        self.blocks
            .iter()
            .enumerate()
            .map(|(k, b)| {
                if Some(k) == self.estimated_block {
                    theta
                } else {
                    b.precision
                }
            })
            .collect()
    }

    pub fn prior_mean(&self) -> Vec<f64> {
        let mut mu = vec![0.0; self.latent_dim];
        for b in &self.blocks {
            mu[b.range()].iter_mut().for_each(|m| *m = b.prior_mean);
        }
        mu
    }

    pub fn prior_precision(&self, theta: f64) -> SparseSymmetric {
        let scales = self.block_scales(theta);
        let trip = self.blocks.iter().zip(&scales).flat_map(|(b, &s)| {
            b.structure
                .entries()
                .iter()
                .map(move |&(r, c, v)| (r + b.offset, c + b.offset, s * v))
        });
        SparseSymmetric::from_triplets(self.latent_dim, trip.collect::<Vec<_>>())
            .expect("block structures are valid")
    }

    /// `sum_b [rank_b/2 log tau_b - tau_b/2 (x_b - mu_b)' R_b (x_b - mu_b)]`,
    /// the log prior density on the constrained subspace up to a constant
    /// independent of `theta`.
    pub fn prior_log_density(&self, eta: &[f64], theta: f64) -> f64 {
        let scales = self.block_scales(theta);
        self.blocks
            .iter()
            .zip(scales)
            .map(|(b, s)| {
                let centered: Vec<f64> = eta[b.range()].iter().map(|v| v - b.prior_mean).collect();
                0.5 * b.rank as f64 * s.ln() - 0.5 * s * b.structure.quad_form(&centered)
            })
            .sum()
    }

    /// Incidence rows for `pixels` using the stored standardization and bins.
    pub fn design(&self, pixels: &PixelTable) -> Result<Incidence> {
        let n = pixels.len();
        let per_row = self.blocks.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::with_capacity(n * per_row);
        let mut weights = Vec::with_capacity(n * per_row);

        enum Source<'a> {
            Intercept,
            Linear(&'a [f64], Standardization),
            Level(&'a [f64], usize),
            Binned(&'a [f64], Standardization, &'a BinEdges),
            Unit(usize),
        }
        let mut sources = Vec::with_capacity(self.blocks.len());
        for b in &self.blocks {
            let cov = |name: &Option<String>| -> Result<&[f64]> {
                let name = name.as_deref().unwrap_or(&b.name);
                pixels
                    .covariate(name)
                    .ok_or_else(|| Error::InvalidModel(format!("missing covariate `{name}`")))
            };
            let std_of = |name: &Option<String>| -> Result<Standardization> {
                let name = name.as_deref().unwrap_or(&b.name);
                self.standardization.get(name).copied().ok_or_else(|| {
                    Error::InvalidModel(format!("no standardization stored for `{name}`"))
                })
            };
            sources.push(match b.kind {
                EffectKind::Intercept => Source::Intercept,
                EffectKind::Linear => Source::Linear(cov(&b.covariate)?, std_of(&b.covariate)?),
                EffectKind::Categorical => Source::Level(cov(&b.covariate)?, b.len),
                EffectKind::Rw1 | EffectKind::Rw1Cyclic => Source::Binned(
                    cov(&b.covariate)?,
                    std_of(&b.covariate)?,
                    self.bins.get(&b.name).ok_or_else(|| {
                        Error::InvalidModel(format!("no bin edges stored for `{}`", b.name))
                    })?,
                ),
                EffectKind::CarSpatial => Source::Unit(b.len),
            });
        }

        row_ptr.push(0);
        for i in 0..n {
            for (b, src) in self.blocks.iter().zip(&sources) {
                let (col, w) = match src {
                    Source::Intercept => (b.offset, 1.0),
                    Source::Linear(v, s) => (b.offset, s.apply(v[i])),
                    Source::Level(v, n_levels) => {
                        let level = v[i];
                        if level < 0.0 || level.fract() != 0.0 || level as usize >= *n_levels {
                            return Err(Error::InvalidModel(format!(
                                "pixel {}: level {level} of `{}` outside [0, {n_levels})",
                                pixels.pixel_ids()[i],
                                b.name
                            )));
                        }
                        (b.offset + level as usize, 1.0)
                    }
                    Source::Binned(v, s, edges) => (b.offset + edges.bin_of(s.apply(v[i])), 1.0),
                    Source::Unit(n_units) => {
                        let u = pixels.unit_ids()[i];
                        if u >= *n_units {
                            return Err(Error::InvalidModel(format!(
                                "pixel {} references unknown unit {u}",
                                pixels.pixel_ids()[i]
                            )));
                        }
                        (b.offset + u, 1.0)
                    }
                };
                cols.push(col);
                weights.push(w);
            }
            row_ptr.push(cols.len());
        }
        Ok(Incidence {
            row_ptr,
            cols,
            weights,
        })
    }
}

/// Assembled latent Gaussian model together with its training observations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelStructure {
    pub layout: LatentLayout,
    pub incidence: Incidence,
    /// Response per pixel (event counts for the Poisson likelihood).
    pub observations: Vec<f64>,
    pub pixel_units: Vec<usize>,
    #[serde(default)]
    pub likelihood: Likelihood,
}

impl ModelStructure {
    pub fn latent_dim(&self) -> usize {
        self.layout.latent_dim
    }

    pub fn n_pixels(&self) -> usize {
        self.observations.len()
    }

    pub fn cell_area(&self) -> f64 {
        self.layout.cell_area
    }

    /// Linear predictor `X_i` (log intensity, without the `log C` offset).
    pub fn linear_predictor(&self, eta: &[f64]) -> Vec<f64> {
        self.incidence.predictor(eta)
    }

    pub fn with_likelihood(mut self, likelihood: Likelihood) -> Self {
        self.likelihood = likelihood;
        self
    }
}

/// Fills in categorical level counts missing from `effects` using the data,
/// so that the layout stays fixed across subsets of `pixels`.
pub fn resolve_effects(pixels: &PixelTable, effects: &[EffectSpec]) -> Result<Vec<EffectSpec>> {
    effects
        .iter()
        .map(|e| {
            let mut e = e.clone();
            if e.kind == EffectKind::Categorical && e.n_levels.is_none() {
                let name = e.covariate_name().to_string();
                let values = pixels
                    .covariate(&name)
                    .ok_or_else(|| Error::InvalidModel(format!("missing covariate `{name}`")))?;
                let max = values.iter().fold(0.0f64, |m, &v| m.max(v));
                e.n_levels = Some(max as usize + 1);
            }
            Ok(e)
        })
        .collect()
}

/// Builds the latent layout, incidence map, prior blocks and constraints.
pub fn assemble_model(
    pixels: &PixelTable,
    graph: Option<&AdjacencyGraph>,
    effects: &[EffectSpec],
    hyper: &HyperSpec,
) -> Result<ModelStructure> {
    let n_intercepts = effects
        .iter()
        .filter(|e| e.kind == EffectKind::Intercept)
        .count();
    if n_intercepts != 1 {
        return Err(Error::InvalidModel(format!(
            "a model needs exactly one intercept, found {n_intercepts}"
        )));
    }
    let mut names = HashSet::new();
    for e in effects {
        if !names.insert(e.name.as_str()) {
            return Err(Error::InvalidModel(format!(
                "duplicate effect name `{}`",
                e.name
            )));
        }
    }
    hyper.validate(effects)?;

    let mut standardization: BTreeMap<String, Standardization> = BTreeMap::new();
    let mut bins = BTreeMap::new();
    let mut blocks = Vec::with_capacity(effects.len());
    let mut constraint_rows = Vec::new();
    let mut offset = 0usize;
    let mut estimated_block = None;

    let mut standardized = |name: &str| -> Result<(Vec<f64>, Standardization)> {
        let values = pixels
            .covariate(name)
            .ok_or_else(|| Error::InvalidModel(format!("missing covariate `{name}`")))?;
        if let Some(s) = standardization.get(name) {
            return Ok((values.iter().map(|&v| s.apply(v)).collect(), *s));
        }
        let (z, s) = standardize(values).map_err(|e| match e {
            Error::ZeroVarianceCovariate(_) => Error::ZeroVarianceCovariate(name.to_string()),
            other => other,
        })?;
        standardization.insert(name.to_string(), s);
        Ok((z, s))
    };

    for (k, e) in effects.iter().enumerate() {
        let precision = hyper
            .fixed
            .get(&e.name)
            .copied()
            .unwrap_or(e.prior_precision);
        if !(precision > 0.0) || !precision.is_finite() {
            return Err(Error::InvalidModel(format!(
                "effect `{}` needs a positive prior precision",
                e.name
            )));
        }
        if hyper.estimated.as_ref().is_some_and(|h| h.effect == e.name) {
            estimated_block = Some(k);
        }
        let cov_name = e.covariate_name().to_string();
        let (len, structure, nullity) = match e.kind {
            EffectKind::Intercept => (1, SparseSymmetric::identity(1), 0),
            EffectKind::Linear => {
                standardized(&cov_name)?;
                (1, SparseSymmetric::identity(1), 0)
            }
            EffectKind::Categorical => {
                let n_levels = match e.n_levels {
                    Some(n) if n >= 1 => n,
                    _ => {
                        return Err(Error::InvalidModel(format!(
                            "categorical effect `{}` needs n_levels",
                            e.name
                        )))
                    }
                };
                if pixels.covariate(&cov_name).is_none() {
                    return Err(Error::InvalidModel(format!(
                        "missing covariate `{cov_name}`"
                    )));
                }
                (n_levels, SparseSymmetric::identity(n_levels), 0)
            }
            EffectKind::Rw1 | EffectKind::Rw1Cyclic => {
                let cyclic = e.kind == EffectKind::Rw1Cyclic;
                let n_bins = e.n_levels.unwrap_or(if cyclic {
                    crate::model::effects::defaults::CYCLIC_BINS
                } else {
                    crate::model::effects::defaults::RW1_BINS
                });
                if !cyclic && looks_like_aspect(&cov_name) {
                    log::warn!(
                        "effect `{}` on angular covariate `{cov_name}` declared non-cyclic; honoured as declared",
                        e.name
                    );
                }
                let structure =
                    build_rw1_precision(n_bins, 1.0, cyclic)?.with_added_diagonal(INTRINSIC_JITTER);
                let (z, _) = standardized(&cov_name)?;
                let (_, edges) = bin_covariate(&z, n_bins)?;
                bins.insert(e.name.clone(), edges);
                (n_bins, structure, 1)
            }
            EffectKind::CarSpatial => {
                let graph = graph.ok_or_else(|| {
                    Error::InvalidModel(format!(
                        "spatial effect `{}` needs an adjacency graph",
                        e.name
                    ))
                })?;
                let structure =
                    build_car_precision(graph, 1.0)?.with_added_diagonal(INTRINSIC_JITTER);
                (graph.n_units(), structure, graph.n_components())
            }
        };

        let mut n_rows = 0;
        if e.sum_to_zero && e.kind != EffectKind::Intercept && e.kind != EffectKind::Linear {
            if e.kind == EffectKind::CarSpatial {
                let labels = graph.expect("checked above").components();
                let n_comp = nullity;
                if n_comp > 1 {
                    log::warn!(
                        "adjacency graph has {n_comp} connected components; one sum-to-zero constraint per component"
                    );
                }
                for c in 0..n_comp {
                    constraint_rows.push(ConstraintRow {
                        coefficients: labels
                            .iter()
                            .enumerate()
                            .filter(|(_, &l)| l == c)
                            .map(|(u, _)| (offset + u, 1.0))
                            .collect(),
                        rhs: 0.0,
                    });
                }
                n_rows = n_comp;
            } else {
                constraint_rows.push(ConstraintRow::sum_to_zero(offset, len));
                n_rows = 1;
            }
        }
        let rank = if e.kind.is_intrinsic() {
            len - nullity
        } else {
            len - n_rows
        };
        blocks.push(Block {
            name: e.name.clone(),
            kind: e.kind,
            covariate: match e.kind {
                EffectKind::Intercept | EffectKind::CarSpatial => None,
                _ => Some(cov_name),
            },
            offset,
            len,
            prior_mean: e.prior_mean,
            precision,
            structure,
            rank,
            sum_to_zero: n_rows > 0,
        });
        offset += len;
    }

    let constraint = LinearConstraint::new(constraint_rows);
    constraint.validate(offset)?;
    let layout = LatentLayout {
        latent_dim: offset,
        blocks,
        standardization,
        bins,
        constraint,
        graph: graph.cloned(),
        estimated_block,
        hyper: hyper.estimated.clone(),
        cell_area: pixels.cell_area(),
    };
    let incidence = layout.design(pixels)?;
    Ok(ModelStructure {
        layout,
        incidence,
        observations: pixels.counts().iter().map(|&c| c as f64).collect(),
        pixel_units: pixels.unit_ids().to_vec(),
        likelihood: Likelihood::Poisson,
    })
}
