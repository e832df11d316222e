use std::collections::BTreeMap;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gmrf::{factorize, AdjacencyGraph, ConstraintRow, Kriging, LinearConstraint};
use crate::laplace::MAX_LINEAR_PREDICTOR;
use crate::model::{
    assemble_model, Block, EffectKind, EffectSpec, HyperSpec, PixelRow, PixelTable,
    DEFAULT_CELL_AREA,
};

/// Rectangular pixel lattice split into `tiles_x * tiles_y` square units.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatticeSpec {
    pub nx: usize,
    pub ny: usize,
    pub tiles_x: usize,
    pub tiles_y: usize,
    /// Pixel side length, used for the `x`/`y` columns.
    #[serde(default = "default_pixel_size")]
    pub pixel_size: f64,
}

fn default_pixel_size() -> f64 {
    15.0
}

impl LatticeSpec {
    pub fn new(nx: usize, ny: usize, tiles_x: usize, tiles_y: usize) -> Self {
        LatticeSpec {
            nx,
            ny,
            tiles_x,
            tiles_y,
            pixel_size: default_pixel_size(),
        }
    }

    pub fn n_pixels(&self) -> usize {
        self.nx * self.ny
    }

    pub fn n_units(&self) -> usize {
        self.tiles_x * self.tiles_y
    }

    /// Unit index of pixel `(ix, iy)`.
    pub fn unit_of(&self, ix: usize, iy: usize) -> usize {
        (iy * self.tiles_y / self.ny) * self.tiles_x + ix * self.tiles_x / self.nx
    }

    pub fn graph(&self) -> Result<AdjacencyGraph> {
        AdjacencyGraph::lattice(self.tiles_x, self.tiles_y)
    }

    fn validate(&self) -> Result<()> {
        if self.nx == 0 || self.ny == 0 || self.tiles_x == 0 || self.tiles_y == 0 {
            return Err(Error::Config("lattice dimensions must be positive".into()));
        }
        if self.tiles_x > self.nx || self.tiles_y > self.ny {
            return Err(Error::Config("more tiles than pixels along an axis".into()));
        }
        Ok(())
    }
}

/// Distribution of a synthetic covariate, drawn independently per pixel.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "distribution", rename_all = "snake_case")]
pub enum CovariateDistribution {
    Normal {
        mean: f64,
        sd: f64,
    },
    Uniform {
        low: f64,
        high: f64,
    },
    /// Integer levels `0..n_levels`, uniformly.
    Categorical {
        n_levels: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimCovariate {
    pub name: String,
    #[serde(flatten)]
    pub distribution: CovariateDistribution,
}

impl SimCovariate {
    pub fn normal(name: &str) -> Self {
        SimCovariate {
            name: name.to_string(),
            distribution: CovariateDistribution::Normal { mean: 0.0, sd: 1.0 },
        }
    }

    pub fn uniform(name: &str, low: f64, high: f64) -> Self {
        SimCovariate {
            name: name.to_string(),
            distribution: CovariateDistribution::Uniform { low, high },
        }
    }

    pub fn categorical(name: &str, n_levels: usize) -> Self {
        SimCovariate {
            name: name.to_string(),
            distribution: CovariateDistribution::Categorical { n_levels },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimSpec {
    pub lattice: LatticeSpec,
    pub covariates: Vec<SimCovariate>,
    pub effects: Vec<EffectSpec>,
    /// Precision of the effect estimated by default (the CAR block when
    /// present); other blocks use their declared precisions.
    pub theta: f64,
    #[serde(default = "default_cell_area")]
    pub cell_area: f64,
    /// Fixed values per effect name instead of prior draws.
    #[serde(default)]
    pub overrides: BTreeMap<String, Vec<f64>>,
}

fn default_cell_area() -> f64 {
    DEFAULT_CELL_AREA
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimTruth {
    pub seed: u64,
    pub theta: f64,
    /// Latent values per effect, on the standardized covariate scale.
    pub latent: BTreeMap<String, Vec<f64>>,
    /// Full latent vector in layout order.
    pub eta: Vec<f64>,
    /// Expected count per pixel, `C exp(X_i)`.
    pub intensity: Vec<f64>,
    pub counts: Vec<u64>,
}

impl SimTruth {
    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        serde_json::to_writer_pretty(std::io::BufWriter::new(file), self)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Ok(serde_json::from_reader(std::io::BufReader::new(file))?)
    }
}

#[derive(Clone, Debug)]
pub struct SimDataset {
    pub pixels: PixelTable,
    pub graph: AdjacencyGraph,
    pub truth: SimTruth,
}

/// Draws covariates, a latent field and Poisson counts on the lattice.
pub fn simulate_dataset(spec: &SimSpec, seed: u64) -> Result<SimDataset> {
    spec.lattice.validate()?;
    if !(spec.theta > 0.0) || !spec.theta.is_finite() {
        return Err(Error::Config("simulation theta must be positive".into()));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let graph = spec.lattice.graph()?;
    if graph.n_components() > 1 {
        log::warn!("simulation graph is disconnected; constraints applied per component");
    }

    let names: Vec<String> = spec.covariates.iter().map(|c| c.name.clone()).collect();
    let mut pixels = PixelTable::new(names, spec.cell_area)?;
    let lat = &spec.lattice;
    for iy in 0..lat.ny {
        for ix in 0..lat.nx {
            let covariates = spec
                .covariates
                .iter()
                .map(|c| draw_covariate(&c.distribution, &mut rng))
                .collect::<Result<Vec<_>>>()?;
            pixels.push(PixelRow {
                pixel_id: (iy * lat.nx + ix) as i64,
                x: (ix as f64 + 0.5) * lat.pixel_size,
                y: (iy as f64 + 0.5) * lat.pixel_size,
                count: 0,
                unit_id: lat.unit_of(ix, iy),
                covariates,
            })?;
        }
    }

    let hyper = HyperSpec::default_for(&spec.effects);
    let model = assemble_model(&pixels, Some(&graph), &spec.effects, &hyper)?;
    let layout = &model.layout;
    let scales = layout.block_scales(spec.theta);

    let mut eta = vec![0.0; layout.latent_dim];
    let mut latent = BTreeMap::new();
    for (block, &tau) in layout.blocks.iter().zip(&scales) {
        let values = match spec.overrides.get(&block.name) {
            Some(v) => {
                if v.len() != block.len {
                    return Err(Error::DimensionMismatch {
                        expected: block.len,
                        got: v.len(),
                    });
                }
                v.clone()
            }
            None => draw_block(block, tau, &layout.constraint, &mut rng)?,
        };
        eta[block.range()].copy_from_slice(&values);
        latent.insert(block.name.clone(), values);
    }

    let x = model.linear_predictor(&eta);
    let mut counts = Vec::with_capacity(x.len());
    let mut intensity = Vec::with_capacity(x.len());
    for (i, &xi) in x.iter().enumerate() {
        if !(xi <= MAX_LINEAR_PREDICTOR) {
            return Err(Error::DivergingPredictor {
                pixel: i,
                value: xi,
            });
        }
        let mu = spec.cell_area * xi.exp();
        let n = if mu > 0.0 {
            Poisson::new(mu)
                .map_err(|e| Error::Config(format!("poisson mean {mu}: {e}")))?
                .sample(&mut rng) as u64
        } else {
            0
        };
        intensity.push(mu);
        counts.push(n);
    }
    pixels.set_counts(counts.clone())?;

    Ok(SimDataset {
        pixels,
        graph,
        truth: SimTruth {
            seed,
            theta: spec.theta,
            latent,
            eta,
            intensity,
            counts,
        },
    })
}

fn draw_covariate(dist: &CovariateDistribution, rng: &mut ChaCha20Rng) -> Result<f64> {
    Ok(match *dist {
        CovariateDistribution::Normal { mean, sd } => Normal::new(mean, sd)
            .map_err(|e| Error::Config(format!("covariate distribution: {e}")))?
            .sample(rng),
        CovariateDistribution::Uniform { low, high } => {
            if !(low < high) {
                return Err(Error::Config("uniform covariate needs low < high".into()));
            }
            rng.random_range(low..high)
        }
        CovariateDistribution::Categorical { n_levels } => {
            if n_levels == 0 {
                return Err(Error::Config("categorical covariate needs levels".into()));
            }
            rng.random_range(0..n_levels) as f64
        }
    })
}

fn standard_normals(n: usize, rng: &mut ChaCha20Rng) -> Vec<f64> {
    (0..n)
        .map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal))
        .collect()
}

/// Rows of `constraint` touching `block`, shifted to block-local indices.
fn block_constraint(block: &Block, constraint: &LinearConstraint) -> LinearConstraint {
    let range = block.range();
    LinearConstraint::new(
        constraint
            .rows
            .iter()
            .filter(|r| r.coefficients.iter().all(|(i, _)| range.contains(i)))
            .map(|r| ConstraintRow {
                coefficients: r
                    .coefficients
                    .iter()
                    .map(|&(i, a)| (i - block.offset, a))
                    .collect(),
                rhs: r.rhs,
            })
            .collect(),
    )
}

fn draw_block(
    block: &Block,
    tau: f64,
    constraint: &LinearConstraint,
    rng: &mut ChaCha20Rng,
) -> Result<Vec<f64>> {
    let sd = 1.0 / tau.sqrt();
    let local = block_constraint(block, constraint);
    let mut values = match block.kind {
        EffectKind::Intercept | EffectKind::Linear | EffectKind::Categorical => {
            standard_normals(block.len, rng)
                .into_iter()
                .map(|z| block.prior_mean + sd * z)
                .collect()
        }
        EffectKind::Rw1 => {
            let mut acc = 0.0;
            let mut out = vec![0.0];
            for z in standard_normals(block.len - 1, rng) {
                acc += sd * z;
                out.push(acc);
            }
            out
        }
        EffectKind::Rw1Cyclic | EffectKind::CarSpatial => {
            let q = block.structure.scaled(tau);
            let factor = factorize(&q)?;
            let x = factor.sample_with(&standard_normals(block.len, rng));
            Kriging::new(&factor, &local)?.correct(&x, &local)
        }
    };
    if block.kind == EffectKind::Rw1 || (block.kind == EffectKind::Categorical && !local.is_empty())
    {
        values = local.project(&values)?;
    }
    Ok(values)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> SimSpec {
        SimSpec {
            lattice: LatticeSpec::new(12, 12, 3, 3),
            covariates: vec![
                SimCovariate::normal("z"),
                SimCovariate::uniform("w", 0.0, 1.0),
            ],
            effects: vec![
                EffectSpec::intercept(),
                EffectSpec::linear("z"),
                EffectSpec::rw1("w", 5),
                EffectSpec::car("spatial"),
            ],
            theta: 2.7,
            cell_area: 225.0,
            overrides: BTreeMap::from([("intercept".to_string(), vec![-5.0])]),
        }
    }

    #[test]
    fn same_seed_same_table() {
        let a = simulate_dataset(&spec(), 3).unwrap();
        let b = simulate_dataset(&spec(), 3).unwrap();
        assert_eq!(a.pixels, b.pixels);
        assert_eq!(a.truth, b.truth);
        assert_ne!(a.pixels, simulate_dataset(&spec(), 4).unwrap().pixels);
    }

    #[test]
    fn constrained_blocks_sum_to_zero() {
        let d = simulate_dataset(&spec(), 11).unwrap();
        for name in ["w_rw1", "spatial"] {
            let s: f64 = d.truth.latent[name].iter().sum();
            assert!(s.abs() < 1e-10, "{name}: {s}");
        }
        assert_eq!(d.truth.latent["intercept"], vec![-5.0]);
    }

    #[test]
    fn units_tile_lattice() {
        let l = LatticeSpec::new(60, 60, 6, 6);
        assert_eq!(l.unit_of(0, 0), 0);
        assert_eq!(l.unit_of(59, 0), 5);
        assert_eq!(l.unit_of(59, 59), 35);
        assert_eq!(l.unit_of(10, 10), 7);
    }
}
