#![allow(dead_code)]

use coxmap::gmrf::{AdjacencyGraph, SparseSymmetric};
use coxmap::model::{PixelRow, PixelTable};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};

pub fn dense(q: &SparseSymmetric) -> DMatrix<f64> {
    DMatrix::from_fn(q.dim(), q.dim(), |i, j| q.get(i, j))
}

/// Random graph with every unit connected to at least one other; may have
/// several components.
pub fn random_graph(rng: &mut ChaCha20Rng, n: usize, extra_edges: usize) -> AdjacencyGraph {
    let mut edges = Vec::new();
    for u in 1..n {
        if rng.random_bool(0.85) {
            edges.push((u, rng.random_range(0..u)));
        }
    }
    for _ in 0..extra_edges {
        let a = rng.random_range(0..n);
        let b = rng.random_range(0..n);
        if a != b {
            edges.push((a, b));
        }
    }
    let mut degree = vec![0usize; n];
    for &(a, b) in &edges {
        degree[a] += 1;
        degree[b] += 1;
    }
    for u in 0..n {
        if degree[u] == 0 {
            let v = if u + 1 < n { u + 1 } else { u - 1 };
            edges.push((u, v));
            degree[u] += 1;
            degree[v] += 1;
        }
    }
    AdjacencyGraph::from_edges(n, edges).unwrap()
}

/// Number of eigenvalues below `tol` times the largest.
pub fn null_dimension(m: &DMatrix<f64>, tol: f64) -> usize {
    let eig = m.clone().symmetric_eigen();
    let max = eig.eigenvalues.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    eig.eigenvalues
        .iter()
        .filter(|v| v.abs() < tol * max)
        .count()
}

pub fn normal(rng: &mut ChaCha20Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Pixel table with standard normal covariates, units assigned round-robin
/// and Poisson counts drawn from `rate(pixel_index, covariates)`.
pub fn toy_pixels<F: Fn(usize, &[f64]) -> f64>(
    rng: &mut ChaCha20Rng,
    n: usize,
    names: &[&str],
    n_units: usize,
    cell_area: f64,
    rate: F,
) -> PixelTable {
    let mut table =
        PixelTable::new(names.iter().map(|s| s.to_string()).collect(), cell_area).unwrap();
    for i in 0..n {
        let covariates: Vec<f64> = names.iter().map(|_| normal(rng)).collect();
        let mean = rate(i, &covariates);
        let count = if mean > 0.0 {
            Poisson::new(mean).unwrap().sample(rng) as u64
        } else {
            0
        };
        table
            .push(PixelRow {
                pixel_id: i as i64,
                x: (i % 50) as f64 * 15.0 + 7.5,
                y: (i / 50) as f64 * 15.0 + 7.5,
                count,
                unit_id: i % n_units.max(1),
                covariates,
            })
            .unwrap();
    }
    table
}

/// Sample standardization with the n - 1 denominator.
pub fn standardized(values: &[f64]) -> Vec<f64> {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sd = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    values.iter().map(|v| (v - mean) / sd).collect()
}

/// Poisson maximum likelihood for `y ~ Poisson(exp(offset + X b))` by
/// iteratively reweighted least squares.
pub fn irls(x: &DMatrix<f64>, y: &[f64], offset: f64) -> DVector<f64> {
    let p = x.ncols();
    let mut beta = DVector::zeros(p);
    let ybar = y.iter().sum::<f64>() / y.len() as f64;
    beta[0] = ybar.max(1e-3).ln() - offset;
    for _ in 0..100 {
        let eta = x * &beta;
        let mu: Vec<f64> = eta.iter().map(|e| (offset + e).exp()).collect();
        let mut xtwx = DMatrix::zeros(p, p);
        let mut xtwz = DVector::zeros(p);
        for i in 0..x.nrows() {
            let row = x.row(i).transpose();
            let z = eta[i] + (y[i] - mu[i]) / mu[i];
            xtwx += mu[i] * &row * row.transpose();
            xtwz += mu[i] * z * &row;
        }
        let next = xtwx.cholesky().unwrap().solve(&xtwz);
        let change = (&next - &beta).amax();
        beta = next;
        if change < 1e-13 {
            break;
        }
    }
    beta
}

/// AUC by explicit comparison of every positive/negative pair.
pub fn pairwise_auc(scores: &[f64], labels: &[bool]) -> f64 {
    let mut doubled = 0u64;
    let (mut pos, mut neg) = (0u64, 0u64);
    for (i, &li) in labels.iter().enumerate() {
        if li {
            pos += 1;
        } else {
            neg += 1;
        }
        if !li {
            continue;
        }
        for (j, &lj) in labels.iter().enumerate() {
            if lj {
                continue;
            }
            if scores[i] > scores[j] {
                doubled += 2;
            } else if scores[i] == scores[j] {
                doubled += 1;
            }
        }
    }
    doubled as f64 / (2 * pos * neg) as f64
}

/// Pixel table and effect list shaped like the mod2b preset: linear terms for
/// every continuous covariate, random walks on elevation and slope, a cyclic
/// walk on aspect and a categorical lithology.
pub fn mod2b_instance(
    rng: &mut ChaCha20Rng,
    n: usize,
) -> (PixelTable, Vec<coxmap::model::EffectSpec>) {
    use coxmap::model::{CovariateCatalog, CovariateDecl, CovariateRole, Preset};
    let names = ["elevation", "slope", "ndvi", "aspect", "lithology"];
    let mut table = PixelTable::new(names.iter().map(|s| s.to_string()).collect(), 225.0).unwrap();
    for i in 0..n {
        let covariates = vec![
            normal(rng),
            normal(rng),
            normal(rng),
            rng.random_range(0.0..360.0),
            rng.random_range(0..4) as f64,
        ];
        let eta = -5.5 + 0.4 * covariates[0] - 0.3 * covariates[1];
        let mean = 225.0 * f64::exp(eta);
        table
            .push(PixelRow {
                pixel_id: i as i64,
                x: i as f64 * 15.0,
                y: 0.0,
                count: Poisson::new(mean).unwrap().sample(rng) as u64,
                unit_id: 0,
                covariates,
            })
            .unwrap();
    }
    let continuous = |name: &str| CovariateDecl {
        name: name.into(),
        role: CovariateRole::Continuous,
    };
    let catalog = CovariateCatalog {
        covariates: vec![
            continuous("elevation"),
            continuous("slope"),
            continuous("ndvi"),
            CovariateDecl {
                name: "aspect".into(),
                role: CovariateRole::Cyclic,
            },
            CovariateDecl {
                name: "lithology".into(),
                role: CovariateRole::Categorical { n_levels: 4 },
            },
        ],
        nonlinear_subset: vec!["elevation".into(), "slope".into()],
    };
    (table, Preset::Mod2b.effects(&catalog))
}

/// Central finite-difference gradient with a fourth-order stencil.
pub fn fd_gradient<F: Fn(&[f64]) -> f64>(f: F, x: &[f64], h: f64) -> Vec<f64> {
    let mut y = x.to_vec();
    (0..x.len())
        .map(|k| {
            let mut at = |d: f64| {
                y[k] = x[k] + d;
                let v = f(&y);
                y[k] = x[k];
                v
            };
            (-at(2.0 * h) + 8.0 * at(h) - 8.0 * at(-h) + at(-2.0 * h)) / (12.0 * h)
        })
        .collect()
}
