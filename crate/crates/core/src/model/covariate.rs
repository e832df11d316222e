use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Centering and scaling constants retained for prediction-time reuse.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub mean: f64,
    pub sd: f64,
}

impl Standardization {
    pub fn apply(&self, v: f64) -> f64 {
        (v - self.mean) / self.sd
    }

    pub fn invert(&self, z: f64) -> f64 {
        z * self.sd + self.mean
    }
}

/// Rescales to sample mean 0 and sample standard deviation 1 (n - 1 denominator).
pub fn standardize(values: &[f64]) -> Result<(Vec<f64>, Standardization)> {
    let n = values.len();
    if n < 2 {
        return Err(Error::ZeroVarianceCovariate(String::new()));
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    let sd = (ss / (n - 1) as f64).sqrt();
    if !(sd > 0.0) || !sd.is_finite() {
        return Err(Error::ZeroVarianceCovariate(String::new()));
    }
    let s = Standardization { mean, sd };
    Ok((values.iter().map(|&v| s.apply(v)).collect(), s))
}

pub fn destandardize(scaled: &[f64], s: &Standardization) -> Vec<f64> {
    scaled.iter().map(|&z| s.invert(z)).collect()
}

/// Equidistant bin edges over `[min, max]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinEdges {
    pub edges: Vec<f64>,
}

impl BinEdges {
    pub fn n_bins(&self) -> usize {
        self.edges.len() - 1
    }

    pub fn min(&self) -> f64 {
        self.edges[0]
    }

    pub fn max(&self) -> f64 {
        self.edges[self.edges.len() - 1]
    }

    /// Bin index of `v`; values outside the range clamp to the end bins and
    /// the maximum belongs to the last bin.
    pub fn bin_of(&self, v: f64) -> usize {
        let n = self.n_bins();
        let (lo, hi) = (self.min(), self.max());
        let raw = (n as f64 * (v - lo) / (hi - lo)).floor();
        if raw.is_nan() || raw < 0.0 {
            0
        } else {
            (raw as usize).min(n - 1)
        }
    }
}

pub fn bin_covariate(values: &[f64], n_bins: usize) -> Result<(Vec<usize>, BinEdges)> {
    if n_bins < 2 {
        return Err(Error::DegenerateRandomWalk(n_bins));
    }
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| {
            (a.min(v), b.max(v))
        });
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::DegenerateRange);
    }
    let width = (hi - lo) / n_bins as f64;
    let mut edges: Vec<f64> = (0..=n_bins).map(|k| lo + k as f64 * width).collect();
    edges[n_bins] = hi;
    let edges = BinEdges { edges };
    let idx = values.iter().map(|&v| edges.bin_of(v)).collect();
    Ok((idx, edges))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standardize_simple() {
        let (z, s) = standardize(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(z, vec![-1.0, 0.0, 1.0]);
        assert_eq!(s, Standardization { mean: 2.0, sd: 1.0 });
    }

    #[test]
    fn standardize_is_idempotent() {
        let (z, _) = standardize(&[0.3, 1.7, -2.2, 4.1, 0.0]).unwrap();
        let (z2, s2) = standardize(&z).unwrap();
        assert!(s2.mean.abs() < 1e-12 && (s2.sd - 1.0).abs() < 1e-12);
        for (a, b) in z.iter().zip(&z2) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_covariate_rejected() {
        let err = standardize(&[2.0, 2.0, 2.0]).unwrap_err();
        assert!(err.to_string().starts_with("zero variance covariate"));
    }

    #[test]
    fn binning_examples() {
        let (idx, edges) = bin_covariate(&[0.0, 0.3, 1.0], 4).unwrap();
        assert_eq!(idx, vec![0, 1, 3]);
        assert_eq!(edges.edges, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(edges.bin_of(-5.0), 0);
        assert_eq!(edges.bin_of(7.0), 3);
        assert!(bin_covariate(&[1.0, 1.0], 4).is_err());
    }
}
