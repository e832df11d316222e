use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Symmetric sparse matrix stored as its upper triangle in coordinate form.
///
/// Entries are kept sorted by `(col, row)` with `row <= col`, duplicates
/// summed, explicit zeros dropped.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SparseSymmetric {
    dim: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl SparseSymmetric {
    pub fn zeros(dim: usize) -> Self {
        SparseSymmetric {
            dim,
            entries: Vec::new(),
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::diagonal(&vec![1.0; dim])
    }

    pub fn diagonal(values: &[f64]) -> Self {
        let entries = values
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(i, v)| (i, i, *v))
            .collect();
        SparseSymmetric {
            dim: values.len(),
            entries,
        }
    }

    /// Builds from arbitrary triplets. Lower-triangle triplets are mirrored into
    /// the upper triangle, so callers must pass each off-diagonal pair once.
    pub fn from_triplets<I>(dim: usize, triplets: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        let mut raw: Vec<(usize, usize, f64)> = Vec::new();
        for (i, j, v) in triplets {
            if i >= dim || j >= dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: i.max(j) + 1,
                });
            }
            if !v.is_finite() {
                return Err(Error::InvalidModel(format!(
                    "non-finite matrix entry at ({i}, {j})"
                )));
            }
            let (r, c) = if i <= j { (i, j) } else { (j, i) };
            raw.push((r, c, v));
        }
        raw.sort_by_key(|&(r, c, _)| (c, r));
        let mut entries: Vec<(usize, usize, f64)> = Vec::with_capacity(raw.len());
        for (r, c, v) in raw {
            match entries.last_mut() {
                Some(last) if last.0 == r && last.1 == c => last.2 += v,
                _ => entries.push((r, c, v)),
            }
        }
        entries.retain(|e| e.2 != 0.0);
        Ok(SparseSymmetric { dim, entries })
    }

    pub fn from_dense(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        let mut trip = Vec::new();
        for (i, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: row.len(),
                });
            }
            for (j, &v) in row.iter().enumerate().skip(i) {
                trip.push((i, j, v));
            }
        }
        Self::from_triplets(dim, trip)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    /// Upper-triangle entries `(row, col, value)`, sorted by column then row.
    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (r, c) = if i <= j { (i, j) } else { (j, i) };
        self.entries
            .binary_search_by_key(&(c, r), |&(er, ec, _)| (ec, er))
            .map(|k| self.entries[k].2)
            .unwrap_or(0.0)
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.dim);
        let mut y = vec![0.0; self.dim];
        for &(r, c, v) in &self.entries {
            y[r] += v * x[c];
            if r != c {
                y[c] += v * x[r];
            }
        }
        y
    }

    pub fn quad_form(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.dim);
        self.entries
            .iter()
            .map(|&(r, c, v)| {
                if r == c {
                    v * x[r] * x[r]
                } else {
                    2.0 * v * x[r] * x[c]
                }
            })
            .sum()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.mul_vec(&vec![1.0; self.dim])
    }

    pub fn diagonal_values(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.dim];
        for &(r, c, v) in &self.entries {
            if r == c {
                d[r] = v;
            }
        }
        d
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let entries = if factor == 0.0 {
            Vec::new()
        } else {
            self.entries
                .iter()
                .map(|&(r, c, v)| (r, c, v * factor))
                .collect()
        };
        SparseSymmetric {
            dim: self.dim,
            entries,
        }
    }

    pub fn add(&self, other: &SparseSymmetric) -> Result<Self> {
        if other.dim != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: other.dim,
            });
        }
        Self::from_triplets(
            self.dim,
            self.entries.iter().chain(other.entries.iter()).copied(),
        )
    }

    pub fn with_added_diagonal(&self, value: f64) -> Self {
        let trip = self
            .entries
            .iter()
            .copied()
            .chain((0..self.dim).map(|i| (i, i, value)));
        Self::from_triplets(self.dim, trip).expect("diagonal shift keeps a valid matrix")
    }

    /// Places this matrix as a diagonal block at `offset` inside a `dim`-sized matrix.
    pub fn embedded(&self, offset: usize, dim: usize) -> Result<Self> {
        if offset + self.dim > dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: offset + self.dim,
            });
        }
        Ok(SparseSymmetric {
            dim,
            entries: self
                .entries
                .iter()
                .map(|&(r, c, v)| (r + offset, c + offset, v))
                .collect(),
        })
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.dim]; self.dim];
        for &(r, c, v) in &self.entries {
            out[r][c] = v;
            out[c][r] = v;
        }
        out
    }

    /// Upper-triangle sparsity pattern in storage order.
    pub fn pattern(&self) -> Vec<(usize, usize)> {
        self.entries.iter().map(|&(r, c, _)| (r, c)).collect()
    }

    pub fn values(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.2).collect()
    }
}
