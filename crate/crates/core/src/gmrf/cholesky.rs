//! Sparse Cholesky factorization `P Q P' = L L'`.
//!
//! The symbolic phase (fill-reducing ordering, elimination tree, column
//! structure of `L`) depends only on the sparsity pattern and is shared across
//! numeric refactorizations through an `Arc`.

use std::collections::BTreeSet;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::gmrf::sparse::SparseSymmetric;

#[derive(Debug, Clone)]
pub struct SymbolicCholesky {
    dim: usize,
    /// `perm[new] = old`
    perm: Vec<usize>,
    /// `iperm[old] = new`
    iperm: Vec<usize>,
    col_ptr: Vec<usize>,
    /// Row indices of `L` per column: the diagonal first, then ascending.
    row_idx: Vec<usize>,
    /// Upper-triangle input pattern this analysis was computed for.
    input_pattern: Vec<(usize, usize)>,
    /// Position in the `L` value array of each input entry.
    input_pos: Vec<usize>,
    /// Per row `j`: `(k, position of L[j, k])` for every `k < j` with `L[j, k] != 0`.
    row_ptr: Vec<usize>,
    row_entries: Vec<(usize, usize)>,
}

impl SymbolicCholesky {
    /// Analyses an upper-triangle pattern (`row <= col`, sorted, unique).
    pub fn analyze(dim: usize, pattern: &[(usize, usize)]) -> Result<Self> {
        for &(r, c) in pattern {
            if r > c || c >= dim {
                return Err(Error::InvalidModel(format!(
                    "pattern entry ({r}, {c}) is not in the upper triangle of a {dim}x{dim} matrix"
                )));
            }
        }
        let perm = minimum_degree(dim, pattern);
        let mut iperm = vec![0; dim];
        for (new, &old) in perm.iter().enumerate() {
            iperm[old] = new;
        }

        // Lower-triangle rows of the permuted input, per permuted column.
        let mut a_cols: Vec<Vec<usize>> = vec![Vec::new(); dim];
        for &(r, c) in pattern {
            let (pr, pc) = (iperm[r], iperm[c]);
            let (hi, lo) = if pr >= pc { (pr, pc) } else { (pc, pr) };
            if hi != lo {
                a_cols[lo].push(hi);
            }
        }

        let mut children: Vec<Vec<usize>> = vec![Vec::new(); dim];
        let mut col_ptr = Vec::with_capacity(dim + 1);
        let mut row_idx: Vec<usize> = Vec::new();
        let mut mark = vec![usize::MAX; dim];
        col_ptr.push(0);
        for j in 0..dim {
            let mut rows: Vec<usize> = Vec::new();
            mark[j] = j;
            for &i in &a_cols[j] {
                if mark[i] != j {
                    mark[i] = j;
                    rows.push(i);
                }
            }
            for &c in &children[j] {
                for &i in &row_idx[col_ptr[c] + 1..col_ptr[c + 1]] {
                    if mark[i] != j {
                        mark[i] = j;
                        rows.push(i);
                    }
                }
            }
            rows.sort_unstable();
            if let Some(&parent) = rows.first() {
                children[parent].push(j);
            }
            row_idx.push(j);
            row_idx.extend_from_slice(&rows);
            col_ptr.push(row_idx.len());
        }

        let find = |col: usize, row: usize| -> usize {
            let start = col_ptr[col];
            if row == col {
                return start;
            }
            let slice = &row_idx[start + 1..col_ptr[col + 1]];
            start
                + 1
                + slice
                    .binary_search(&row)
                    .expect("input entry inside fill pattern")
        };
        let input_pos = pattern
            .iter()
            .map(|&(r, c)| {
                let (pr, pc) = (iperm[r], iperm[c]);
                let (hi, lo) = if pr >= pc { (pr, pc) } else { (pc, pr) };
                find(lo, hi)
            })
            .collect();

        let mut counts = vec![0usize; dim];
        for k in 0..dim {
            for &i in &row_idx[col_ptr[k] + 1..col_ptr[k + 1]] {
                counts[i] += 1;
            }
        }
        let mut row_ptr = Vec::with_capacity(dim + 1);
        row_ptr.push(0);
        for j in 0..dim {
            row_ptr.push(row_ptr[j] + counts[j]);
        }
        let mut fill = row_ptr.clone();
        let mut row_entries = vec![(0, 0); row_ptr[dim]];
        for k in 0..dim {
            for p in col_ptr[k] + 1..col_ptr[k + 1] {
                let i = row_idx[p];
                row_entries[fill[i]] = (k, p);
                fill[i] += 1;
            }
        }

        Ok(SymbolicCholesky {
            dim,
            perm,
            iperm,
            col_ptr,
            row_idx,
            input_pattern: pattern.to_vec(),
            input_pos,
            row_ptr,
            row_entries,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Fill-reducing ordering, `permutation()[new] = old`.
    pub fn permutation(&self) -> &[usize] {
        &self.perm
    }

    pub fn factor_nnz(&self) -> usize {
        self.row_idx.len()
    }

    pub fn input_pattern(&self) -> &[(usize, usize)] {
        &self.input_pattern
    }

    /// Numeric factorization for values laid out like `input_pattern`.
    pub fn factorize_values(self: &Arc<Self>, values: &[f64]) -> Result<CholeskyFactor> {
        if values.len() != self.input_pattern.len() {
            return Err(Error::DimensionMismatch {
                expected: self.input_pattern.len(),
                got: values.len(),
            });
        }
        let n = self.dim;
        let mut vals = vec![0.0; self.row_idx.len()];
        for (&pos, &v) in self.input_pos.iter().zip(values) {
            vals[pos] += v;
        }
        let mut work = vec![0.0; n];
        for j in 0..n {
            let (start, end) = (self.col_ptr[j], self.col_ptr[j + 1]);
            for p in start..end {
                work[self.row_idx[p]] = vals[p];
            }
            for &(k, pjk) in &self.row_entries[self.row_ptr[j]..self.row_ptr[j + 1]] {
                let ljk = vals[pjk];
                if ljk == 0.0 {
                    continue;
                }
                for p in pjk..self.col_ptr[k + 1] {
                    work[self.row_idx[p]] -= vals[p] * ljk;
                }
            }
            let d = work[j];
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::NotPositiveDefinite {
                    pivot: self.perm[j],
                });
            }
            let ljj = d.sqrt();
            vals[start] = ljj;
            work[j] = 0.0;
            for p in start + 1..end {
                let i = self.row_idx[p];
                vals[p] = work[i] / ljj;
                work[i] = 0.0;
            }
        }
        Ok(CholeskyFactor {
            symbolic: Arc::clone(self),
            values: vals,
        })
    }
}

/// Greedy minimum-degree elimination ordering on the adjacency graph of the
/// pattern. Ties are broken by the smaller index so the result is
/// deterministic.
fn minimum_degree(dim: usize, pattern: &[(usize, usize)]) -> Vec<usize> {
    let mut adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); dim];
    for &(r, c) in pattern {
        if r != c {
            adj[r].insert(c);
            adj[c].insert(r);
        }
    }
    let mut degree: Vec<usize> = adj.iter().map(BTreeSet::len).collect();
    let mut queue: BTreeSet<(usize, usize)> = (0..dim).map(|v| (degree[v], v)).collect();
    let mut order = Vec::with_capacity(dim);
    while let Some((_, v)) = queue.pop_first() {
        order.push(v);
        let nbrs: Vec<usize> = std::mem::take(&mut adj[v]).into_iter().collect();
        for &a in &nbrs {
            adj[a].remove(&v);
        }
        for (x, &a) in nbrs.iter().enumerate() {
            for &b in &nbrs[x + 1..] {
                if adj[a].insert(b) {
                    adj[b].insert(a);
                }
            }
        }
        for &a in &nbrs {
            let new_deg = adj[a].len();
            if new_deg != degree[a] {
                queue.remove(&(degree[a], a));
                degree[a] = new_deg;
                queue.insert((new_deg, a));
            }
        }
    }
    order
}

/// Numeric Cholesky factor together with its shared symbolic analysis.
#[derive(Debug, Clone)]
pub struct CholeskyFactor {
    symbolic: Arc<SymbolicCholesky>,
    values: Vec<f64>,
}

/// Factorizes a symmetric positive definite matrix.
pub fn factorize(q: &SparseSymmetric) -> Result<CholeskyFactor> {
    let symbolic = Arc::new(SymbolicCholesky::analyze(q.dim(), &q.pattern())?);
    symbolic.factorize_values(&q.values())
}

impl CholeskyFactor {
    pub fn dim(&self) -> usize {
        self.symbolic.dim
    }

    pub fn symbolic(&self) -> &Arc<SymbolicCholesky> {
        &self.symbolic
    }

    pub fn permutation(&self) -> &[usize] {
        &self.symbolic.perm
    }

    /// `log det Q`; permutation does not change the determinant.
    pub fn log_determinant(&self) -> f64 {
        let s = &self.symbolic;
        2.0 * (0..s.dim)
            .map(|j| self.values[s.col_ptr[j]].ln())
            .sum::<f64>()
    }

    /// Solves `Q x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let s = &self.symbolic;
        assert_eq!(b.len(), s.dim);
        let mut y: Vec<f64> = s.perm.iter().map(|&old| b[old]).collect();
        self.forward(&mut y);
        self.backward(&mut y);
        let mut x = vec![0.0; s.dim];
        for (new, &old) in s.perm.iter().enumerate() {
            x[old] = y[new];
        }
        x
    }

    /// Maps standard normal `z` to a draw from `N(0, Q^{-1})`.
    pub fn sample_with(&self, z: &[f64]) -> Vec<f64> {
        let s = &self.symbolic;
        assert_eq!(z.len(), s.dim);
        let mut y = z.to_vec();
        self.backward(&mut y);
        let mut x = vec![0.0; s.dim];
        for (new, &old) in s.perm.iter().enumerate() {
            x[old] = y[new];
        }
        x
    }

    /// `L y = b` in permuted coordinates.
    fn forward(&self, y: &mut [f64]) {
        let s = &self.symbolic;
        for j in 0..s.dim {
            let start = s.col_ptr[j];
            let yj = y[j] / self.values[start];
            y[j] = yj;
            for p in start + 1..s.col_ptr[j + 1] {
                y[s.row_idx[p]] -= self.values[p] * yj;
            }
        }
    }

    /// `L' x = y` in permuted coordinates.
    fn backward(&self, y: &mut [f64]) {
        let s = &self.symbolic;
        for j in (0..s.dim).rev() {
            let start = s.col_ptr[j];
            let mut acc = y[j];
            for p in start + 1..s.col_ptr[j + 1] {
                acc -= self.values[p] * y[s.row_idx[p]];
            }
            y[j] = acc / self.values[start];
        }
    }

    /// Dense `P' L L' P`, for verification on small problems.
    pub fn reconstruct(&self) -> Vec<Vec<f64>> {
        let s = &self.symbolic;
        let n = s.dim;
        let mut l = vec![vec![0.0; n]; n];
        for j in 0..n {
            for p in s.col_ptr[j]..s.col_ptr[j + 1] {
                l[s.row_idx[p]][j] = self.values[p];
            }
        }
        let mut out = vec![vec![0.0; n]; n];
        for a in 0..n {
            for b in 0..n {
                let v: f64 = (0..=a.min(b)).map(|k| l[a][k] * l[b][k]).sum();
                out[s.perm[a]][s.perm[b]] = v;
            }
        }
        out
    }

    /// Entries of `Q^{-1}` on the sparsity pattern of `L + L'`, by the
    /// Takahashi recursions.
    pub fn selected_inverse(&self) -> SelectedInverse {
        let s = &self.symbolic;
        let n = s.dim;
        let mut sigma = vec![0.0; self.values.len()];
        let lookup = |sigma: &[f64], a: usize, b: usize| -> f64 {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let start = s.col_ptr[lo];
            if lo == hi {
                return sigma[start];
            }
            let slice = &s.row_idx[start + 1..s.col_ptr[lo + 1]];
            match slice.binary_search(&hi) {
                Ok(k) => sigma[start + 1 + k],
                Err(_) => unreachable!("selected inverse lookup outside the fill pattern"),
            }
        };
        for j in (0..n).rev() {
            let (start, end) = (s.col_ptr[j], s.col_ptr[j + 1]);
            let ljj = self.values[start];
            for p in start + 1..end {
                let i = s.row_idx[p];
                let mut acc = 0.0;
                for q in start + 1..end {
                    acc += self.values[q] * lookup(&sigma, s.row_idx[q], i);
                }
                sigma[p] = -acc / ljj;
            }
            let mut acc = 0.0;
            for q in start + 1..end {
                acc += self.values[q] * sigma[q];
            }
            sigma[start] = 1.0 / (ljj * ljj) - acc / ljj;
        }
        SelectedInverse {
            symbolic: Arc::clone(&self.symbolic),
            values: sigma,
        }
    }
}

/// Covariance entries on the factor pattern.
#[derive(Debug, Clone)]
pub struct SelectedInverse {
    symbolic: Arc<SymbolicCholesky>,
    values: Vec<f64>,
}

impl SelectedInverse {
    /// `Q^{-1}[i, j]` in original indices, or `None` when the pair lies outside
    /// the factor pattern.
    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        let s = &self.symbolic;
        let (a, b) = (s.iperm[i], s.iperm[j]);
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let start = s.col_ptr[lo];
        if lo == hi {
            return Some(self.values[start]);
        }
        s.row_idx[start + 1..s.col_ptr[lo + 1]]
            .binary_search(&hi)
            .ok()
            .map(|k| self.values[start + 1 + k])
    }

    pub fn diagonal(&self) -> Vec<f64> {
        let s = &self.symbolic;
        let mut d = vec![0.0; s.dim];
        for (new, &old) in s.perm.iter().enumerate() {
            d[old] = self.values[s.col_ptr[new]];
        }
        d
    }

    /// All stored pairs `(i, j, value)` in original indices with `i <= j`.
    pub fn entries(&self) -> Vec<(usize, usize, f64)> {
        let s = &self.symbolic;
        let mut out = Vec::with_capacity(self.values.len());
        for col in 0..s.dim {
            for p in s.col_ptr[col]..s.col_ptr[col + 1] {
                let (a, b) = (s.perm[s.row_idx[p]], s.perm[col]);
                out.push((a.min(b), a.max(b), self.values[p]));
            }
        }
        out.sort_by_key(|&(r, c, _)| (c, r));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn max_abs(v: &[f64]) -> f64 {
        v.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    #[test]
    fn identity_log_det_is_zero() {
        let f = factorize(&SparseSymmetric::identity(5)).unwrap();
        assert_eq!(f.log_determinant(), 0.0);
    }

    #[test]
    fn two_by_two_log_det() {
        let q = SparseSymmetric::from_dense(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let f = factorize(&q).unwrap();
        assert!((f.log_determinant() - 3f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn indefinite_reports_pivot() {
        let q = SparseSymmetric::from_dense(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
        match factorize(&q) {
            Err(Error::NotPositiveDefinite { pivot }) => assert!(pivot < 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_diagonal_is_not_pd() {
        let q = SparseSymmetric::from_triplets(2, vec![(0, 0, 1.0)]).unwrap();
        assert!(matches!(
            factorize(&q),
            Err(Error::NotPositiveDefinite { pivot: 1 })
        ));
    }

    #[test]
    fn tridiagonal_solve_and_reconstruct() {
        let n = 30;
        let mut trip = Vec::new();
        for i in 0..n {
            trip.push((i, i, 2.5));
            if i + 1 < n {
                trip.push((i, i + 1, -1.0));
            }
        }
        let q = SparseSymmetric::from_triplets(n, trip).unwrap();
        let f = factorize(&q).unwrap();
        let b: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let x = f.solve(&b);
        let r: Vec<f64> = q.mul_vec(&x).iter().zip(&b).map(|(a, b)| a - b).collect();
        assert!(max_abs(&r) <= 1e-12 * max_abs(&b));
        let dense = q.to_dense();
        let rec = f.reconstruct();
        for i in 0..n {
            for j in 0..n {
                assert!((rec[i][j] - dense[i][j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn selected_inverse_diagonal_small() {
        let q = SparseSymmetric::from_dense(&[
            vec![4.0, 1.0, 0.0],
            vec![1.0, 3.0, 1.0],
            vec![0.0, 1.0, 2.0],
        ])
        .unwrap();
        let f = factorize(&q).unwrap();
        let sel = f.selected_inverse();
        for i in 0..3 {
            let mut e = vec![0.0; 3];
            e[i] = 1.0;
            let col = f.solve(&e);
            assert!((sel.diagonal()[i] - col[i]).abs() < 1e-14);
            for j in 0..3 {
                if let Some(v) = sel.get(i, j) {
                    assert!((v - col[j]).abs() < 1e-14);
                }
            }
        }
    }
}
