use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gmrf::cholesky::CholeskyFactor;

/// One linear equality `sum_k coef_k * x[idx_k] = rhs`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstraintRow {
    pub coefficients: Vec<(usize, f64)>,
    pub rhs: f64,
}

impl ConstraintRow {
    pub fn sum_to_zero(offset: usize, len: usize) -> Self {
        ConstraintRow {
            coefficients: (offset..offset + len).map(|i| (i, 1.0)).collect(),
            rhs: 0.0,
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.coefficients.iter().map(|&(i, a)| a * x[i]).sum()
    }
}

/// Set of linear equality constraints `A x = e` over the latent vector.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LinearConstraint {
    pub rows: Vec<ConstraintRow>,
}

impl LinearConstraint {
    pub fn new(rows: Vec<ConstraintRow>) -> Self {
        LinearConstraint { rows }
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    /// `A x - e`
    pub fn residual(&self, x: &[f64]) -> Vec<f64> {
        self.rows.iter().map(|r| r.eval(x) - r.rhs).collect()
    }

    pub fn max_violation(&self, x: &[f64]) -> f64 {
        self.residual(x).iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    fn dense_rows(&self, dim: usize) -> Result<Vec<Vec<f64>>> {
        self.rows
            .iter()
            .map(|row| {
                let mut a = vec![0.0; dim];
                for &(i, c) in &row.coefficients {
                    if i >= dim {
                        return Err(Error::DimensionMismatch {
                            expected: dim,
                            got: i + 1,
                        });
                    }
                    a[i] += c;
                }
                Ok(a)
            })
            .collect()
    }

    /// Euclidean projection onto the constraint set.
    pub fn project(&self, x: &[f64]) -> Result<Vec<f64>> {
        if self.is_empty() {
            return Ok(x.to_vec());
        }
        let a = self.dense_rows(x.len())?;
        let k = a.len();
        let gram = DMatrix::from_fn(k, k, |r, c| dot(&a[r], &a[c]));
        let chol = checked_cholesky(gram)?;
        let rhs = DVector::from_vec(self.residual(x));
        let lambda = chol.solve(&rhs);
        let mut out = x.to_vec();
        for (r, row) in a.iter().enumerate() {
            for (o, v) in out.iter_mut().zip(row) {
                *o -= v * lambda[r];
            }
        }
        Ok(out)
    }

    /// Euclidean projection of a direction onto the null space of `A`.
    pub fn project_direction(&self, v: &[f64]) -> Result<Vec<f64>> {
        if self.is_empty() {
            return Ok(v.to_vec());
        }
        let homogeneous = LinearConstraint {
            rows: self
                .rows
                .iter()
                .map(|r| ConstraintRow {
                    coefficients: r.coefficients.clone(),
                    rhs: 0.0,
                })
                .collect(),
        };
        homogeneous.project(v)
    }

    /// Checks that the rows are linearly independent.
    pub fn validate(&self, dim: usize) -> Result<()> {
        if self.is_empty() {
            return Ok(());
        }
        let a = self.dense_rows(dim)?;
        let k = a.len();
        if k > dim {
            return Err(Error::RedundantConstraints);
        }
        checked_cholesky(DMatrix::from_fn(k, k, |r, c| dot(&a[r], &a[c]))).map(|_| ())
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Cholesky of a small SPD matrix, rejecting numerically singular input.
fn checked_cholesky(m: DMatrix<f64>) -> Result<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
    let scale = (0..m.nrows()).map(|i| m[(i, i)]).fold(0.0, f64::max);
    let chol = m.cholesky().ok_or(Error::RedundantConstraints)?;
    let l = chol.l_dirty();
    let tiny = (0..l.nrows()).any(|i| l[(i, i)] * l[(i, i)] <= 1e-10 * scale);
    if tiny || scale <= 0.0 {
        return Err(Error::RedundantConstraints);
    }
    Ok(chol)
}

/// Precomputed conditioning-by-kriging terms for one factorized precision
/// `Q` and constraint `A x = e`: `W = Q^{-1} A'` and the Cholesky of
/// `M = A Q^{-1} A'`.
#[derive(Debug, Clone)]
pub struct Kriging {
    /// `k` columns of `W`, each of length `dim`.
    w: Vec<Vec<f64>>,
    m_chol: Option<nalgebra::Cholesky<f64, nalgebra::Dyn>>,
    log_det_m: f64,
}

impl Kriging {
    pub fn new(factor: &CholeskyFactor, constraint: &LinearConstraint) -> Result<Self> {
        if constraint.is_empty() {
            return Ok(Kriging {
                w: Vec::new(),
                m_chol: None,
                log_det_m: 0.0,
            });
        }
        let dim = factor.dim();
        let a = constraint.dense_rows(dim)?;
        let w: Vec<Vec<f64>> = a.iter().map(|row| factor.solve(row)).collect();
        let k = a.len();
        let m = DMatrix::from_fn(k, k, |r, c| constraint.rows[r].eval(&w[c]));
        let m = (&m + m.transpose()) * 0.5;
        let chol = checked_cholesky(m)?;
        let l = chol.l_dirty();
        let log_det_m = 2.0 * (0..k).map(|i| l[(i, i)].ln()).sum::<f64>();
        Ok(Kriging {
            w,
            m_chol: Some(chol),
            log_det_m,
        })
    }

    /// `x - W M^{-1} (A x - e)`
    pub fn correct(&self, x: &[f64], constraint: &LinearConstraint) -> Vec<f64> {
        let Some(chol) = &self.m_chol else {
            return x.to_vec();
        };
        let lambda = chol.solve(&DVector::from_vec(constraint.residual(x)));
        let mut out = x.to_vec();
        for (col, l) in self.w.iter().zip(lambda.iter()) {
            for (o, v) in out.iter_mut().zip(col) {
                *o -= v * l;
            }
        }
        out
    }

    /// `(W M^{-1} W')[i, j]`, the covariance removed by conditioning.
    pub fn covariance_correction(&self, i: usize, j: usize) -> f64 {
        let Some(chol) = &self.m_chol else {
            return 0.0;
        };
        let wi = DVector::from_iterator(self.w.len(), self.w.iter().map(|c| c[i]));
        let wj = DVector::from_iterator(self.w.len(), self.w.iter().map(|c| c[j]));
        wi.dot(&chol.solve(&wj))
    }

    /// Diagonal of `W M^{-1} W'`.
    pub fn variance_correction(&self) -> Vec<f64> {
        let Some(chol) = &self.m_chol else {
            return Vec::new();
        };
        let k = self.w.len();
        let dim = self.w[0].len();
        let minv = chol.inverse();
        (0..dim)
            .map(|i| {
                let mut acc = 0.0;
                for a in 0..k {
                    for b in 0..k {
                        acc += self.w[a][i] * minv[(a, b)] * self.w[b][i];
                    }
                }
                acc
            })
            .collect()
    }

    /// Rows `W' z` used to correct a linear combination `z' x`.
    pub fn project_weights(&self, weights: &[(usize, f64)]) -> Vec<f64> {
        self.w
            .iter()
            .map(|col| weights.iter().map(|&(i, a)| a * col[i]).sum())
            .collect()
    }

    /// `v' M^{-1} v` for a vector in constraint space.
    pub fn m_inverse_form(&self, v: &[f64]) -> f64 {
        match &self.m_chol {
            Some(chol) => {
                let v = DVector::from_column_slice(v);
                v.dot(&chol.solve(&v))
            }
            None => 0.0,
        }
    }

    /// `M^{-1} v` for a vector in constraint space.
    pub fn m_inverse_apply(&self, v: &[f64]) -> Vec<f64> {
        match &self.m_chol {
            Some(chol) => chol
                .solve(&DVector::from_column_slice(v))
                .iter()
                .copied()
                .collect(),
            None => Vec::new(),
        }
    }

    /// `log det (A Q^{-1} A')`, zero when unconstrained.
    pub fn log_det_m(&self) -> f64 {
        self.log_det_m
    }

    pub fn n_constraints(&self) -> usize {
        self.w.len()
    }
}

/// Mean of `N(mean, Q^{-1})` conditioned on `A x = e`.
pub fn constrain_mean(
    mean: &[f64],
    factor: &CholeskyFactor,
    constraint: &LinearConstraint,
) -> Result<Vec<f64>> {
    if mean.len() != factor.dim() {
        return Err(Error::DimensionMismatch {
            expected: factor.dim(),
            got: mean.len(),
        });
    }
    Ok(Kriging::new(factor, constraint)?.correct(mean, constraint))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gmrf::cholesky::factorize;
    use crate::gmrf::sparse::SparseSymmetric;

    #[test]
    fn centering_under_identity() {
        let f = factorize(&SparseSymmetric::identity(2)).unwrap();
        let c = LinearConstraint::new(vec![ConstraintRow::sum_to_zero(0, 2)]);
        let out = constrain_mean(&[1.0, 3.0], &f, &c).unwrap();
        assert!((out[0] + 1.0).abs() < 1e-15 && (out[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn satisfied_mean_is_unchanged() {
        let q = SparseSymmetric::from_dense(&[
            vec![3.0, 1.0, 0.0],
            vec![1.0, 2.0, 0.5],
            vec![0.0, 0.5, 1.0],
        ])
        .unwrap();
        let f = factorize(&q).unwrap();
        let c = LinearConstraint::new(vec![ConstraintRow::sum_to_zero(0, 3)]);
        let m = [0.5, -1.25, 0.75];
        let out = constrain_mean(&m, &f, &c).unwrap();
        for (a, b) in out.iter().zip(&m) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn redundant_rows_rejected() {
        let f = factorize(&SparseSymmetric::identity(3)).unwrap();
        let c = LinearConstraint::new(vec![
            ConstraintRow::sum_to_zero(0, 3),
            ConstraintRow {
                coefficients: vec![(0, 2.0), (1, 2.0), (2, 2.0)],
                rhs: 0.0,
            },
        ]);
        let err = constrain_mean(&[1.0, 2.0, 3.0], &f, &c).unwrap_err();
        assert_eq!(err.to_string(), "redundant constraints");
        assert!(c.validate(3).is_err());
    }

    #[test]
    fn euclidean_projection_satisfies_rows() {
        let c = LinearConstraint::new(vec![
            ConstraintRow::sum_to_zero(0, 2),
            ConstraintRow {
                coefficients: vec![(2, 1.0), (3, -1.0)],
                rhs: 1.0,
            },
        ]);
        let p = c.project(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert!(c.max_violation(&p) < 1e-14);
    }
}
