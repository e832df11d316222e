//! Joint log posterior of the latent field and its Newton mode.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::gmrf::{CholeskyFactor, Kriging, SparseSymmetric, SymbolicCholesky};
use crate::model::ModelStructure;

pub const MAX_NEWTON_ITERS: usize = 50;
pub const VALUE_TOLERANCE: f64 = 1e-8;
pub const GRADIENT_TOLERANCE: f64 = 1e-6;

/// Value, gradient and negative Hessian of the joint log posterior.
#[derive(Clone, Debug)]
pub struct JointEval {
    pub value: f64,
    pub gradient: Vec<f64>,
    pub curvature: SparseSymmetric,
}

/// Gaussian approximation of the latent field at one hyperparameter value.
#[derive(Clone, Debug)]
pub struct ModeResult {
    pub theta: f64,
    pub mode: Vec<f64>,
    /// `Q_prior(theta) + A' D A` at the mode.
    pub curvature: SparseSymmetric,
    pub factor: CholeskyFactor,
    pub kriging: Kriging,
    /// Log likelihood plus log prior density (with its `theta` normalizer).
    pub log_joint_at_mode: f64,
    pub n_newton_iters: usize,
    /// Objective value after each accepted Newton step.
    pub trace: Vec<f64>,
}

/// Precomputed sparsity structure shared by every evaluation on one model.
pub struct LaplaceEngine<'a> {
    model: &'a ModelStructure,
    /// Upper-triangle pattern of `Q_prior + A'A`, sorted by column then row.
    pattern: Vec<(usize, usize)>,
    col_start: Vec<usize>,
    /// `(slot, block, unit-scale value)` for every prior structure entry.
    prior_slots: Vec<(usize, usize, f64)>,
    /// Column view of the incidence: `(pixel, weight)` per latent index.
    a_cols: Vec<Vec<(usize, f64)>>,
    symbolic: Arc<SymbolicCholesky>,
    prior_mean: Vec<f64>,
}

impl<'a> LaplaceEngine<'a> {
    pub fn new(model: &'a ModelStructure) -> Result<Self> {
        let dim = model.latent_dim();
        let layout = &model.layout;
        let inc = &model.incidence;
        if inc.n_rows() != model.observations.len() {
            return Err(Error::DimensionMismatch {
                expected: model.observations.len(),
                got: inc.n_rows(),
            });
        }

        let mut a_cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); dim];
        for i in 0..inc.n_rows() {
            let (c, w) = inc.row(i);
            for (&j, &a) in c.iter().zip(w) {
                a_cols[j].push((i, a));
            }
        }

        // Column-wise union of prior structure and incidence cross products.
        let mut rows_of: Vec<Vec<usize>> = vec![Vec::new(); dim];
        for b in &layout.blocks {
            for &(r, c, _) in b.structure.entries() {
                rows_of[c + b.offset].push(r + b.offset);
            }
        }
        let mut mark = vec![usize::MAX; dim];
        for col in 0..dim {
            rows_of[col].push(col);
            for &r in &rows_of[col] {
                mark[r] = col;
            }
            for &(i, _) in &a_cols[col] {
                let (c, _) = inc.row(i);
                for &r in c {
                    if r <= col && mark[r] != col {
                        mark[r] = col;
                        rows_of[col].push(r);
                    }
                }
            }
            rows_of[col].sort_unstable();
            rows_of[col].dedup();
        }
        let mut pattern = Vec::new();
        let mut col_start = Vec::with_capacity(dim + 1);
        for (col, rows) in rows_of.iter().enumerate() {
            col_start.push(pattern.len());
            pattern.extend(rows.iter().map(|&r| (r, col)));
        }
        col_start.push(pattern.len());

        let slot_of = |r: usize, c: usize| -> usize {
            let s = &pattern[col_start[c]..col_start[c + 1]];
            col_start[c]
                + s.binary_search_by_key(&r, |&(rr, _)| rr)
                    .expect("entry in pattern")
        };
        let mut prior_slots = Vec::new();
        for (k, b) in layout.blocks.iter().enumerate() {
            for &(r, c, v) in b.structure.entries() {
                prior_slots.push((slot_of(r + b.offset, c + b.offset), k, v));
            }
        }

        let symbolic = Arc::new(SymbolicCholesky::analyze(dim, &pattern)?);
        Ok(LaplaceEngine {
            model,
            pattern,
            col_start,
            prior_slots,
            a_cols,
            symbolic,
            prior_mean: layout.prior_mean(),
        })
    }

    pub fn model(&self) -> &ModelStructure {
        self.model
    }

    pub fn symbolic(&self) -> &Arc<SymbolicCholesky> {
        &self.symbolic
    }

    fn check_eta(&self, eta: &[f64]) -> Result<()> {
        if eta.len() != self.model.latent_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.model.latent_dim(),
                got: eta.len(),
            });
        }
        if eta.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidModel("non-finite latent vector".into()));
        }
        Ok(())
    }

    /// Log likelihood and per-pixel derivative terms.
    fn pixel_terms(
        &self,
        eta: &[f64],
        want_derivatives: bool,
    ) -> Result<(f64, Vec<f64>, Vec<f64>)> {
        let m = self.model;
        let c = m.cell_area();
        let x = m.incidence.predictor(eta);
        let mut value = 0.0;
        let (mut g, mut d) = if want_derivatives {
            (Vec::with_capacity(x.len()), Vec::with_capacity(x.len()))
        } else {
            (Vec::new(), Vec::new())
        };
        for (i, (&xi, &yi)) in x.iter().zip(&m.observations).enumerate() {
            let t = m.likelihood.term(yi, xi, c, i)?;
            value += t.value;
            if want_derivatives {
                g.push(t.gradient);
                d.push(t.information);
            }
        }
        Ok((value, g, d))
    }

    /// `Q_prior(theta) (eta - mu)` and `(eta - mu)' Q_prior (eta - mu)`.
    fn prior_terms(&self, eta: &[f64], scales: &[f64]) -> (Vec<f64>, f64) {
        let mut qx = vec![0.0; eta.len()];
        let mut quad = 0.0;
        for (b, &s) in self.model.layout.blocks.iter().zip(scales) {
            let centered: Vec<f64> = eta[b.range()]
                .iter()
                .zip(&self.prior_mean[b.range()])
                .map(|(v, m)| v - m)
                .collect();
            let y = b.structure.mul_vec(&centered);
            for (k, (yk, ck)) in y.iter().zip(&centered).enumerate() {
                qx[b.offset + k] = s * yk;
                quad += s * yk * ck;
            }
        }
        (qx, quad)
    }

    /// Objective maximized by the Newton iteration: log likelihood minus half
    /// the prior quadratic form.
    pub fn objective(&self, eta: &[f64], theta: f64) -> Result<f64> {
        self.check_eta(eta)?;
        let scales = self.model.layout.block_scales(theta);
        let (ll, _, _) = self.pixel_terms(eta, false)?;
        let (_, quad) = self.prior_terms(eta, &scales);
        Ok(ll - 0.5 * quad)
    }

    fn curvature_values(&self, scales: &[f64], info: &[f64]) -> Vec<f64> {
        let inc = &self.model.incidence;
        let mut vals = vec![0.0; self.pattern.len()];
        for &(slot, block, v) in &self.prior_slots {
            vals[slot] += scales[block] * v;
        }
        let dim = self.model.latent_dim();
        let mut pos_of = vec![usize::MAX; dim];
        for col in 0..dim {
            for slot in self.col_start[col]..self.col_start[col + 1] {
                pos_of[self.pattern[slot].0] = slot;
            }
            for &(i, wb) in &self.a_cols[col] {
                let scale = wb * info[i];
                if scale == 0.0 {
                    continue;
                }
                let (c, w) = inc.row(i);
                for (&r, &wa) in c.iter().zip(w) {
                    if r <= col {
                        vals[pos_of[r]] += wa * scale;
                    }
                }
            }
        }
        vals
    }

    fn sym_mul(&self, vals: &[f64], x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; x.len()];
        for (&(r, c), &v) in self.pattern.iter().zip(vals) {
            y[r] += v * x[c];
            if r != c {
                y[c] += v * x[r];
            }
        }
        y
    }

    fn to_sparse(&self, vals: &[f64]) -> SparseSymmetric {
        SparseSymmetric::from_triplets(
            self.model.latent_dim(),
            self.pattern
                .iter()
                .zip(vals)
                .map(|(&(r, c), &v)| (r, c, v))
                .collect::<Vec<_>>(),
        )
        .expect("pattern entries are in range")
    }

    /// Value, gradient and curvature of the joint log posterior at `eta`.
    pub fn joint(&self, eta: &[f64], theta: f64) -> Result<JointEval> {
        self.check_eta(eta)?;
        let scales = self.model.layout.block_scales(theta);
        let (ll, g, d) = self.pixel_terms(eta, true)?;
        let (qx, quad) = self.prior_terms(eta, &scales);
        let mut gradient = self.model.incidence.transpose_mul(&g, eta.len());
        for (gr, q) in gradient.iter_mut().zip(&qx) {
            *gr -= q;
        }
        let vals = self.curvature_values(&scales, &d);
        Ok(JointEval {
            value: ll - 0.5 * quad,
            gradient,
            curvature: self.to_sparse(&vals),
        })
    }

    /// Newton iteration with step halving, constraint-corrected by kriging.
    pub fn find_mode(&self, theta: f64, init: Option<&[f64]>) -> Result<ModeResult> {
        let m = self.model;
        let layout = &m.layout;
        if layout.estimated_block.is_some() && !(theta > 0.0 && theta.is_finite()) {
            return Err(Error::InvalidModel(format!(
                "hyperparameter must be positive, got {theta}"
            )));
        }
        let constraint = &layout.constraint;
        let scales = layout.block_scales(theta);
        let start = init.map_or_else(|| self.prior_mean.clone(), <[f64]>::to_vec);
        let mut eta = constraint.project(&start)?;
        self.check_eta(&eta)?;
        let mut f = self.objective(&eta, theta)?;
        let mut trace = vec![f];
        let mut last_change = f64::INFINITY;

        for iter in 0..=MAX_NEWTON_ITERS {
            let (ll, g, d) = self.pixel_terms(&eta, true)?;
            let (qx, quad) = self.prior_terms(&eta, &scales);
            let mut grad = m.incidence.transpose_mul(&g, eta.len());
            for (gr, q) in grad.iter_mut().zip(&qx) {
                *gr -= q;
            }
            let vals = self.curvature_values(&scales, &d);
            let factor = self.symbolic.factorize_values(&vals)?;
            let kriging = Kriging::new(&factor, constraint)?;

            let projected = constraint.project_direction(&grad)?;
            let gnorm = projected.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            if gnorm < GRADIENT_TOLERANCE || last_change.abs() < VALUE_TOLERANCE {
                let log_joint = ll + layout.prior_log_density(&eta, theta);
                debug_assert!((ll - 0.5 * quad - f).abs() <= 1e-9 * f.abs().max(1.0));
                return Ok(ModeResult {
                    theta,
                    mode: eta,
                    curvature: self.to_sparse(&vals),
                    factor,
                    kriging,
                    log_joint_at_mode: log_joint,
                    n_newton_iters: iter,
                    trace,
                });
            }
            if iter == MAX_NEWTON_ITERS {
                break;
            }

            let mut rhs = self.sym_mul(&vals, &eta);
            for (r, gr) in rhs.iter_mut().zip(&grad) {
                *r += gr;
            }
            let target = kriging.correct(&factor.solve(&rhs), constraint);
            let direction: Vec<f64> = target.iter().zip(&eta).map(|(t, e)| t - e).collect();

            let mut step = 1.0;
            let mut accepted = None;
            while step > 1e-10 {
                let trial: Vec<f64> = eta
                    .iter()
                    .zip(&direction)
                    .map(|(e, d)| e + step * d)
                    .collect();
                match self.objective(&trial, theta) {
                    Ok(ft) if ft >= f => {
                        accepted = Some((trial, ft));
                        break;
                    }
                    Ok(_) | Err(Error::DivergingPredictor { .. }) => step *= 0.5,
                    Err(e) => return Err(e),
                }
            }
            match accepted {
                Some((trial, ft)) => {
                    last_change = ft - f;
                    eta = trial;
                    f = ft;
                    trace.push(f);
                }
                // No ascent along the Newton direction: numerically at the mode.
                None => last_change = 0.0,
            }
        }
        Err(Error::NoConvergence {
            iterations: MAX_NEWTON_ITERS,
            trace,
        })
    }
}

/// Joint log posterior `sum_i [n_i X_i - C exp(X_i)] - 1/2 (eta-mu)' Q (eta-mu)`
/// with its gradient and negative Hessian.
pub fn joint_log_posterior(model: &ModelStructure, eta: &[f64], theta: f64) -> Result<JointEval> {
    LaplaceEngine::new(model)?.joint(eta, theta)
}

/// Latent mode at `theta`, see [`LaplaceEngine::find_mode`].
pub fn find_mode(model: &ModelStructure, theta: f64, init: Option<&[f64]>) -> Result<ModeResult> {
    LaplaceEngine::new(model)?.find_mode(theta, init)
}
