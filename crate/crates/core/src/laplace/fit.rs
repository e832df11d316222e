//! Hyperparameter marginal and grid integration of the Gaussian approximations.

use std::cell::RefCell;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gmrf::SparseSymmetric;
use crate::laplace::mode::{LaplaceEngine, ModeResult};
use crate::model::{Incidence, LatentLayout, ModelStructure};

/// Standard normal 0.975 quantile.
pub const Z_975: f64 = 1.959_963_984_540_054;

const GOLDEN_TOLERANCE: f64 = 1e-3;
const CURVATURE_STEP: f64 = 0.1;
const ENDPOINT_WEIGHT_WARNING: f64 = 0.2;

#[derive(Clone, Debug)]
pub struct HyperEval {
    pub log_posterior: f64,
    pub mode: ModeResult,
}

impl LaplaceEngine<'_> {
    /// Laplace approximation of `log pi(theta | n)` up to a constant shared by
    /// all `theta` for this model.
    pub fn log_hyper_posterior(&self, theta: f64, init: Option<&[f64]>) -> Result<HyperEval> {
        let mode = self.find_mode(theta, init)?;
        let layout = &self.model().layout;
        let log_prior = match (&layout.hyper, layout.estimated_block) {
            (Some(h), Some(_)) => h.prior.log_density(theta.ln()),
            _ => 0.0,
        };
        let log_posterior = log_prior + mode.log_joint_at_mode
            - 0.5 * mode.factor.log_determinant()
            - 0.5 * mode.kriging.log_det_m();
        Ok(HyperEval {
            log_posterior,
            mode,
        })
    }
}

pub fn log_hyper_posterior(model: &ModelStructure, theta: f64) -> Result<f64> {
    Ok(LaplaceEngine::new(model)?
        .log_hyper_posterior(theta, None)?
        .log_posterior)
}

/// Gaussian marginal summary.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Marginal {
    pub mean: f64,
    pub sd: f64,
}

impl Marginal {
    pub fn q025(&self) -> f64 {
        self.mean - Z_975 * self.sd
    }

    pub fn q975(&self) -> f64 {
        self.mean + Z_975 * self.sd
    }

    pub fn covers(&self, value: f64) -> bool {
        self.q025() <= value && value <= self.q975()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    /// Estimated precision; `None` when nothing is estimated.
    pub theta: Option<f64>,
    pub log_posterior: f64,
    pub weight: f64,
    pub newton_iters: usize,
}

/// Posterior summary of the estimated precision.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HyperSummary {
    pub effect: String,
    pub mode: f64,
    pub mean: f64,
    pub sd: f64,
    pub q025: f64,
    pub q975: f64,
    /// Posterior sd of `log(theta)` used to space the grid.
    pub log_sd: f64,
}

impl HyperSummary {
    pub fn covers(&self, value: f64) -> bool {
        self.q025 <= value && value <= self.q975
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub layout: LatentLayout,
    pub grid: Vec<GridPoint>,
    /// Mixture marginal per latent component.
    pub latent: Vec<Marginal>,
    /// Mixture posterior covariance on the sparsity pattern of the factor,
    /// which covers every pair of components sharing a training pixel.
    pub covariance: SparseSymmetric,
    /// Linear predictor marginal per training pixel.
    pub predictor: Vec<Marginal>,
    pub hyper: Option<HyperSummary>,
    pub warnings: Vec<String>,
}

struct PointSummary {
    mean: Vec<f64>,
    cov: Vec<(usize, usize, f64)>,
    pred_mean: Vec<f64>,
    pred_var: Vec<f64>,
}

fn summarize(mode: &ModeResult, incidence: &Incidence) -> PointSummary {
    let sel = mode.factor.selected_inverse();
    let kr = &mode.kriging;
    let k = kr.n_constraints();
    // Rows of W' and M^{-1} W' per latent index, so corrections are k-term dots.
    let dim = mode.mode.len();
    let (w_rows, u_rows) = if k > 0 {
        let w: Vec<Vec<f64>> = (0..dim).map(|i| kr.project_weights(&[(i, 1.0)])).collect();
        let u: Vec<Vec<f64>> = w.iter().map(|wi| kr.m_inverse_apply(wi)).collect();
        (w, u)
    } else {
        (Vec::new(), Vec::new())
    };
    let corr = |i: usize, j: usize| -> f64 {
        if k == 0 {
            0.0
        } else {
            w_rows[i].iter().zip(&u_rows[j]).map(|(a, b)| a * b).sum()
        }
    };
    let cov: Vec<(usize, usize, f64)> = sel
        .entries()
        .into_iter()
        .map(|(i, j, v)| (i, j, v - corr(i, j)))
        .collect();

    let n = incidence.n_rows();
    let mut pred_mean = Vec::with_capacity(n);
    let mut pred_var = Vec::with_capacity(n);
    for i in 0..n {
        let (c, w) = incidence.row(i);
        pred_mean.push(c.iter().zip(w).map(|(&j, &a)| a * mode.mode[j]).sum());
        let mut var = 0.0;
        for (x, (&a, &wa)) in c.iter().zip(w).enumerate() {
            for (&b, &wb) in c[x..].iter().zip(&w[x..]) {
                let s = sel
                    .get(a, b)
                    .expect("pixel pairs lie in the factor pattern")
                    - corr(a, b);
                var += if a == b {
                    wa * wa * s
                } else {
                    2.0 * wa * wb * s
                };
            }
        }
        pred_var.push(var);
    }
    PointSummary {
        mean: mode.mode.clone(),
        cov,
        pred_mean,
        pred_var,
    }
}

/// Posterior approximation: hyperparameter grid plus mixture marginals.
pub fn fit(model: &ModelStructure) -> Result<FitResult> {
    let engine = LaplaceEngine::new(model)?;
    let layout = &model.layout;
    let mut warnings = Vec::new();

    let (points, summaries, hyper) = match (&layout.hyper, layout.estimated_block) {
        (Some(h), Some(block)) => {
            let eval = |u: f64, init: Option<&[f64]>| engine.log_hyper_posterior(u.exp(), init);
            let last_mode: RefCell<Option<Vec<f64>>> = RefCell::new(None);
            let mut search = |u: f64| -> f64 {
                let init = last_mode.borrow().clone();
                match eval(u, init.as_deref()) {
                    Ok(e) => {
                        *last_mode.borrow_mut() = Some(e.mode.mode.clone());
                        e.log_posterior
                    }
                    Err(err) => {
                        log::debug!("hyperparameter evaluation failed at log theta {u}: {err}");
                        f64::NEG_INFINITY
                    }
                }
            };
            let [lo, hi] = h.search_log_interval;
            let u_star = golden_section_max(&mut search, lo, hi, GOLDEN_TOLERANCE);
            if (u_star - lo).abs() < 10.0 * GOLDEN_TOLERANCE
                || (hi - u_star).abs() < 10.0 * GOLDEN_TOLERANCE
            {
                warnings.push(format!(
                    "hyperparameter mode at the edge of the search interval [{lo}, {hi}]"
                ));
            }
            let init = last_mode.borrow().clone();
            let center = eval(u_star, init.as_deref())?;
            let f0 = center.log_posterior;
            let fp = search(u_star + CURVATURE_STEP);
            let fm = search(u_star - CURVATURE_STEP);
            let curvature = -(fp - 2.0 * f0 + fm) / (CURVATURE_STEP * CURVATURE_STEP);
            let log_sd = if curvature > 0.0 && curvature.is_finite() {
                1.0 / curvature.sqrt()
            } else {
                warnings.push("flat hyperparameter posterior at the mode; grid sd set to 1".into());
                1.0
            };
            let spacing = h.grid_step_sd * log_sd;
            let half = (h.grid_points as f64 - 1.0) / 2.0;
            let grid_u: Vec<f64> = (0..h.grid_points)
                .map(|k| u_star + (k as f64 - half) * spacing)
                .collect();
            let init = center.mode.mode.clone();
            let evaluated: Vec<Option<(f64, f64, usize, PointSummary)>> = grid_u
                .par_iter()
                .map(|&u| match eval(u, Some(&init)) {
                    Ok(e) => Some((
                        u,
                        e.log_posterior,
                        e.mode.n_newton_iters,
                        summarize(&e.mode, &model.incidence),
                    )),
                    Err(err) => {
                        log::warn!("grid point log theta = {u} failed: {err}");
                        None
                    }
                })
                .collect();
            let n_failed = evaluated.iter().filter(|e| e.is_none()).count();
            if n_failed > 0 {
                warnings.push(format!("{n_failed} grid points failed and were dropped"));
            }
            let ok: Vec<_> = evaluated.into_iter().flatten().collect();
            if ok.is_empty() {
                return Err(Error::AllGridPointsFailed);
            }
            let weights = normalized_weights(ok.iter().map(|p| p.1));
            let points: Vec<GridPoint> = ok
                .iter()
                .zip(&weights)
                .map(|(p, &w)| GridPoint {
                    theta: Some(p.0.exp()),
                    log_posterior: p.1,
                    weight: w,
                    newton_iters: p.2,
                })
                .collect();
            let endpoint = weights[0].max(weights[weights.len() - 1]);
            if weights.len() > 1 && endpoint > ENDPOINT_WEIGHT_WARNING {
                warnings.push(format!(
                    "{:.1}% of posterior weight on a grid endpoint; grid may be too narrow",
                    100.0 * endpoint
                ));
            }
            let us: Vec<f64> = ok.iter().map(|p| p.0).collect();
            let summary = hyper_summary(
                &layout.blocks[block].name,
                &us,
                &weights,
                spacing,
                u_star,
                log_sd,
            );
            let summaries = ok.into_iter().map(|p| p.3).collect::<Vec<_>>();
            (points, summaries, Some(summary))
        }
        _ => {
            let e = engine.log_hyper_posterior(1.0, None)?;
            let point = GridPoint {
                theta: None,
                log_posterior: e.log_posterior,
                weight: 1.0,
                newton_iters: e.mode.n_newton_iters,
            };
            (
                vec![point],
                vec![summarize(&e.mode, &model.incidence)],
                None,
            )
        }
    };

    for w in &warnings {
        log::warn!("{w}");
    }
    let weights: Vec<f64> = points.iter().map(|p| p.weight).collect();
    let dim = model.latent_dim();
    let mean = mix_means(summaries.iter().map(|s| s.mean.as_slice()), &weights, dim);

    let n_cov = summaries[0].cov.len();
    let mut cov_vals = vec![0.0; n_cov];
    for (s, &w) in summaries.iter().zip(&weights) {
        for (slot, &(i, j, v)) in s.cov.iter().enumerate() {
            cov_vals[slot] += w * (v + (s.mean[i] - mean[i]) * (s.mean[j] - mean[j]));
        }
    }
    let mut diag = vec![0.0; dim];
    for (&(i, j, _), &v) in summaries[0].cov.iter().zip(&cov_vals) {
        if i == j {
            diag[i] = v;
        }
    }
    let covariance = SparseSymmetric::from_triplets(
        dim,
        summaries[0]
            .cov
            .iter()
            .zip(&cov_vals)
            .map(|(&(i, j, _), &v)| (i, j, v))
            .collect::<Vec<_>>(),
    )?;
    let latent = mean
        .iter()
        .zip(&diag)
        .map(|(&m, &v)| Marginal {
            mean: m,
            sd: v.max(0.0).sqrt(),
        })
        .collect();

    let n_pix = model.n_pixels();
    let pred_mean = mix_means(
        summaries.iter().map(|s| s.pred_mean.as_slice()),
        &weights,
        n_pix,
    );
    let mut pred_var = vec![0.0; n_pix];
    for (s, &w) in summaries.iter().zip(&weights) {
        for i in 0..n_pix {
            pred_var[i] += w * (s.pred_var[i] + (s.pred_mean[i] - pred_mean[i]).powi(2));
        }
    }
    let predictor = pred_mean
        .iter()
        .zip(&pred_var)
        .map(|(&m, &v)| Marginal {
            mean: m,
            sd: v.max(0.0).sqrt(),
        })
        .collect();

    Ok(FitResult {
        layout: layout.clone(),
        grid: points,
        latent,
        covariance,
        predictor,
        hyper,
        warnings,
    })
}

fn mix_means<'a, I>(means: I, weights: &[f64], len: usize) -> Vec<f64>
where
    I: Iterator<Item = &'a [f64]>,
{
    let mut out = vec![0.0; len];
    for (m, &w) in means.zip(weights) {
        for (o, v) in out.iter_mut().zip(m) {
            *o += w * v;
        }
    }
    out
}

fn normalized_weights<I: Iterator<Item = f64>>(log_values: I) -> Vec<f64> {
    let lv: Vec<f64> = log_values.collect();
    let max = lv.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let raw: Vec<f64> = lv.iter().map(|v| (v - max).exp()).collect();
    let total: f64 = raw.iter().sum();
    raw.iter().map(|r| r / total).collect()
}

/// Treats each grid point as a cell of width `spacing` in `log(theta)`.
fn hyper_summary(
    effect: &str,
    us: &[f64],
    weights: &[f64],
    spacing: f64,
    u_star: f64,
    log_sd: f64,
) -> HyperSummary {
    let mean: f64 = us.iter().zip(weights).map(|(u, w)| w * u.exp()).sum();
    let second: f64 = us
        .iter()
        .zip(weights)
        .map(|(u, w)| w * (2.0 * u).exp())
        .sum();
    let quantile = |p: f64| -> f64 {
        let mut acc = 0.0;
        for (u, w) in us.iter().zip(weights) {
            if acc + w >= p {
                let frac = if *w > 0.0 { (p - acc) / w } else { 0.5 };
                return (u - 0.5 * spacing + frac * spacing).exp();
            }
            acc += w;
        }
        (us[us.len() - 1] + 0.5 * spacing).exp()
    };
    HyperSummary {
        effect: effect.to_string(),
        mode: u_star.exp(),
        mean,
        sd: (second - mean * mean).max(0.0).sqrt(),
        q025: quantile(0.025),
        q975: quantile(0.975),
        log_sd,
    }
}

/// Golden-section search for the maximum of a unimodal function on `[a, b]`.
pub fn golden_section_max<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64, tol: f64) -> f64 {
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (a, b);
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while b - a > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = f(d);
        }
    }
    if fc >= fd {
        c
    } else {
        d
    }
}

impl FitResult {
    pub fn block_marginals(&self, name: &str) -> Option<&[Marginal]> {
        self.layout.block(name).map(|b| &self.latent[b.range()])
    }

    /// Posterior mean of the estimated precision, or `None` when nothing is
    /// estimated.
    pub fn theta_mean(&self) -> Option<f64> {
        self.hyper.as_ref().map(|h| h.mean)
    }

    /// Precision scale of block `name` for plug-in use: the posterior mean
    /// when estimated, the fixed value otherwise.
    pub fn block_precision(&self, name: &str) -> Option<f64> {
        let k = self.layout.block_index(name)?;
        if Some(k) == self.layout.estimated_block {
            self.theta_mean()
        } else {
            Some(self.layout.blocks[k].precision)
        }
    }

    /// Mean and variance of `sum_k w_k eta_k` for each incidence row, skipping
    /// latent indices in `skip`. Pairs outside the stored covariance pattern
    /// contribute zero covariance.
    pub fn predictor_moments(
        &self,
        incidence: &Incidence,
        skip: Option<std::ops::Range<usize>>,
    ) -> (Vec<f64>, Vec<f64>) {
        let keep = |j: usize| skip.as_ref().is_none_or(|r| !r.contains(&j));
        let n = incidence.n_rows();
        let mut means = Vec::with_capacity(n);
        let mut vars = Vec::with_capacity(n);
        for i in 0..n {
            let (c, w) = incidence.row(i);
            let mut m = 0.0;
            let mut v = 0.0;
            for (x, (&a, &wa)) in c.iter().zip(w).enumerate() {
                if !keep(a) {
                    continue;
                }
                m += wa * self.latent[a].mean;
                for (&b, &wb) in c[x..].iter().zip(&w[x..]) {
                    if !keep(b) {
                        continue;
                    }
                    let s = self.covariance.get(a, b);
                    v += if a == b {
                        wa * wa * s
                    } else {
                        2.0 * wa * wb * s
                    };
                }
            }
            means.push(m);
            vars.push(v.max(0.0));
        }
        (means, vars)
    }
}
