use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::roc::{roc_auc, RocResult};
use crate::gmrf::{factorize, AdjacencyGraph, SparseSymmetric};
use crate::laplace::{fit, FitResult};
use crate::model::{assemble_model, EffectSpec, HyperSpec, PixelTable};
use crate::predict::{intensity, Estimator};

pub const DEFAULT_FOLDS: usize = 4;

/// Assignment of areal units to cross-validation folds.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CvPlan {
    pub n_folds: usize,
    pub seed: u64,
    /// Sorted distinct unit ids.
    pub units: Vec<usize>,
    /// Fold of `units[k]`.
    pub folds: Vec<usize>,
}

impl CvPlan {
    pub fn fold_of(&self, unit: usize) -> Option<usize> {
        self.units.binary_search(&unit).ok().map(|k| self.folds[k])
    }

    pub fn fold_units(&self, fold: usize) -> Vec<usize> {
        self.units
            .iter()
            .zip(&self.folds)
            .filter(|(_, &f)| f == fold)
            .map(|(&u, _)| u)
            .collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.n_folds];
        for &f in &self.folds {
            sizes[f] += 1;
        }
        sizes
    }
}

pub fn make_cv_plan(units: &[usize], seed: u64) -> Result<CvPlan> {
    make_cv_plan_with_folds(units, DEFAULT_FOLDS, seed)
}

/// Seeded uniform permutation of the distinct units, dealt round-robin.
pub fn make_cv_plan_with_folds(units: &[usize], n_folds: usize, seed: u64) -> Result<CvPlan> {
    let mut distinct = units.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    if n_folds < 2 || distinct.len() < n_folds {
        return Err(Error::TooFewUnits {
            units: distinct.len(),
            folds: n_folds,
        });
    }
    let mut shuffled = distinct.clone();
    shuffled.shuffle(&mut ChaCha20Rng::seed_from_u64(seed));
    let mut fold_of = BTreeMap::new();
    for (k, u) in shuffled.into_iter().enumerate() {
        fold_of.insert(u, k % n_folds);
    }
    Ok(CvPlan {
        n_folds,
        seed,
        folds: distinct.iter().map(|u| fold_of[u]).collect(),
        units: distinct,
    })
}

/// Held-out predictions of one fold.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldOutcome {
    pub fold: usize,
    /// Indices of the held-out pixels in the input table.
    pub pixels: Vec<usize>,
    pub pixel_lambda: Vec<f64>,
    pub pixel_labels: Vec<bool>,
    pub units: Vec<usize>,
    pub unit_lambda: Vec<f64>,
    pub unit_labels: Vec<bool>,
    pub pixel_roc: Option<RocResult>,
    pub unit_roc: Option<RocResult>,
    pub theta_mean: Option<f64>,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub folds: Vec<FoldOutcome>,
    /// ROC of the held-out scores concatenated over folds; `None` when the
    /// pooled labels hold a single class.
    pub pooled_pixel: Option<RocResult>,
    pub pooled_unit: Option<RocResult>,
    pub warnings: Vec<String>,
}

impl CvResult {
    pub fn mean_fold_auc(&self, unit_level: bool) -> Option<f64> {
        let aucs: Vec<f64> = self
            .folds
            .iter()
            .filter_map(|f| {
                if unit_level {
                    &f.unit_roc
                } else {
                    &f.pixel_roc
                }
                .as_ref()
            })
            .map(|r| r.auc)
            .collect();
        (!aucs.is_empty()).then(|| aucs.iter().sum::<f64>() / aucs.len() as f64)
    }
}

/// Unit-level scores and labels: summed intensity and whether any event
/// occurred, over units with at least one pixel, in ascending unit order.
pub fn unit_scores(
    lambda: &[f64],
    counts: &[u64],
    units: &[usize],
) -> (Vec<usize>, Vec<f64>, Vec<bool>) {
    let mut acc: BTreeMap<usize, (f64, u64)> = BTreeMap::new();
    for ((&l, &c), &u) in lambda.iter().zip(counts).zip(units) {
        let e = acc.entry(u).or_insert((0.0, 0));
        e.0 += l;
        e.1 += c;
    }
    let ids = acc.keys().copied().collect();
    let scores = acc.values().map(|v| v.0).collect();
    let labels = acc.values().map(|v| v.1 > 0).collect();
    (ids, scores, labels)
}

/// In-sample pixel and unit ROC for intensities over `pixels`.
pub fn in_sample_roc(
    lambda: &[f64],
    pixels: &PixelTable,
) -> (Result<RocResult>, Result<RocResult>) {
    let labels: Vec<bool> = pixels.counts().iter().map(|&c| c > 0).collect();
    let (_, scores, unit_labels) = unit_scores(lambda, pixels.counts(), pixels.unit_ids());
    (roc_auc(lambda, &labels), roc_auc(&scores, &unit_labels))
}

/// Unit-blocked cross-validation: each fold is fitted without the pixels of
/// its held-out units, which are then scored from the fitted posterior.
pub fn cross_validate(
    pixels: &PixelTable,
    graph: Option<&AdjacencyGraph>,
    effects: &[EffectSpec],
    hyper: &HyperSpec,
    plan: &CvPlan,
    estimator: Estimator,
) -> Result<CvResult> {
    for &u in pixels.unit_ids() {
        if plan.fold_of(u).is_none() {
            return Err(Error::Config(format!(
                "unit {u} is not covered by the CV plan"
            )));
        }
    }
    let folds: Vec<FoldOutcome> = (0..plan.n_folds)
        .into_par_iter()
        .map(|f| run_fold(pixels, graph, effects, hyper, plan, f, estimator))
        .collect::<Result<_>>()?;

    let mut lam = Vec::new();
    let mut lab = Vec::new();
    let mut ulam = Vec::new();
    let mut ulab = Vec::new();
    for f in &folds {
        lam.extend_from_slice(&f.pixel_lambda);
        lab.extend_from_slice(&f.pixel_labels);
        ulam.extend_from_slice(&f.unit_lambda);
        ulab.extend_from_slice(&f.unit_labels);
    }
    let mut warnings = Vec::new();
    let pooled_pixel = labelled_roc(&lam, &lab, "pooled pixel-level", &mut warnings);
    let pooled_unit = labelled_roc(&ulam, &ulab, "pooled unit-level", &mut warnings);
    Ok(CvResult {
        pooled_pixel,
        pooled_unit,
        folds,
        warnings,
    })
}

fn run_fold(
    pixels: &PixelTable,
    graph: Option<&AdjacencyGraph>,
    effects: &[EffectSpec],
    hyper: &HyperSpec,
    plan: &CvPlan,
    fold: usize,
    estimator: Estimator,
) -> Result<FoldOutcome> {
    let (held, train): (Vec<usize>, Vec<usize>) =
        (0..pixels.len()).partition(|&i| plan.fold_of(pixels.unit_ids()[i]) == Some(fold));
    let train_table = pixels.subset(&train);
    let held_table = pixels.subset(&held);
    let model = assemble_model(&train_table, graph, effects, hyper)?;
    let fitted = fit(&model)?;
    let mut warnings = fitted.warnings.clone();

    let incidence = fitted.layout.design(&held_table)?;
    let spatial = fitted.layout.spatial_block().cloned();
    let (mut mean, mut var) =
        fitted.predictor_moments(&incidence, spatial.as_ref().map(|b| b.range()));
    if let Some(block) = &spatial {
        let held_units = plan.fold_units(fold);
        let tau = fitted
            .block_precision(&block.name)
            .expect("spatial block exists");
        let (cond_mean, cond_var) = held_out_spatial(&fitted, block, &held_units, tau)?;
        for (i, &u) in held_table.unit_ids().iter().enumerate() {
            let (m, v) = cond_mean
                .get(&u)
                .zip(cond_var.get(&u))
                .ok_or(Error::UnmappedPixel(held[i]))?;
            mean[i] += *m;
            var[i] += *v;
        }
    }
    let pixel_lambda: Vec<f64> = mean
        .iter()
        .zip(&var)
        .map(|(&m, &v)| intensity(m, v, pixels.cell_area(), estimator))
        .collect::<Result<_>>()?;
    let pixel_labels: Vec<bool> = held_table.counts().iter().map(|&c| c > 0).collect();
    let (units, unit_lambda, unit_labels) =
        unit_scores(&pixel_lambda, held_table.counts(), held_table.unit_ids());

    let pixel_roc = labelled_roc(
        &pixel_lambda,
        &pixel_labels,
        &format!("fold {fold} pixel-level"),
        &mut warnings,
    );
    let unit_roc = labelled_roc(
        &unit_lambda,
        &unit_labels,
        &format!("fold {fold} unit-level"),
        &mut warnings,
    );
    Ok(FoldOutcome {
        fold,
        pixels: held,
        pixel_lambda,
        pixel_labels,
        units,
        unit_lambda,
        unit_labels,
        pixel_roc,
        unit_roc,
        theta_mean: fitted.theta_mean(),
        warnings,
    })
}

/// ROC of `scores`, or `None` with a warning when it is undefined.
pub fn labelled_roc(
    scores: &[f64],
    labels: &[bool],
    what: &str,
    warnings: &mut Vec<String>,
) -> Option<RocResult> {
    match roc_auc(scores, labels) {
        Ok(r) => Some(r),
        Err(e) => {
            let msg = format!("no {what} ROC: {e}");
            log::warn!("{msg}");
            warnings.push(msg);
            None
        }
    }
}

/// Conditional mean and variance of held-out CAR components given the
/// posterior means of the fitted ones, keyed by unit id.
#[allow(clippy::type_complexity)]
fn held_out_spatial(
    fitted: &FitResult,
    block: &crate::model::Block,
    held_units: &[usize],
    tau: f64,
) -> Result<(BTreeMap<usize, f64>, BTreeMap<usize, f64>)> {
    let n = block.len;
    let mut local = vec![usize::MAX; n];
    for (k, &u) in held_units.iter().enumerate() {
        local[u] = k;
    }
    let h = held_units.len();
    let fitted_mean: Vec<f64> = fitted.latent[block.range()]
        .iter()
        .map(|m| m.mean)
        .collect();
    let mut triplets = Vec::new();
    let mut rhs = vec![0.0; h];
    for &(r, c, v) in block.structure.entries() {
        match (local[r], local[c]) {
            (usize::MAX, usize::MAX) => {}
            (a, usize::MAX) => rhs[a] -= v * fitted_mean[c],
            (usize::MAX, b) => rhs[b] -= v * fitted_mean[r],
            (a, b) => triplets.push((a, b, v)),
        }
    }
    let r_hh = SparseSymmetric::from_triplets(h, triplets)?;
    let factor = factorize(&r_hh)?;
    let cond = factor.solve(&rhs);
    let diag = factor.selected_inverse().diagonal();
    let mean = held_units
        .iter()
        .zip(&cond)
        .map(|(&u, &m)| (u, m))
        .collect();
    let var = held_units
        .iter()
        .zip(&diag)
        .map(|(&u, &d)| (u, d / tau))
        .collect();
    Ok((mean, var))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eight_units_even_folds() {
        let plan = make_cv_plan(&(0..8).collect::<Vec<_>>(), 1).unwrap();
        assert_eq!(plan.fold_sizes(), vec![2, 2, 2, 2]);
    }

    #[test]
    fn deterministic() {
        let units: Vec<usize> = (0..37).collect();
        assert_eq!(
            make_cv_plan(&units, 9).unwrap(),
            make_cv_plan(&units, 9).unwrap()
        );
        assert_ne!(
            make_cv_plan(&units, 9).unwrap(),
            make_cv_plan(&units, 10).unwrap()
        );
    }

    #[test]
    fn too_few_units() {
        assert!(matches!(
            make_cv_plan(&[0, 1, 2], 0),
            Err(Error::TooFewUnits { .. })
        ));
    }

    #[test]
    fn unit_scores_sum_members() {
        let (ids, s, l) = unit_scores(&[0.1, 0.2, 0.3], &[0, 0, 2], &[4, 1, 4]);
        assert_eq!(ids, vec![1, 4]);
        assert!((s[1] - 0.4).abs() < 1e-15);
        assert_eq!(l, vec![false, true]);
    }
}
