use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// ROC curve over descending unique score thresholds. Point `k` classifies
/// scores `>= thresholds[k]` as positive; the first point uses `+inf`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RocResult {
    pub thresholds: Vec<f64>,
    pub fpr: Vec<f64>,
    pub tpr: Vec<f64>,
    pub auc: f64,
}

impl RocResult {
    /// Trapezoidal area under the stored curve.
    pub fn trapezoid_area(&self) -> f64 {
        self.fpr
            .windows(2)
            .zip(self.tpr.windows(2))
            .map(|(f, t)| (f[1] - f[0]) * (t[1] + t[0]) * 0.5)
            .sum()
    }
}

/// ROC curve and Mann-Whitney AUC, with tied scores counting one half.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<RocResult> {
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: scores.len(),
            got: labels.len(),
        });
    }
    if let Some(i) = scores.iter().position(|s| s.is_nan()) {
        return Err(Error::InvalidModel(format!("score {i} is NaN")));
    }
    let n_pos = labels.iter().filter(|&&l| l).count() as u64;
    let n_neg = labels.len() as u64 - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::DegenerateLabels);
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut thresholds = vec![f64::INFINITY];
    let mut fpr = vec![0.0];
    let mut tpr = vec![0.0];
    // Twice the Mann-Whitney count, exact in integers.
    let mut doubled: u128 = 0;
    let (mut tp, mut fp) = (0u64, 0u64);
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        let (mut gp, mut gn) = (0u64, 0u64);
        while i < order.len() && scores[order[i]] == s {
            if labels[order[i]] {
                gp += 1;
            } else {
                gn += 1;
            }
            i += 1;
        }
        // Positives in this group beat every negative scored lower.
        let lower_neg = n_neg - fp - gn;
        doubled += 2 * gp as u128 * lower_neg as u128 + gp as u128 * gn as u128;
        tp += gp;
        fp += gn;
        thresholds.push(s);
        fpr.push(fp as f64 / n_neg as f64);
        tpr.push(tp as f64 / n_pos as f64);
    }
    let auc = doubled as f64 / (2 * n_pos as u128 * n_neg as u128) as f64;
    Ok(RocResult {
        thresholds,
        fpr,
        tpr,
        auc,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_and_tied() {
        assert_eq!(roc_auc(&[0.9, 0.1], &[true, false]).unwrap().auc, 1.0);
        let r = roc_auc(&[0.3; 6], &[true, false, true, false, false, true]).unwrap();
        assert_eq!(r.auc, 0.5);
        assert_eq!(r.fpr, vec![0.0, 1.0]);
    }

    #[test]
    fn single_class_rejected() {
        let e = roc_auc(&[0.1, 0.2], &[true, true]).unwrap_err();
        assert!(e.to_string().starts_with("degenerate labels"));
    }

    #[test]
    fn curve_anchored() {
        let r = roc_auc(&[0.1, 0.4, 0.35, 0.8], &[false, false, true, true]).unwrap();
        assert_eq!((r.fpr[0], r.tpr[0]), (0.0, 0.0));
        assert_eq!((*r.fpr.last().unwrap(), *r.tpr.last().unwrap()), (1.0, 1.0));
        assert_eq!(r.auc, 0.75);
        assert!((r.trapezoid_area() - r.auc).abs() < 1e-15);
    }
}
