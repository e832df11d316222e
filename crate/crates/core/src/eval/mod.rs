//! ROC/AUC scoring and unit-blocked cross-validation.

pub mod cv;
pub mod roc;

pub use cv::{
    cross_validate, in_sample_roc, labelled_roc, make_cv_plan, make_cv_plan_with_folds,
    unit_scores, CvPlan, CvResult, FoldOutcome, DEFAULT_FOLDS,
};
pub use roc::{roc_auc, RocResult};
