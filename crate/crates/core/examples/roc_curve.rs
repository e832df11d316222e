//! ROC curve and AUC for a handful of scored pixels, including ties.
//!
//! Run with `cargo run --example roc_curve`.

use coxmap::eval::roc_auc;

fn main() -> coxmap::Result<()> {
    let scores = [0.9, 0.8, 0.8, 0.6, 0.55, 0.4, 0.4, 0.2, 0.1, 0.05];
    let labels = [
        true, true, false, true, false, true, false, false, false, false,
    ];
    let roc = roc_auc(&scores, &labels)?;
    println!("{:>10} {:>6} {:>6}", "threshold", "fpr", "tpr");
    for ((t, f), p) in roc.thresholds.iter().zip(&roc.fpr).zip(&roc.tpr) {
        println!("{t:>10.3} {f:>6.3} {p:>6.3}");
    }
    println!("auc {:.4}", roc.auc);
    Ok(())
}
