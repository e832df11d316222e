//! Unit-blocked 4-fold cross-validation of a model with and without the CAR
//! spatial effect on data with strong spatial structure.
//!
//! Run with `cargo run --release --example cross_validation [seed]`.

use std::collections::BTreeMap;

use coxmap::eval::{cross_validate, make_cv_plan};
use coxmap::model::{EffectSpec, HyperSpec};
use coxmap::predict::Estimator;
use coxmap::sim::{simulate_dataset, LatticeSpec, SimCovariate, SimSpec};

fn main() -> coxmap::Result<()> {
    let seed: u64 = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(11);
    let covariate_effects = vec![
        EffectSpec::intercept(),
        EffectSpec::linear("elevation"),
        EffectSpec::linear("slope"),
        EffectSpec::rw1("slope", 10),
    ];
    let mut spatial = covariate_effects.clone();
    spatial.push(EffectSpec::car("spatial"));

    let spec = SimSpec {
        lattice: LatticeSpec::new(60, 60, 12, 12),
        covariates: vec![
            SimCovariate::normal("elevation"),
            SimCovariate::normal("slope"),
        ],
        effects: spatial.clone(),
        theta: 0.3,
        cell_area: 225.0,
        overrides: BTreeMap::from([
            ("intercept".to_string(), vec![-9.0]),
            ("elevation".to_string(), vec![0.4]),
            ("slope".to_string(), vec![-0.3]),
        ]),
    };
    let data = simulate_dataset(&spec, seed)?;
    let plan = make_cv_plan(data.pixels.unit_ids(), seed)?;
    println!(
        "{} units in folds of sizes {:?}, {} events",
        data.graph.n_units(),
        plan.fold_sizes(),
        data.pixels.counts().iter().sum::<u64>()
    );

    for (label, effects) in [("with CAR", &spatial), ("without CAR", &covariate_effects)] {
        let cv = cross_validate(
            &data.pixels,
            Some(&data.graph),
            effects,
            &HyperSpec::default_for(effects),
            &plan,
            Estimator::Lognormal,
        )?;
        let auc = |r: &Option<coxmap::eval::RocResult>| {
            r.as_ref()
                .map_or("NA".to_string(), |r| format!("{:.3}", r.auc))
        };
        println!(
            "{label:>12}: pooled pixel AUC {}, pooled unit AUC {}",
            auc(&cv.pooled_pixel),
            auc(&cv.pooled_unit)
        );
        for w in &cv.warnings {
            println!("warning: {w}");
        }
    }
    Ok(())
}
