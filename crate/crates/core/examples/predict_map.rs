//! Fits a model on a checkerboard half of a lattice and predicts intensities,
//! count probabilities and unit event probabilities on the other half.
//!
//! Run with `cargo run --release --example predict_map`.

use std::collections::BTreeMap;

use coxmap::laplace::fit;
use coxmap::model::{assemble_model, EffectSpec, HyperSpec};
use coxmap::predict::{predict_surface, training_surface, Estimator};
use coxmap::sim::{simulate_dataset, LatticeSpec, SimCovariate, SimSpec};

fn main() -> coxmap::Result<()> {
    let effects = vec![
        EffectSpec::intercept(),
        EffectSpec::linear("elevation"),
        EffectSpec::rw1("elevation", 10),
        EffectSpec::car("spatial"),
    ];
    let spec = SimSpec {
        lattice: LatticeSpec::new(40, 40, 8, 8),
        covariates: vec![SimCovariate::normal("elevation")],
        effects: effects.clone(),
        theta: 1.0,
        cell_area: 225.0,
        overrides: BTreeMap::from([
            ("intercept".to_string(), vec![-7.0]),
            ("elevation".to_string(), vec![0.6]),
        ]),
    };
    let data = simulate_dataset(&spec, 5)?;
    let (train, test): (Vec<usize>, Vec<usize>) = (0..data.pixels.len()).partition(|&i| {
        let (x, y) = (data.pixels.xs()[i], data.pixels.ys()[i]);
        ((x / 15.0).floor() + (y / 15.0).floor()) as i64 % 2 == 0
    });
    let train_pixels = data.pixels.subset(&train);
    let test_pixels = data.pixels.subset(&test);

    let model = assemble_model(
        &train_pixels,
        Some(&data.graph),
        &effects,
        &HyperSpec::default_for(&effects),
    )?;
    let result = fit(&model)?;

    for estimator in [Estimator::PlugIn, Estimator::Lognormal] {
        let train_surface = training_surface(&result, &train_pixels, estimator)?;
        let test_surface = predict_surface(&result, &test_pixels, estimator)?;
        let total = |l: &[f64]| l.iter().sum::<f64>();
        println!(
            "{estimator:>9}: expected events train {:.1} (observed {}), test {:.1} (observed {})",
            total(&train_surface.lambda),
            train_pixels.counts().iter().sum::<u64>(),
            total(&test_surface.lambda),
            test_pixels.counts().iter().sum::<u64>()
        );
    }

    let surface = predict_surface(&result, &test_pixels, Estimator::Lognormal)?;
    let table = surface.count_table(2);
    println!("first test pixels: lambda, P(N=0), P(N=1), P(N=2)");
    for i in 0..3 {
        println!(
            "  {:>5} {:.4} {:.4} {:.4} {:.4}",
            surface.pixel_id[i], surface.lambda[i], table[i][0], table[i][1], table[i][2]
        );
    }
    let mut units: Vec<usize> = surface.units.unit_id.clone();
    units.sort_by(|&a, &b| surface.units.lambda[a].total_cmp(&surface.units.lambda[b]));
    println!("least susceptible test units:");
    for &u in units.iter().take(5) {
        println!(
            "  unit {u:>3}: lambda {:.3}, p = {:.3}",
            surface.units.lambda[u], surface.units.p[u]
        );
    }
    Ok(())
}
