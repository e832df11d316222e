//! Simulates a dataset with a CAR spatial effect and fits it.
//!
//! Run with `cargo run --release --example laplace_fit`.

use std::collections::BTreeMap;
use std::time::Instant;

use coxmap::laplace::fit;
use coxmap::model::{assemble_model, EffectSpec, HyperSpec};
use coxmap::sim::{simulate_dataset, LatticeSpec, SimCovariate, SimSpec};

fn main() -> coxmap::Result<()> {
    let spec = SimSpec {
        lattice: LatticeSpec::new(60, 60, 6, 6),
        covariates: vec![
            SimCovariate::normal("elevation"),
            SimCovariate::normal("slope"),
            SimCovariate::normal("ndvi"),
        ],
        effects: vec![
            EffectSpec::intercept(),
            EffectSpec::linear("elevation"),
            EffectSpec::linear("slope"),
            EffectSpec::linear("ndvi"),
            EffectSpec::rw1("slope", 10),
            EffectSpec::car("spatial"),
        ],
        theta: 2.7,
        cell_area: 225.0,
        overrides: BTreeMap::from([
            ("intercept".to_string(), vec![-6.0]),
            ("elevation".to_string(), vec![0.5]),
            ("slope".to_string(), vec![-0.3]),
            ("ndvi".to_string(), vec![0.2]),
        ]),
    };
    let data = simulate_dataset(&spec, 42)?;
    let events: u64 = data.pixels.counts().iter().sum();
    println!(
        "{} pixels, {} units, {events} events",
        data.pixels.len(),
        data.graph.n_units()
    );

    let hyper = HyperSpec::default_for(&spec.effects);
    let model = assemble_model(&data.pixels, Some(&data.graph), &spec.effects, &hyper)?;
    let start = Instant::now();
    let result = fit(&model)?;
    println!(
        "fit in {:.2?}, {} grid points",
        start.elapsed(),
        result.grid.len()
    );

    for name in ["intercept", "elevation", "slope", "ndvi"] {
        let m = result.block_marginals(name).expect("block exists")[0];
        let truth = data.truth.latent[name][0];
        println!(
            "{name:>10}: {:+.3} [{:+.3}, {:+.3}]  truth {truth:+.3}",
            m.mean,
            m.q025(),
            m.q975()
        );
    }
    if let Some(h) = &result.hyper {
        println!(
            "{:>10}: mean {:.3} [{:.3}, {:.3}]  truth {:.3}",
            h.effect, h.mean, h.q025, h.q975, spec.theta
        );
    }
    for w in &result.warnings {
        println!("warning: {w}");
    }
    Ok(())
}
