//! Draws a synthetic lattice dataset and writes it in the CLI input format.
//!
//! Run with `cargo run --example simulate -- <out_dir>`.

use std::collections::BTreeMap;
use std::fs::File;
use std::path::PathBuf;

use coxmap::model::EffectSpec;
use coxmap::sim::{simulate_dataset, LatticeSpec, SimCovariate, SimSpec};

fn main() -> coxmap::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "sim_out".into()));
    std::fs::create_dir_all(&out)?;
    let spec = SimSpec {
        lattice: LatticeSpec::new(30, 30, 5, 5),
        covariates: vec![
            SimCovariate::normal("elevation"),
            SimCovariate::uniform("aspect", 0.0, 360.0),
            SimCovariate::categorical("lithology", 4),
        ],
        effects: vec![
            EffectSpec::intercept(),
            EffectSpec::linear("elevation"),
            EffectSpec::rw1_cyclic("aspect", 8),
            EffectSpec::categorical("lithology", 4),
            EffectSpec::car("spatial"),
        ],
        theta: 1.5,
        cell_area: 225.0,
        overrides: BTreeMap::from([("intercept".to_string(), vec![-7.5])]),
    };
    let data = simulate_dataset(&spec, 3)?;
    data.pixels.save(&out.join("pixels.csv"))?;
    data.graph
        .write_csv(File::create(out.join("adjacency.csv"))?)?;
    data.truth.save(&out.join("truth.json"))?;

    let events: u64 = data.pixels.counts().iter().sum();
    let expected: f64 = data.truth.intensity.iter().sum();
    println!(
        "{} pixels, {events} events (expected {expected:.1}), written to {}",
        data.pixels.len(),
        out.display()
    );
    for (name, values) in &data.truth.latent {
        let shown: Vec<String> = values.iter().take(4).map(|v| format!("{v:+.3}")).collect();
        println!("{name:>10}: {}", shown.join(" "));
    }
    Ok(())
}
