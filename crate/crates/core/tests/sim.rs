mod common;

use std::collections::BTreeMap;

use common::dense;
use coxmap::gmrf::build_car_precision;
use coxmap::model::{assemble_model, EffectSpec, HyperSpec};
use coxmap::sim::{integrate_2d, simulate_dataset, LatticeSpec, SimCovariate, SimSpec, SimTruth};

fn spec() -> SimSpec {
    SimSpec {
        lattice: LatticeSpec::new(20, 20, 4, 4),
        covariates: vec![
            SimCovariate::normal("elevation"),
            SimCovariate::uniform("aspect", 0.0, 360.0),
            SimCovariate::categorical("lithology", 3),
        ],
        effects: vec![
            EffectSpec::intercept(),
            EffectSpec::linear("elevation"),
            EffectSpec::rw1("elevation", 6),
            EffectSpec::rw1_cyclic("aspect", 8),
            EffectSpec::categorical("lithology", 3),
            EffectSpec::car("spatial"),
        ],
        theta: 1.5,
        cell_area: 225.0,
        overrides: BTreeMap::from([("intercept".to_string(), vec![-6.0])]),
    }
}

#[test]
fn same_seed_same_dataset() {
    let a = simulate_dataset(&spec(), 5).unwrap();
    let b = simulate_dataset(&spec(), 5).unwrap();
    let c = simulate_dataset(&spec(), 6).unwrap();
    assert_eq!(a.pixels, b.pixels);
    assert_eq!(a.truth, b.truth);
    assert_ne!(a.truth.counts, c.truth.counts);
}

#[test]
fn truth_is_consistent_with_the_model() {
    let s = spec();
    let data = simulate_dataset(&s, 7).unwrap();
    let t = &data.truth;
    assert_eq!(t.latent["intercept"], [-6.0]);
    assert_eq!(data.pixels.counts(), t.counts.as_slice());
    assert_eq!(data.graph.n_units(), 16);

    let model = assemble_model(
        &data.pixels,
        Some(&data.graph),
        &s.effects,
        &HyperSpec::default_for(&s.effects),
    )
    .unwrap();
    let mut latent = vec![0.0; model.latent_dim()];
    for b in &model.layout.blocks {
        latent[b.range()].copy_from_slice(&t.latent[&b.name]);
        if b.sum_to_zero {
            assert!(
                t.latent[&b.name].iter().sum::<f64>().abs() < 1e-9,
                "{}",
                b.name
            );
        }
    }
    assert_eq!(latent, t.eta);
    let x = model.incidence.predictor(&latent);
    for i in 0..x.len() {
        assert!((t.intensity[i] - 225.0 * x[i].exp()).abs() < 1e-12 * t.intensity[i]);
    }

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("truth.json");
    t.save(&path).unwrap();
    assert_eq!(&SimTruth::load(&path).unwrap(), t);
}

#[test]
fn counts_are_equidispersed() {
    let s = SimSpec {
        lattice: LatticeSpec::new(100, 100, 1, 1),
        covariates: vec![],
        effects: vec![EffectSpec::intercept()],
        theta: 1.0,
        cell_area: 225.0,
        overrides: BTreeMap::from([("intercept".to_string(), vec![(1.7f64 / 225.0).ln()])]),
    };
    let data = simulate_dataset(&s, 8).unwrap();
    let y: Vec<f64> = data.truth.counts.iter().map(|&c| c as f64).collect();
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    assert!((mean - 1.7).abs() < 4.0 * (1.7f64 / n).sqrt());
    assert!((var / mean - 1.0).abs() < 0.06);
}

#[test]
fn car_draws_have_pseudo_inverse_covariance() {
    let tau = 2.0;
    let s = SimSpec {
        lattice: LatticeSpec::new(3, 3, 3, 3),
        covariates: vec![],
        effects: vec![EffectSpec::intercept(), EffectSpec::car("spatial")],
        theta: tau,
        cell_area: 225.0,
        overrides: BTreeMap::from([("intercept".to_string(), vec![-10.0])]),
    };
    let graph = s.lattice.graph().unwrap();
    let q = dense(&build_car_precision(&graph, tau).unwrap());
    let cov = q.pseudo_inverse(1e-10).unwrap();
    let n = graph.n_units();
    let draws = 6000;
    let mut acc = nalgebra::DMatrix::<f64>::zeros(n, n);
    for seed in 0..draws {
        let x = nalgebra::DVector::from_vec(
            simulate_dataset(&s, seed).unwrap().truth.latent["spatial"].clone(),
        );
        acc += &x * x.transpose();
    }
    acc /= draws as f64;
    for i in 0..n {
        let se = cov[(i, i)] * (2.0 / draws as f64).sqrt();
        assert!((acc[(i, i)] - cov[(i, i)]).abs() < 4.0 * se, "unit {i}");
    }
}

#[test]
fn nested_quadrature_of_a_product_density() {
    let v = integrate_2d(
        |x, y| (-x * x / 2.0).exp() * (-(y - 1.0).powi(2) / 8.0).exp(),
        (-12.0, 12.0),
        (-25.0, 25.0),
        1e-10,
    )
    .unwrap();
    let want = 2.0 * std::f64::consts::PI * 2.0;
    assert!((v / want - 1.0).abs() < 1e-9);
}
