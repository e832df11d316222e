mod common;

use common::{dense, normal, null_dimension, random_graph};
use coxmap::gmrf::{
    build_car_precision, build_rw1_precision, constrain_mean, factorize, AdjacencyGraph,
    ConstraintRow, Kriging, LinearConstraint, SparseSymmetric,
};
use coxmap::Error;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

fn proper(q: &SparseSymmetric, ridge: f64) -> SparseSymmetric {
    SparseSymmetric::from_triplets(
        q.dim(),
        q.entries()
            .iter()
            .copied()
            .chain((0..q.dim()).map(|i| (i, i, ridge))),
    )
    .unwrap()
}

#[test]
fn car_precision_structure_on_random_graphs() {
    let mut rng = ChaCha20Rng::seed_from_u64(1);
    for _ in 0..20 {
        let n = rng.random_range(3..=50);
        let graph = random_graph(&mut rng, n, n / 3);
        let tau = rng.random_range(0.1..10.0);
        let q = dense(&build_car_precision(&graph, tau).unwrap());
        assert_eq!(q, q.transpose());
        for i in 0..n {
            assert!(q.row(i).sum().abs() < 1e-12);
            assert_eq!(q[(i, i)], tau * graph.degree(i) as f64);
        }
        assert_eq!(null_dimension(&q, 1e-10), graph.n_components());
    }
}

#[test]
fn car_conditional_moments_match_neighbor_average() {
    let mut rng = ChaCha20Rng::seed_from_u64(2);
    for _ in 0..10 {
        let n = rng.random_range(3..=40);
        let graph = random_graph(&mut rng, n, n);
        let tau = rng.random_range(0.5..5.0);
        let q = build_car_precision(&graph, tau).unwrap();
        let x: Vec<f64> = (0..n).map(|_| normal(&mut rng)).collect();
        for i in 0..n {
            let nb = graph.neighbors(i);
            let avg = nb.iter().map(|&j| x[j]).sum::<f64>() / nb.len() as f64;
            let cond = -(0..n)
                .filter(|&j| j != i)
                .map(|j| q.get(i, j) * x[j])
                .sum::<f64>()
                / q.get(i, i);
            assert!((cond - avg).abs() < 1e-12);
            assert!((1.0 / q.get(i, i) - 1.0 / (tau * nb.len() as f64)).abs() < 1e-12);
        }
    }
}

#[test]
fn rw1_precision_structure() {
    for n in [2usize, 3, 7, 20, 50] {
        for cyclic in [false, true] {
            if cyclic && n < 3 {
                continue;
            }
            let tau = 1.7;
            let q = dense(&build_rw1_precision(n, tau, cyclic).unwrap());
            assert_eq!(q, q.transpose());
            for i in 0..n {
                assert!(q.row(i).sum().abs() < 1e-12);
            }
            assert_eq!(null_dimension(&q, 1e-10), 1);
            let x: Vec<f64> = (0..n).map(|i| (i as f64).cos()).collect();
            let direct: f64 = (1..n).map(|i| (x[i] - x[i - 1]).powi(2)).sum::<f64>()
                + if cyclic {
                    (x[0] - x[n - 1]).powi(2)
                } else {
                    0.0
                };
            let v = DVector::from_vec(x);
            assert!(((v.transpose() * &q * &v)[0] - tau * direct).abs() < 1e-10);
        }
    }
}

#[test]
fn degenerate_inputs_rejected() {
    assert!(matches!(
        build_rw1_precision(1, 1.0, false),
        Err(Error::DegenerateRandomWalk(1))
    ));
    let graph = AdjacencyGraph::from_edges(3, [(0, 1)]).unwrap();
    assert!(matches!(
        build_car_precision(&graph, 1.0),
        Err(Error::IsolatedUnit(2))
    ));
    assert!(AdjacencyGraph::from_edges(2, [(0, 2)]).is_err());
}

#[test]
fn cholesky_matches_dense_algebra() {
    let mut rng = ChaCha20Rng::seed_from_u64(3);
    for _ in 0..10 {
        let n = rng.random_range(5..=45);
        let graph = random_graph(&mut rng, n, n / 2);
        let q = proper(&build_car_precision(&graph, 1.3).unwrap(), 0.2);
        let qd = dense(&q);
        let factor = factorize(&q).unwrap();

        let chol = qd.clone().cholesky().unwrap();
        let logdet = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
        assert!((factor.log_determinant() - logdet).abs() < 1e-10 * logdet.abs().max(1.0));

        let b: Vec<f64> = (0..n).map(|_| normal(&mut rng)).collect();
        let x = factor.solve(&b);
        let residual = &qd * DVector::from_vec(x) - DVector::from_vec(b);
        assert!(residual.amax() < 1e-10);

        let inv = chol.inverse();
        let sel = factor.selected_inverse();
        for (i, j, v) in sel.entries() {
            assert!((v - inv[(i, j)]).abs() < 1e-10, "entry ({i}, {j})");
        }
        for i in 0..n {
            for &j in graph.neighbors(i) {
                assert!(sel.get(i, j).is_some(), "neighbour pair outside pattern");
            }
        }

        // A draw x = L^{-T} z satisfies x' Q x = z' z.
        let z: Vec<f64> = (0..n).map(|_| normal(&mut rng)).collect();
        let s = DVector::from_vec(factor.sample_with(&z));
        let zz: f64 = z.iter().map(|v| v * v).sum();
        assert!(((s.transpose() * &qd * &s)[0] - zz).abs() < 1e-9 * zz);
    }
}

#[test]
fn indefinite_matrix_is_rejected() {
    let q = SparseSymmetric::from_dense(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
    assert!(matches!(
        factorize(&q),
        Err(Error::NotPositiveDefinite { .. })
    ));
}

#[test]
fn conditioning_by_kriging_matches_dense_formula() {
    let mut rng = ChaCha20Rng::seed_from_u64(4);
    for _ in 0..10 {
        let n = rng.random_range(4..=30);
        let graph = random_graph(&mut rng, n, n / 2);
        let q = proper(&build_car_precision(&graph, 2.0).unwrap(), 0.5);
        let qd = dense(&q);
        let factor = factorize(&q).unwrap();
        let half = n / 2;
        let constraint = LinearConstraint::new(vec![
            ConstraintRow::sum_to_zero(0, n),
            ConstraintRow {
                coefficients: (0..half).map(|i| (i, 1.0 + i as f64)).collect(),
                rhs: 0.7,
            },
        ]);
        let mean: Vec<f64> = (0..n).map(|_| normal(&mut rng)).collect();
        let got = constrain_mean(&mean, &factor, &constraint).unwrap();

        let a = DMatrix::from_fn(2, n, |r, c| {
            constraint.rows[r]
                .coefficients
                .iter()
                .find(|&&(i, _)| i == c)
                .map_or(0.0, |&(_, v)| v)
        });
        let e = DVector::from_vec(vec![0.0, 0.7]);
        let cov = qd.clone().cholesky().unwrap().inverse();
        let w = &cov * a.transpose();
        let m = &a * &w;
        let m_inv = m.clone().try_inverse().unwrap();
        let mu = DVector::from_vec(mean.clone());
        let want = &mu - &w * &m_inv * (&a * &mu - &e);
        for i in 0..n {
            assert!((got[i] - want[i]).abs() < 1e-10);
        }
        assert!(constraint.max_violation(&got) < 1e-10);

        let kriging = Kriging::new(&factor, &constraint).unwrap();
        let correction = &w * &m_inv * w.transpose();
        let diag = kriging.variance_correction();
        for i in 0..n {
            assert!((diag[i] - correction[(i, i)]).abs() < 1e-10);
            let j = (i * 7 + 3) % n;
            assert!((kriging.covariance_correction(i, j) - correction[(i, j)]).abs() < 1e-10);
        }
        assert!((kriging.log_det_m() - m.determinant().ln()).abs() < 1e-9);
    }
}

#[test]
fn redundant_constraints_rejected() {
    let factor = factorize(&SparseSymmetric::identity(3)).unwrap();
    let c = LinearConstraint::new(vec![
        ConstraintRow::sum_to_zero(0, 3),
        ConstraintRow::sum_to_zero(0, 3),
    ]);
    assert!(matches!(
        Kriging::new(&factor, &c),
        Err(Error::RedundantConstraints)
    ));
}

#[test]
fn graph_csv_round_trip() {
    let mut rng = ChaCha20Rng::seed_from_u64(5);
    let graph = random_graph(&mut rng, 25, 10);
    let mut buf = Vec::new();
    graph.write_csv(&mut buf).unwrap();
    let back = AdjacencyGraph::read_csv(buf.as_slice(), Some(25), "mem").unwrap();
    assert_eq!(graph, back);
}
