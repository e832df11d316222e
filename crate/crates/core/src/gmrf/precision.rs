//! Structured precision matrices for the intrinsic latent blocks.

use crate::error::{Error, Result};
use crate::gmrf::graph::AdjacencyGraph;
use crate::gmrf::sparse::SparseSymmetric;

/// Intrinsic CAR precision `tau * (D - A)`.
///
/// Row `l` has `n_l * tau` on the diagonal and `-tau` for every neighbour, so
/// that the full conditional of unit `l` is Gaussian around the mean of its
/// neighbours with variance `1 / (n_l * tau)`.
pub fn build_car_precision(graph: &AdjacencyGraph, tau: f64) -> Result<SparseSymmetric> {
    check_tau(tau)?;
    let n = graph.n_units();
    let mut trip = Vec::with_capacity(n + graph.n_edges());
    for unit in 0..n {
        let deg = graph.degree(unit);
        if deg == 0 {
            return Err(Error::IsolatedUnit(unit));
        }
        trip.push((unit, unit, deg as f64 * tau));
        for &m in graph.neighbors(unit) {
            if m > unit {
                trip.push((unit, m, -tau));
            }
        }
    }
    SparseSymmetric::from_triplets(n, trip)
}

/// First-order random walk precision over `n_bins` ordered classes.
///
/// The non-cyclic walk penalises `tau * sum (x_l - x_{l-1})^2`; the cyclic
/// variant adds the wrap-around difference between the last and first bin.
pub fn build_rw1_precision(n_bins: usize, tau: f64, cyclic: bool) -> Result<SparseSymmetric> {
    if n_bins < 2 || (cyclic && n_bins < 3) {
        return Err(Error::DegenerateRandomWalk(n_bins));
    }
    check_tau(tau)?;
    let mut trip = Vec::with_capacity(3 * n_bins);
    let mut add_difference = |a: usize, b: usize| {
        trip.push((a, a, tau));
        trip.push((b, b, tau));
        trip.push((a.min(b), a.max(b), -tau));
    };
    for l in 1..n_bins {
        add_difference(l - 1, l);
    }
    if cyclic {
        add_difference(n_bins - 1, 0);
    }
    SparseSymmetric::from_triplets(n_bins, trip)
}

fn check_tau(tau: f64) -> Result<()> {
    if tau > 0.0 && tau.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidModel(format!(
            "precision must be positive, got {tau}"
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn car_path_graph() {
        let g = AdjacencyGraph::from_edges(3, [(0, 1), (1, 2)]).unwrap();
        let q = build_car_precision(&g, 2.0).unwrap();
        assert_eq!(
            q.to_dense(),
            vec![
                vec![2.0, -2.0, 0.0],
                vec![-2.0, 4.0, -2.0],
                vec![0.0, -2.0, 2.0]
            ]
        );
    }

    #[test]
    fn car_isolated_unit_rejected() {
        let g = AdjacencyGraph::from_edges(3, [(0, 1)]).unwrap();
        let err = build_car_precision(&g, 1.0).unwrap_err();
        assert!(err.to_string().contains("unit with no neighbors"));
    }

    #[test]
    fn rw1_open_chain() {
        let q = build_rw1_precision(3, 25.0, false).unwrap();
        assert_eq!(
            q.to_dense(),
            vec![
                vec![25.0, -25.0, 0.0],
                vec![-25.0, 50.0, -25.0],
                vec![0.0, -25.0, 25.0]
            ]
        );
    }

    #[test]
    fn rw1_cyclic_is_circulant() {
        let q = build_rw1_precision(4, 1.0, true).unwrap().to_dense();
        assert_eq!(q[0], vec![2.0, -1.0, 0.0, -1.0]);
        for (i, row) in q.iter().enumerate() {
            for j in 0..4 {
                assert_eq!(row[j], q[0][(j + 4 - i) % 4]);
            }
        }
    }

    #[test]
    fn rw1_degenerate() {
        assert!(matches!(
            build_rw1_precision(1, 1.0, false),
            Err(Error::DegenerateRandomWalk(1))
        ));
        assert!(build_rw1_precision(2, 1.0, true).is_err());
        assert!(build_rw1_precision(2, 1.0, false).is_ok());
    }

    #[test]
    fn rw1_quadratic_form_is_sum_of_squared_differences() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let tau = 3.5;
        let q = build_rw1_precision(20, tau, false).unwrap();
        for _ in 0..100 {
            let x: Vec<f64> = (0..20).map(|_| rng.random_range(-2.0..2.0)).collect();
            let direct: f64 = tau * x.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum::<f64>();
            assert!((q.quad_form(&x) - direct).abs() <= 1e-12 * direct.max(1.0));
        }
    }
}
