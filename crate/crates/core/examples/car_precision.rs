//! Builds CAR and RW1 precisions, factorizes a proper variant and checks a
//! conditional moment against the neighbor average.
//!
//! Run with `cargo run --example car_precision`.

use coxmap::gmrf::{
    build_car_precision, build_rw1_precision, factorize, AdjacencyGraph, SparseSymmetric,
};

fn main() -> coxmap::Result<()> {
    let graph = AdjacencyGraph::lattice(4, 3)?;
    let tau = 2.0;
    let q = build_car_precision(&graph, tau)?;
    println!(
        "{} units, {} edges, {} stored entries",
        graph.n_units(),
        graph.n_edges(),
        q.nnz()
    );

    let x: Vec<f64> = (0..graph.n_units())
        .map(|i| (i as f64 * 0.7).sin())
        .collect();
    let unit = 5;
    let neighbors = graph.neighbors(unit);
    let average = neighbors.iter().map(|&j| x[j]).sum::<f64>() / neighbors.len() as f64;
    let from_q = -(0..graph.n_units())
        .filter(|&j| j != unit)
        .map(|j| q.get(unit, j) * x[j])
        .sum::<f64>()
        / q.get(unit, unit);
    println!(
        "unit {unit}: neighbor mean {average:.6}, from precision {from_q:.6}, variance {:.6}",
        1.0 / q.get(unit, unit)
    );

    let proper = SparseSymmetric::from_triplets(
        q.dim(),
        q.entries()
            .iter()
            .copied()
            .chain((0..q.dim()).map(|i| (i, i, 1e-3))),
    )?;
    let factor = factorize(&proper)?;
    println!(
        "factor nnz {}, log det {:.4}",
        factor.symbolic().factor_nnz(),
        factor.log_determinant()
    );

    for cyclic in [false, true] {
        let rw = build_rw1_precision(6, 1.0, cyclic)?;
        let diag: Vec<f64> = (0..6).map(|i| rw.get(i, i)).collect();
        println!(
            "rw1 cyclic={cyclic}: diagonal {diag:?}, corner {}",
            rw.get(0, 5)
        );
    }
    Ok(())
}
