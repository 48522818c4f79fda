#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use simplex_core::{build_complex, Graph, SimplicialComplex};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_graph(rng: &mut ChaCha8Rng, max_nodes: usize, p: f64) -> Graph {
    let n = rng.random_range(1..=max_nodes);
    Graph::random(n, p, rng)
}

pub fn random_complex(
    rng: &mut ChaCha8Rng,
    max_nodes: usize,
    p: f64,
    max_dim: usize,
) -> SimplicialComplex {
    build_complex(&random_graph(rng, max_nodes, p), max_dim)
}

pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

pub fn levels(c: &SimplicialComplex) -> Vec<Vec<Vec<usize>>> {
    (0..=c.max_dim())
        .map(|k| c.simplices(k).unwrap().to_vec())
        .collect()
}

pub fn filled_triangle() -> SimplicialComplex {
    build_complex(&Graph::new(3, [(0, 1), (1, 2), (0, 2)]).unwrap(), 2)
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |a, v| a.max(v.abs()))
}
