#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use shf_lab::graph::WeightedGraph;

/// Connected graph on `n` vertices: a random spanning tree plus `extra`
/// random edges, conductances log-uniform in `[1e-2, 1e2]`.
pub fn random_connected_graph(n: usize, extra: usize, seed: u64) -> WeightedGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut g = WeightedGraph::new(n).unwrap();
    let mut c = || 10f64.powf(rng.random_range(-2.0..=2.0));
    let mut picks = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    for v in 1..n {
        let u = picks.random_range(0..v);
        g.add_edge(u, v, c()).unwrap();
    }
    for _ in 0..extra {
        let u = picks.random_range(0..n);
        let v = picks.random_range(0..n);
        if u != v {
            g.add_edge(u, v, c()).unwrap();
        }
    }
    g
}

pub fn random_field(n: usize, seed: u64) -> Vec<[f64; 2]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)]).collect()
}
