//! Exhaustive spanning-tree sums by deletion–contraction.

use super::WeightedGraph;
use crate::{Error, Result};

/// Largest vertex count accepted by the exhaustive routines.
pub const TREE_GUARD: usize = 14;

fn guard(graph: &WeightedGraph) -> Result<()> {
    if graph.vertex_count() > TREE_GUARD {
        return Err(Error::Resource(format!(
            "exhaustive tree enumeration is limited to {TREE_GUARD} vertices, got {}; use the reduced determinant",
            graph.vertex_count()
        )));
    }
    Ok(())
}

/// `Σ_T ∏_{e∈T} c_e` over all spanning trees.
pub fn spanning_tree_sum(graph: &WeightedGraph) -> Result<f64> {
    guard(graph)?;
    Ok(tree_sum(graph.conductance_matrix().to_vec(), graph.vertex_count()))
}

/// Number of spanning trees (each edge counted once) and the degree bound
/// `min_k ∏_i d_i / d_k`.
pub fn tree_count_bound(graph: &WeightedGraph) -> Result<(u64, f64)> {
    guard(graph)?;
    let n = graph.vertex_count();
    let unit: Vec<f64> = graph.conductance_matrix().iter().map(|&c| if c > 0.0 { 1.0 } else { 0.0 }).collect();
    let count = tree_sum(unit, n).round() as u64;
    let degrees: Vec<f64> = (0..n).map(|v| graph.degree(v) as f64).collect();
    let max_degree = degrees.iter().cloned().fold(0.0, f64::max);
    let bound = if n == 1 { 1.0 } else { degrees.iter().product::<f64>() / max_degree };
    Ok((count, bound))
}

fn drop_last(m: &[f64], n: usize) -> Vec<f64> {
    let k = n - 1;
    let mut out = Vec::with_capacity(k * k);
    for u in 0..k {
        out.extend_from_slice(&m[u * n..u * n + k]);
    }
    out
}

// Resolves the last vertex `u`: a leaf contributes its single edge; otherwise
// branch on one of its edges (delete it, or contract it).
fn tree_sum(m: Vec<f64>, n: usize) -> f64 {
    if n == 1 {
        return 1.0;
    }
    let u = n - 1;
    let neighbours: Vec<usize> = (0..u).filter(|&w| m[u * n + w] > 0.0).collect();
    match neighbours.as_slice() {
        [] => 0.0,
        [v] => m[u * n + v] * tree_sum(drop_last(&m, n), n - 1),
        [v, ..] => {
            let v = *v;
            let c = m[u * n + v];
            let mut deleted = m.clone();
            deleted[u * n + v] = 0.0;
            deleted[v * n + u] = 0.0;
            let mut contracted = m;
            for w in 0..u {
                if w != v {
                    let add = contracted[u * n + w];
                    contracted[v * n + w] += add;
                    contracted[w * n + v] += add;
                }
            }
            tree_sum(deleted, n) + c * tree_sum(drop_last(&contracted, n), n - 1)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triangle_and_path() {
        let (a, b, c) = (2.0, 3.0, 5.0);
        let tri = WeightedGraph::from_edges(3, &[(0, 1, a), (1, 2, b), (0, 2, c)]).unwrap();
        assert!((spanning_tree_sum(&tri).unwrap() - (a * b + b * c + c * a)).abs() < 1e-12);
        let path = WeightedGraph::from_edges(4, &[(0, 1, a), (1, 2, b), (2, 3, c)]).unwrap();
        assert!((spanning_tree_sum(&path).unwrap() - a * b * c).abs() < 1e-12);
    }

    #[test]
    fn cayley_formula() {
        let mut edges = Vec::new();
        for u in 0..5 {
            for v in u + 1..5 {
                edges.push((u, v, 1.0));
            }
        }
        let k5 = WeightedGraph::from_edges(5, &edges).unwrap();
        assert_eq!(spanning_tree_sum(&k5).unwrap(), 125.0);
    }

    #[test]
    fn count_bound_examples() {
        let tri = WeightedGraph::from_edges(3, &[(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)]).unwrap();
        assert_eq!(tree_count_bound(&tri).unwrap(), (3, 4.0));
        let star = WeightedGraph::from_edges(4, &[(0, 1, 1.0), (0, 2, 1.0), (0, 3, 1.0)]).unwrap();
        assert_eq!(tree_count_bound(&star).unwrap(), (1, 1.0));
    }

    #[test]
    fn guard_refuses_large_graphs() {
        let g = WeightedGraph::new(TREE_GUARD + 1).unwrap();
        assert!(matches!(spanning_tree_sum(&g), Err(Error::Resource(_))));
    }

    #[test]
    fn disconnected_graph_has_no_trees() {
        let g = WeightedGraph::from_edges(4, &[(0, 1, 1.0), (2, 3, 1.0)]).unwrap();
        assert_eq!(spanning_tree_sum(&g).unwrap(), 0.0);
    }
}
