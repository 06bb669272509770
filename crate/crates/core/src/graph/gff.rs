//! Planar Gaussian free field on a weighted graph.
//!
//! The field has density `exp(-½ Σ_e c_e |φ_u - φ_v|²)` with values in the
//! plane, so each partition function is the square of a scalar one.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::{check_pinned, kron_reduce, spanning_tree_sum, WeightedGraph};
use crate::{Error, Result};

/// A planar value at every vertex.
pub type PlanarField = Vec<[f64; 2]>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GffClosedForm {
    /// `ln ∫ exp(-½ Σ c|∇φ|²)` over the free vertices, pinned vertices at 0.
    pub log_partition: f64,
    pub log_reduced_det: f64,
    pub reduced_det: f64,
    /// Spanning-tree sum of the graph with the pinned set merged into one
    /// vertex; computed for graphs of at most 10 vertices.
    pub tree_sum: Option<f64>,
}

const TREE_SUM_LIMIT: usize = 10;

fn merge_pinned(graph: &WeightedGraph, mask: &[bool]) -> Result<WeightedGraph> {
    // Pinned vertices collapse onto index 0; free ones follow in order.
    let mut index = vec![0; graph.n];
    let mut next = 1;
    for v in 0..graph.n {
        if !mask[v] {
            index[v] = next;
            next += 1;
        }
    }
    let mut merged = WeightedGraph::new(next)?;
    for (u, v, c) in graph.edges() {
        if index[u] != index[v] {
            merged.add_edge(index[u], index[v], c)?;
        }
    }
    Ok(merged)
}

pub fn gff_log_partition(graph: &WeightedGraph, pinned: &[usize]) -> Result<GffClosedForm> {
    graph.validate()?;
    let mask = check_pinned(graph, pinned)?;
    let free: Vec<usize> = (0..graph.n).filter(|&v| !mask[v]).collect();
    let log_det = kron_reduce(graph.n, graph.conductance_matrix(), &free)?.log_det;
    let tree_sum =
        if graph.n <= TREE_SUM_LIMIT { Some(spanning_tree_sum(&merge_pinned(graph, &mask)?)?) } else { None };
    Ok(GffClosedForm {
        log_partition: free.len() as f64 * (2.0 * PI).ln() - log_det,
        log_reduced_det: log_det,
        reduced_det: log_det.exp(),
        tree_sum,
    })
}

fn boundary_split(graph: &WeightedGraph, values: &[(usize, [f64; 2])]) -> Result<(Vec<bool>, Vec<usize>)> {
    let pins: Vec<usize> = values.iter().map(|&(v, _)| v).collect();
    let mask = check_pinned(graph, &pins)?;
    if mask.iter().filter(|&&b| b).count() != pins.len() {
        return Err(Error::Graph("boundary vertex listed twice".into()));
    }
    let interior = (0..graph.n).filter(|&v| !mask[v]).collect();
    Ok((mask, interior))
}

/// The field equal to `boundary_values` on the boundary with zero weighted
/// Laplacian at every other vertex.
pub fn harmonic_extension(graph: &WeightedGraph, boundary_values: &[(usize, [f64; 2])]) -> Result<PlanarField> {
    graph.validate()?;
    let (_, interior) = boundary_split(graph, boundary_values)?;
    let mut field = vec![[0.0; 2]; graph.n];
    for &(v, z) in boundary_values {
        field[v] = z;
    }
    if interior.is_empty() {
        return Ok(field);
    }
    let k = interior.len();
    let n = graph.n;
    let c = graph.conductance_matrix();
    let a = DMatrix::from_fn(k, k, |p, q| {
        let (u, w) = (interior[p], interior[q]);
        if p == q {
            (0..n).map(|x| c[u * n + x]).sum()
        } else {
            -c[u * n + w]
        }
    });
    let mut rhs = DMatrix::zeros(k, 2);
    for (p, &u) in interior.iter().enumerate() {
        for &(b, z) in boundary_values {
            rhs[(p, 0)] += c[u * n + b] * z[0];
            rhs[(p, 1)] += c[u * n + b] * z[1];
        }
    }
    let chol = a.cholesky().ok_or_else(|| Error::Numerical("interior Laplacian is not positive definite".into()))?;
    let sol = chol.solve(&rhs);
    for (p, &u) in interior.iter().enumerate() {
        field[u] = [sol[(p, 0)], sol[(p, 1)]];
    }
    Ok(field)
}

/// `Σ_{edges} c_uv |f_u - f_v|²`.
pub fn dirichlet_energy(graph: &WeightedGraph, field: &[[f64; 2]]) -> Result<f64> {
    check_field(graph, field)?;
    Ok(graph
        .edges()
        .iter()
        .map(|&(u, v, c)| {
            let dx = field[u][0] - field[v][0];
            let dy = field[u][1] - field[v][1];
            c * (dx * dx + dy * dy)
        })
        .sum())
}

fn check_field(graph: &WeightedGraph, field: &[[f64; 2]]) -> Result<()> {
    if field.len() != graph.n {
        return Err(Error::Domain(format!("field has {} values for {} vertices", field.len(), graph.n)));
    }
    Ok(())
}

/// Both sides of the discrete integration by parts
/// `Σ_e c (f_u - f_v)·(g_u - g_v) = Σ_u f_u · (L g)_u`.
pub fn graph_ibp_check(graph: &WeightedGraph, f: &[[f64; 2]], g: &[[f64; 2]]) -> Result<(f64, f64)> {
    check_field(graph, f)?;
    check_field(graph, g)?;
    let n = graph.n;
    let c = graph.conductance_matrix();
    let dot = |a: [f64; 2], b: [f64; 2]| a[0] * b[0] + a[1] * b[1];
    let diff = |a: [f64; 2], b: [f64; 2]| [a[0] - b[0], a[1] - b[1]];
    let lhs = graph.edges().iter().map(|&(u, v, cuv)| cuv * dot(diff(f[u], f[v]), diff(g[u], g[v]))).sum();
    let mut rhs = 0.0;
    for u in 0..n {
        let mut lg = [0.0; 2];
        for w in 0..n {
            let cuw = c[u * n + w];
            if cuw > 0.0 {
                lg[0] += cuw * (g[u][0] - g[w][0]);
                lg[1] += cuw * (g[u][1] - g[w][1]);
            }
        }
        rhs += dot(f[u], lg);
    }
    Ok((lhs, rhs))
}

/// `ln ∫ exp(-½ Σ c|∇φ|²)` over the interior with `φ = α z` on the boundary.
///
/// Factorises as the zero-boundary partition function times
/// `exp(-½ α² E(H))`, where `E(H)` is the energy of the harmonic extension of
/// `z`, computed from effective conductances so that it is a sum of
/// non-negative terms.
pub fn pinned_gaussian_integral(
    graph: &WeightedGraph,
    boundary_values: &[(usize, [f64; 2])],
    alpha: f64,
) -> Result<f64> {
    graph.validate()?;
    let (mask, interior) = boundary_split(graph, boundary_values)?;
    let red = kron_reduce(graph.n, graph.conductance_matrix(), &interior)?;
    let mut values = vec![[0.0; 2]; red.kept.len()];
    for &(v, z) in boundary_values {
        let pos = red.kept.binary_search(&v).expect("boundary vertices are kept");
        values[pos] = z;
    }
    debug_assert_eq!(red.kept.len(), mask.iter().filter(|&&b| b).count());
    let energy = red.boundary_energy(&values);
    Ok(interior.len() as f64 * (2.0 * PI).ln() - red.log_det - 0.5 * alpha * alpha * energy)
}

/// Interior residual `max |(L H)_u|` for a candidate harmonic field.
pub fn interior_residual(graph: &WeightedGraph, field: &[[f64; 2]], boundary: &[usize]) -> f64 {
    let n = graph.n;
    let c = graph.conductance_matrix();
    let lap = DMatrix::from_fn(n, n, |u, w| if u == w { (0..n).map(|x| c[u * n + x]).sum() } else { -c[u * n + w] });
    let mut worst: f64 = 0.0;
    for k in 0..2 {
        let col = DVector::from_iterator(n, field.iter().map(|p| p[k]));
        let r = &lap * col;
        for u in (0..n).filter(|u| !boundary.contains(u)) {
            worst = worst.max(r[u].abs());
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_edge_partition() {
        let g = WeightedGraph::from_edges(2, &[(0, 1, 3.0)]).unwrap();
        let z = gff_log_partition(&g, &[0]).unwrap();
        assert!((z.log_partition - (2.0 * PI / 3.0).ln()).abs() < 1e-14);
        assert_eq!(z.tree_sum, Some(3.0));
    }

    #[test]
    fn triangle_partition() {
        let g = WeightedGraph::from_edges(3, &[(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)]).unwrap();
        let z = gff_log_partition(&g, &[1]).unwrap();
        assert!((z.log_partition - ((2.0 * PI).powi(2) / 3.0).ln()).abs() < 1e-14);
    }

    #[test]
    fn multi_pin_tree_sum_matches_determinant() {
        let g = WeightedGraph::from_edges(
            5,
            &[(0, 1, 1.0), (1, 2, 2.0), (2, 3, 0.5), (3, 4, 4.0), (1, 3, 1.5), (4, 0, 0.7)],
        )
        .unwrap();
        let z = gff_log_partition(&g, &[0, 4]).unwrap();
        assert!((z.tree_sum.unwrap() / z.reduced_det - 1.0).abs() < 1e-12);
    }

    #[test]
    fn harmonic_extension_on_paths() {
        let (c1, c2) = (1.0, 3.0);
        let g = WeightedGraph::from_edges(3, &[(0, 1, c1), (1, 2, c2)]).unwrap();
        let (zo, zw) = ([1.0, -2.0], [5.0, 2.0]);
        let h = harmonic_extension(&g, &[(0, zo), (2, zw)]).unwrap();
        for k in 0..2 {
            assert!((h[1][k] - (c1 * zo[k] + c2 * zw[k]) / (c1 + c2)).abs() < 1e-14);
        }
    }

    #[test]
    fn energy_examples() {
        let g = WeightedGraph::from_edges(2, &[(0, 1, 3.0)]).unwrap();
        assert_eq!(dirichlet_energy(&g, &[[0.0, 0.0], [1.0, 1.0]]).unwrap(), 6.0);
        assert_eq!(dirichlet_energy(&g, &[[2.0, 7.0], [2.0, 7.0]]).unwrap(), 0.0);
    }

    #[test]
    fn effective_energy_matches_explicit_extension() {
        let g = WeightedGraph::from_edges(
            5,
            &[(0, 1, 1.0), (1, 2, 2.0), (2, 3, 0.5), (3, 4, 4.0), (1, 3, 1.5), (4, 0, 0.7)],
        )
        .unwrap();
        let bv = [(0, [0.3, -1.0]), (2, [1.0, 2.0]), (4, [-0.5, 0.0])];
        let h = harmonic_extension(&g, &bv).unwrap();
        let e = dirichlet_energy(&g, &h).unwrap();
        let base = pinned_gaussian_integral(&g, &bv, 0.0).unwrap();
        let one = pinned_gaussian_integral(&g, &bv, 1.0).unwrap();
        assert!(((base - one) - 0.5 * e).abs() < 1e-12);
        assert!(interior_residual(&g, &h, &[0, 2, 4]) < 1e-12);
    }

    #[test]
    fn alpha_zero_is_zero_boundary_partition() {
        let g = WeightedGraph::from_edges(3, &[(0, 1, 2.0), (1, 2, 1.0)]).unwrap();
        let a = pinned_gaussian_integral(&g, &[(0, [1.0, 1.0]), (2, [3.0, 0.0])], 0.0).unwrap();
        let b = gff_log_partition(&g, &[0, 2]).unwrap().log_partition;
        assert_eq!(a, b);
    }

    #[test]
    fn ibp_with_harmonic_g_and_vanishing_f() {
        let g = WeightedGraph::from_edges(4, &[(0, 1, 1.0), (1, 2, 2.0), (2, 3, 3.0), (1, 3, 0.5)]).unwrap();
        let h = harmonic_extension(&g, &[(0, [1.0, 0.0]), (3, [0.0, 4.0])]).unwrap();
        let f = vec![[0.0; 2], [0.7, -0.2], [1.3, 0.4], [0.0; 2]];
        let (lhs, rhs) = graph_ibp_check(&g, &f, &h).unwrap();
        assert!(lhs.abs() < 1e-12 && rhs.abs() < 1e-12);
    }
}
