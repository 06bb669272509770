//! Weighted graphs, Laplacians and spanning trees.

mod gff;
mod kron;
mod trees;

pub use gff::{
    dirichlet_energy, gff_log_partition, graph_ibp_check, harmonic_extension, interior_residual,
    pinned_gaussian_integral, GffClosedForm, PlanarField,
};
pub use kron::{kron_reduce, KronReduction};
pub use trees::{spanning_tree_sum, tree_count_bound, TREE_GUARD};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Undirected graph with positive conductances and a designated boundary.
///
/// Parallel edges are merged by summing conductances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GraphDoc", into = "GraphDoc")]
pub struct WeightedGraph {
    n: usize,
    /// Dense symmetric conductance matrix, zero diagonal.
    c: Vec<f64>,
    boundary: Vec<usize>,
}

/// JSON form: `{"n": 3, "edges": [[0, 1, 2.0], ...], "boundary": [0]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphDoc {
    pub n: usize,
    pub edges: Vec<(usize, usize, f64)>,
    #[serde(default)]
    pub boundary: Vec<usize>,
}

impl TryFrom<GraphDoc> for WeightedGraph {
    type Error = Error;
    fn try_from(doc: GraphDoc) -> Result<Self> {
        let mut g = WeightedGraph::new(doc.n)?;
        for (u, v, c) in doc.edges {
            g.add_edge(u, v, c)?;
        }
        g.set_boundary(doc.boundary)?;
        Ok(g)
    }
}

impl From<WeightedGraph> for GraphDoc {
    fn from(g: WeightedGraph) -> Self {
        GraphDoc { n: g.n, edges: g.edges(), boundary: g.boundary }
    }
}

impl WeightedGraph {
    pub fn new(vertex_count: usize) -> Result<Self> {
        if vertex_count == 0 {
            return Err(Error::Graph("a graph needs at least one vertex".into()));
        }
        Ok(Self { n: vertex_count, c: vec![0.0; vertex_count * vertex_count], boundary: Vec::new() })
    }

    pub fn from_edges(vertex_count: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let mut g = Self::new(vertex_count)?;
        for &(u, v, c) in edges {
            g.add_edge(u, v, c)?;
        }
        Ok(g)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    /// Adds conductance `c` between `u` and `v`, merging with an existing edge.
    pub fn add_edge(&mut self, u: usize, v: usize, c: f64) -> Result<()> {
        if u >= self.n || v >= self.n {
            return Err(Error::Graph(format!("edge ({u}, {v}) references a vertex outside 0..{}", self.n)));
        }
        if u == v {
            return Err(Error::Graph(format!("self-loop at vertex {u}")));
        }
        if !(c > 0.0) || !c.is_finite() {
            return Err(Error::Graph(format!("conductance of edge ({u}, {v}) must be positive and finite, got {c}")));
        }
        self.c[u * self.n + v] += c;
        self.c[v * self.n + u] += c;
        Ok(())
    }

    pub fn set_boundary(&mut self, boundary: Vec<usize>) -> Result<()> {
        let mut seen = vec![false; self.n];
        for &b in &boundary {
            if b >= self.n || std::mem::replace(&mut seen[b], true) {
                return Err(Error::Graph(format!("boundary vertex {b} is out of range or repeated")));
            }
        }
        self.boundary = boundary;
        Ok(())
    }

    pub fn with_boundary(mut self, boundary: Vec<usize>) -> Result<Self> {
        self.set_boundary(boundary)?;
        Ok(self)
    }

    pub fn vertex_count(&self) -> usize {
        self.n
    }

    pub fn boundary(&self) -> &[usize] {
        &self.boundary
    }

    pub fn conductance(&self, u: usize, v: usize) -> f64 {
        self.c[u * self.n + v]
    }

    /// Row-major dense conductance matrix.
    pub fn conductance_matrix(&self) -> &[f64] {
        &self.c
    }

    /// Edges `(u, v, c)` with `u < v`, in lexicographic order.
    pub fn edges(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        for u in 0..self.n {
            for v in u + 1..self.n {
                let c = self.c[u * self.n + v];
                if c > 0.0 {
                    out.push((u, v, c));
                }
            }
        }
        out
    }

    /// Number of distinct neighbours.
    pub fn degree(&self, v: usize) -> usize {
        (0..self.n).filter(|&w| self.c[v * self.n + w] > 0.0).count()
    }

    pub fn is_connected(&self) -> bool {
        let mut seen = vec![false; self.n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(u) = stack.pop() {
            for w in 0..self.n {
                if !seen[w] && self.c[u * self.n + w] > 0.0 {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.is_connected() {
            return Err(Error::Graph("graph is not connected".into()));
        }
        Ok(())
    }
}

/// `L = D - A`.
pub fn laplacian(graph: &WeightedGraph) -> DMatrix<f64> {
    let n = graph.n;
    DMatrix::from_fn(n, n, |u, v| if u == v { (0..n).map(|w| graph.c[u * n + w]).sum() } else { -graph.c[u * n + v] })
}

fn check_pinned(graph: &WeightedGraph, pinned: &[usize]) -> Result<Vec<bool>> {
    if pinned.is_empty() {
        return Err(Error::Domain("the Laplacian is singular without a pinned vertex".into()));
    }
    let mut mask = vec![false; graph.n];
    for &p in pinned {
        if p >= graph.n {
            return Err(Error::Graph(format!("pinned vertex {p} out of range")));
        }
        mask[p] = true;
    }
    Ok(mask)
}

/// `ln det` of the Laplacian with the rows and columns of `pinned` removed,
/// by Schur elimination in conductance form (no subtractions).
pub fn reduced_log_det(graph: &WeightedGraph, pinned: &[usize]) -> Result<f64> {
    graph.validate()?;
    let mask = check_pinned(graph, pinned)?;
    let free: Vec<usize> = (0..graph.n).filter(|&v| !mask[v]).collect();
    Ok(kron_reduce(graph.n, graph.conductance_matrix(), &free)?.log_det)
}

pub fn reduced_determinant(graph: &WeightedGraph, pinned: &[usize]) -> Result<f64> {
    Ok(reduced_log_det(graph, pinned)?.exp())
}

/// Same quantity as [`reduced_log_det`] via a Cholesky factorisation.
pub fn reduced_log_det_cholesky(graph: &WeightedGraph, pinned: &[usize]) -> Result<f64> {
    graph.validate()?;
    let mask = check_pinned(graph, pinned)?;
    let free: Vec<usize> = (0..graph.n).filter(|&v| !mask[v]).collect();
    if free.is_empty() {
        return Ok(0.0);
    }
    let l = laplacian(graph);
    let reduced = l.select_rows(&free).select_columns(&free);
    let chol =
        reduced.cholesky().ok_or_else(|| Error::Numerical("reduced Laplacian is not positive definite".into()))?;
    Ok(2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>())
}
