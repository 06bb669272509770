//! Feynman graphs and the closed-form spatial integrals.

use std::f64::consts::PI;

use serde::Serialize;

use super::grid::TimeGrid;
use crate::diagrams::CollisionPattern;
use crate::graph::{kron_reduce, KronReduction, WeightedGraph};
use crate::special::DickmanDensity;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum VertexRole {
    /// The extra vertex at time 0 (Gaussian initial data).
    Origin,
    /// Starting point of a walker (fixed boundary data).
    Boundary(usize),
    A(usize),
    B(usize),
}

/// Weighted graph of one (pattern, times) configuration.
///
/// Curly edges `(a_r, b_r)` carry `4/(b_r - a_r)`. A parent edge of length
/// `s = a_r - b_p` carries `2/s`; when both walkers share the parent vertex the
/// two edges merge into one of conductance `4/s = 2/(s/2)`.
#[derive(Debug, Clone)]
pub struct FeynmanGraph {
    pub base: WeightedGraph,
    pub roles: Vec<VertexRole>,
    pub curly_edges: Vec<(usize, usize)>,
    /// Non-curly lengths `ℓ` (conductance `2/ℓ`), non-increasing.
    pub ell_sorted: Vec<f64>,
    /// Vertices held fixed: the origin, or one boundary vertex per active walker.
    pub pinned: Vec<usize>,
    pub augmented: bool,
    /// Sum of `ln(2/(π u_r))` over curly edges and `-ln(π s)` over the two
    /// parent half-edges of every collision: the heat-kernel normalisers.
    pub log_normalizer: f64,
}

impl FeynmanGraph {
    pub fn m(&self) -> usize {
        self.curly_edges.len()
    }

    pub fn vertex_of(&self, role: VertexRole) -> Option<usize> {
        self.roles.iter().position(|&r| r == role)
    }

    /// Curly conductances followed by non-curly ones.
    pub fn conductance_profile(&self) -> (Vec<f64>, Vec<f64>) {
        let curly = self.curly_edges.iter().map(|&(a, b)| self.base.conductance(a, b)).collect();
        let other = self.ell_sorted.iter().map(|l| 2.0 / l).collect();
        (curly, other)
    }
}

/// Builds the graph of `(pattern, grid)`. Augmented graphs start every walker
/// at the origin (time 0); otherwise each active walker gets a boundary vertex.
pub fn build_feynman_graph(pattern: &CollisionPattern, grid: &TimeGrid, augmented: bool) -> Result<FeynmanGraph> {
    let m = pattern.m();
    if grid.m() != m {
        return Err(Error::Domain(format!("pattern has {m} collisions but the grid has {}", grid.m())));
    }
    if let Some(r) = grid.gaps().iter().position(|&u| !(u > 0.0)) {
        return Err(Error::Domain(format!("coincident times a_{0} = b_{0}", r + 1)));
    }
    let active = if augmented { Vec::new() } else { pattern.active_walkers() };
    let offset = usize::from(augmented);
    let n = offset + 2 * m + active.len();
    let mut roles = Vec::with_capacity(n);
    if augmented {
        roles.push(VertexRole::Origin);
    }
    for r in 1..=m {
        roles.push(VertexRole::A(r));
        roles.push(VertexRole::B(r));
    }
    roles.extend(active.iter().map(|&w| VertexRole::Boundary(w)));
    let a_vertex = |r: usize| offset + 2 * r - 2;
    let b_vertex = |r: usize| offset + 2 * r - 1;
    let start_vertex = |w: usize| {
        if augmented {
            0
        } else {
            offset + 2 * m + active.binary_search(&w).expect("active walker")
        }
    };

    let mut base = WeightedGraph::new(n)?;
    let mut curly_edges = Vec::with_capacity(m);
    let mut ell = Vec::with_capacity(2 * m);
    let mut log_normalizer = 0.0;
    let parents = pattern.parent_map();
    let edge = |base: &mut WeightedGraph, u: usize, v: usize, c: f64| {
        base.add_edge(u, v, c).map_err(|e| Error::Domain(format!("degenerate times: {e}")))
    };
    for r in 1..=m {
        let (a, u) = (grid.a[r - 1], grid.gaps()[r - 1]);
        curly_edges.push((a_vertex(r), b_vertex(r)));
        edge(&mut base, a_vertex(r), b_vertex(r), 4.0 / u)?;
        log_normalizer += (2.0 / (PI * u)).ln();
        let pair = pattern.pairs()[r - 1];
        let sources = [(parents.p_i[r - 1], pair.i), (parents.p_j[r - 1], pair.j)];
        let ends: Vec<(usize, f64)> = sources
            .iter()
            .map(|&(p, w)| if p > 0 { (b_vertex(p), a - grid.b[p - 1]) } else { (start_vertex(w), a) })
            .collect();
        for &(_, s) in &ends {
            if !(s > 0.0) {
                return Err(Error::Domain(format!("collision {r} starts at its parent time")));
            }
            log_normalizer -= (PI * s).ln();
        }
        if ends[0].0 == ends[1].0 {
            let s = ends[0].1;
            edge(&mut base, ends[0].0, a_vertex(r), 4.0 / s)?;
            ell.push(s / 2.0);
        } else {
            for &(v, s) in &ends {
                edge(&mut base, v, a_vertex(r), 2.0 / s)?;
                ell.push(s);
            }
        }
    }
    ell.sort_by(|x, y| y.total_cmp(x));
    let pinned = if augmented { vec![0] } else { (offset + 2 * m..n).collect() };
    Ok(FeynmanGraph { base, roles, curly_edges, ell_sorted: ell, pinned, augmented, log_normalizer })
}

/// Gaussian part of the spatial integral, split as
/// `ln Z(α z) = log_zero_boundary - ½ α² energy(z)`.
#[derive(Debug, Clone)]
pub struct SpatialParts {
    pub log_zero_boundary: f64,
    reduction: KronReduction,
    boundary_walkers: Vec<usize>,
}

impl SpatialParts {
    /// Energy of the harmonic extension of walker starting points `z`
    /// (indexed by walker, `z[w - 1]`). Zero for augmented graphs.
    pub fn energy(&self, z: &[[f64; 2]]) -> f64 {
        if self.boundary_walkers.is_empty() {
            return 0.0;
        }
        let values: Vec<[f64; 2]> = self.boundary_walkers.iter().map(|&w| z[w - 1]).collect();
        self.reduction.boundary_energy(&values)
    }

    pub fn log_at(&self, z: Option<&[[f64; 2]]>, alpha: f64) -> f64 {
        match z {
            Some(z) => self.log_zero_boundary - 0.5 * alpha * alpha * self.energy(z),
            None => self.log_zero_boundary,
        }
    }
}

pub fn spatial_parts(fg: &FeynmanGraph) -> Result<SpatialParts> {
    let n = fg.base.vertex_count();
    let interior: Vec<usize> = (0..n).filter(|v| !fg.pinned.contains(v)).collect();
    let reduction = kron_reduce(n, fg.base.conductance_matrix(), &interior)?;
    let boundary_walkers = reduction
        .kept
        .iter()
        .filter_map(|&v| match fg.roles[v] {
            VertexRole::Boundary(w) => Some(w),
            _ => None,
        })
        .collect();
    Ok(SpatialParts {
        log_zero_boundary: interior.len() as f64 * (2.0 * PI).ln() - reduction.log_det,
        reduction,
        boundary_walkers,
    })
}

/// `ln ∫ exp(-½ Σ c |∇φ|²)` over the free vertices; boundary graphs need the
/// walker starting points `z` (`z[w - 1]` for walker `w`).
pub fn spatial_integral_log(fg: &FeynmanGraph, boundary: Option<&[[f64; 2]]>) -> Result<f64> {
    match (fg.augmented, boundary) {
        (true, Some(_)) => Err(Error::Domain("augmented graphs take no boundary values".into())),
        (false, None) => Err(Error::Domain("boundary graphs need the walker starting points".into())),
        (false, Some(z)) if z.len() < fg.pinned.len() => {
            Err(Error::Domain(format!("{} starting points given, walkers up to {} needed", z.len(), fg.pinned.len())))
        }
        _ => Ok(spatial_parts(fg)?.log_at(boundary, 1.0)),
    }
}

/// Everything in the integrand except the spatial Gaussian integral:
/// `m ln 2π + Σ_r ln G_θ(u_r) + heat-kernel normalisers`.
pub fn integrand_prefactor_log(fg: &FeynmanGraph, grid: &TimeGrid, g: &impl DickmanDensity) -> Result<f64> {
    let mut total = fg.m() as f64 * (2.0 * PI).ln() + fg.log_normalizer;
    for &l in grid.log_inv_gaps() {
        total += g.ln_g_at_log(l)?;
    }
    Ok(total)
}

/// Log of the full time-integrand for one pattern and grid: Gaussian initial
/// data when `boundary` is `None`, fixed starting points otherwise.
///
/// A zero-length collision (`b_r = a_r`) is a null set of the time integral
/// and is reported as `-∞`.
pub fn integrand_log(
    pattern: &CollisionPattern,
    grid: &TimeGrid,
    g: &impl DickmanDensity,
    boundary: Option<&[[f64; 2]]>,
) -> Result<f64> {
    if pattern.m() == 0 {
        return Ok(0.0);
    }
    if grid.gaps().iter().any(|&u| u == 0.0) {
        return Ok(f64::NEG_INFINITY);
    }
    let fg = build_feynman_graph(pattern, grid, boundary.is_none())?;
    Ok(integrand_prefactor_log(&fg, grid, g)? + spatial_integral_log(&fg, boundary)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::spanning_tree_sum;
    use crate::special::{g_theta, DickmanParams};

    fn pattern(h: usize, pairs: &[(usize, usize)]) -> CollisionPattern {
        CollisionPattern::from_tuples(h, pairs).unwrap()
    }

    #[test]
    fn single_collision_is_a_path() {
        let (a1, b1) = (2.25, 2.3);
        let grid = TimeGrid::new(2.0, 3.0, vec![a1], vec![b1]).unwrap();
        for h in 2..5 {
            let fg = build_feynman_graph(&pattern(h, &[(1, 2)]), &grid, true).unwrap();
            assert_eq!(fg.base.edges().len(), 2);
            assert!((fg.base.conductance(0, 1) - 4.0 / a1).abs() < 1e-12);
            let tree = spanning_tree_sum(&fg.base).unwrap();
            assert!((tree / (16.0 / (a1 * (b1 - a1))) - 1.0).abs() < 1e-12);
            assert_eq!(fg.ell_sorted, vec![a1 / 2.0]);
        }
    }

    #[test]
    fn single_collision_integrand_closed_form() {
        let grid = TimeGrid::new(2.0, 3.0, vec![2.25], vec![2.3]).unwrap();
        let p = DickmanParams::new(0.0);
        let got = integrand_log(&pattern(2, &[(1, 2)]), &grid, &p, None).unwrap().exp();
        let expected = g_theta(&p, 2.3 - 2.25).unwrap() / 2.25;
        assert!((got / expected - 1.0).abs() < 1e-9, "{got} vs {expected}");
    }

    #[test]
    fn empty_pattern_and_zero_gap() {
        let p = DickmanParams::new(0.0);
        let empty = TimeGrid::new(2.0, 3.0, vec![], vec![]).unwrap();
        assert_eq!(integrand_log(&CollisionPattern::empty(3), &empty, &p, None).unwrap(), 0.0);
        let zero = TimeGrid::new(2.0, 3.0, vec![2.5], vec![2.5]).unwrap();
        assert_eq!(integrand_log(&pattern(2, &[(1, 2)]), &zero, &p, None).unwrap(), f64::NEG_INFINITY);
        assert!(build_feynman_graph(&pattern(2, &[(1, 2)]), &zero, true).is_err());
    }

    #[test]
    fn degrees_and_profile() {
        let grid = TimeGrid::new(2.0, 3.0, vec![2.1, 2.4, 2.7], vec![2.15, 2.45, 2.72]).unwrap();
        let pat = pattern(4, &[(1, 2), (3, 4), (2, 3)]);
        let fg = build_feynman_graph(&pat, &grid, true).unwrap();
        assert!(fg.base.degree(0) <= 4);
        for v in 1..fg.base.vertex_count() {
            assert!(fg.base.degree(v) <= 3);
        }
        let (curly, other) = fg.conductance_profile();
        assert_eq!(curly.len(), 3);
        assert_eq!(other.len(), pat.gap_profile().eta);
        // every edge of the graph appears in the profile
        let mut all: Vec<f64> = curly.into_iter().chain(other).collect();
        let mut edges: Vec<f64> = fg.base.edges().iter().map(|e| e.2).collect();
        all.sort_by(f64::total_cmp);
        edges.sort_by(f64::total_cmp);
        for (x, y) in all.iter().zip(&edges) {
            assert!((x / y - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn boundary_mode_checks() {
        let grid = TimeGrid::new(0.0, 1.0, vec![0.2], vec![0.3]).unwrap();
        let pat = pattern(2, &[(1, 2)]);
        let fg = build_feynman_graph(&pat, &grid, false).unwrap();
        assert_eq!(fg.pinned.len(), 2);
        assert!(spatial_integral_log(&fg, None).is_err());
        let zero = spatial_integral_log(&fg, Some(&[[0.0; 2]; 2])).unwrap();
        assert_eq!(zero, spatial_parts(&fg).unwrap().log_zero_boundary);
    }

    #[test]
    fn boundary_collision_matches_heat_kernel() {
        // ∫ g_{a/2}(x - z1) g_{a/2}(x - z2) dx = g_a(z1 - z2), and the curly
        // factor integrates to one, so the integrand is 2π G(u) g_a(z1 - z2).
        let (a, b) = (0.2, 0.35);
        let grid = TimeGrid::new(0.0, 1.0, vec![a], vec![b]).unwrap();
        let z = [[0.1, -0.3], [0.5, 0.2]];
        let p = DickmanParams::new(0.4);
        let got = integrand_log(&pattern(2, &[(1, 2)]), &grid, &p, Some(&z)).unwrap().exp();
        let d = [z[0][0] - z[1][0], z[0][1] - z[1][1]];
        let expected = 2.0 * PI * g_theta(&p, b - a).unwrap() * crate::special::heat_kernel(a, d).unwrap();
        assert!((got / expected - 1.0).abs() < 1e-9);
    }
}
