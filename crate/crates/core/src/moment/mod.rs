//! Feynman-graph representation of moments and kernels.
//!
//! For Gaussian initial data `g_1` the `h`-th moment is
//! `2^{-h} (1 + Σ_{m≥1} Σ_{patterns} ∫_{2≤a_1<b_1<…<b_m≤3} integrand)`, where
//! the integrand is `(2π)^m ∏ G_θ(b_r - a_r)` times heat-kernel normalisers
//! times a Gaussian integral over the collision positions. The latter is the
//! partition function of a planar free field on the Feynman graph.

mod covariance;
mod estimate;
mod feynman;
mod grid;

pub use covariance::{covariance_second_moment, covariance_second_moment_nested, second_moment_g1, SecondMomentG1};
pub use estimate::{
    kernel_at_points, kernel_at_points_scaled, moment_gaussian, moment_gaussian_with, MContribution, MomentEstimate,
    EXHAUSTIVE_PATTERNS,
};
pub use feynman::{
    build_feynman_graph, integrand_log, integrand_prefactor_log, spatial_integral_log, spatial_parts, FeynmanGraph,
    SpatialParts, VertexRole,
};
pub(crate) use grid::grid_from_gaps;
pub use grid::{sample_grid, TimeGrid, WeightedGrid, GAP_FLOOR};
