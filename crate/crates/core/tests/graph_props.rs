mod common;

use common::{random_connected_graph, random_field};
use proptest::prelude::*;
use shf_lab::graph::{
    graph_ibp_check, pinned_gaussian_integral, reduced_determinant, reduced_log_det, reduced_log_det_cholesky,
    spanning_tree_sum, tree_count_bound,
};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn matrix_tree_identity(n in 3usize..=8, extra in 0usize..12, seed in any::<u64>()) {
        let g = random_connected_graph(n, extra, seed);
        let trees = spanning_tree_sum(&g).unwrap();
        let det = reduced_determinant(&g, &[0]).unwrap();
        prop_assert!((det / trees - 1.0).abs() <= 1e-9, "{} vs {}", det, trees);
        let chol = reduced_log_det_cholesky(&g, &[n - 1]).unwrap();
        prop_assert!((chol - trees.ln()).abs() <= 1e-9 * trees.ln().abs().max(1.0));
    }

    #[test]
    fn tree_sum_is_monotone_in_each_conductance(n in 3usize..=7, extra in 0usize..8, seed in any::<u64>(), bump in 1e-3f64..10.0) {
        let g = random_connected_graph(n, extra, seed);
        let before = spanning_tree_sum(&g).unwrap();
        for (u, v, _) in g.edges() {
            let mut h = g.clone();
            h.add_edge(u, v, bump).unwrap();
            prop_assert!(spanning_tree_sum(&h).unwrap() >= before * (1.0 - 1e-12));
        }
    }

    #[test]
    fn pinned_integral_is_non_increasing_in_alpha(n in 3usize..=8, extra in 0usize..10, seed in any::<u64>(), a in 0.0f64..3.0, da in 0.0f64..3.0) {
        let g = random_connected_graph(n, extra, seed);
        let z = random_field(n, seed ^ 1);
        let boundary = vec![(0, z[0]), (n - 1, z[n - 1])];
        let lo = pinned_gaussian_integral(&g, &boundary, a).unwrap();
        let hi = pinned_gaussian_integral(&g, &boundary, a + da).unwrap();
        prop_assert!(hi <= lo);
        prop_assert!(reduced_log_det(&g, &[0, n - 1]).unwrap().is_finite());
    }

    #[test]
    fn integration_by_parts(n in 3usize..=8, extra in 0usize..10, seed in any::<u64>()) {
        let g = random_connected_graph(n, extra, seed);
        let (lhs, rhs) = graph_ibp_check(&g, &random_field(n, seed ^ 2), &random_field(n, seed ^ 3)).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(rhs.abs()).max(1e-300));
    }

    #[test]
    fn tree_count_below_degree_bound(n in 3usize..=9, extra in 0usize..14, seed in any::<u64>()) {
        let g = random_connected_graph(n, extra, seed);
        let (count, bound) = tree_count_bound(&g).unwrap();
        prop_assert!(count >= 1 && count as f64 <= bound);
    }
}
