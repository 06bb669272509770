use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use shf_lab::diagrams::sample_pattern_seeded;
use shf_lab::moment::{build_feynman_graph, sample_grid, spatial_parts, VertexRole};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn feynman_graph_degrees(h in 2usize..=5, m in 1usize..=6, seed in any::<u64>()) {
        prop_assume!(h > 2 || m == 1);
        let pattern = sample_pattern_seeded(h, m, seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let Some(wg) = sample_grid(&mut rng, m, 2.0, 1.0) else { return Ok(()) };
        let fg = build_feynman_graph(&pattern, &wg.grid, true).unwrap();
        let origin = fg.vertex_of(VertexRole::Origin).unwrap();
        for v in 0..fg.base.vertex_count() {
            let cap = if v == origin { h } else { 3 };
            prop_assert!(fg.base.degree(v) <= cap);
        }
        prop_assert_eq!(fg.m(), m);
    }

    #[test]
    fn spatial_integral_is_non_increasing_in_alpha(h in 2usize..=4, m in 1usize..=4, seed in any::<u64>(), a in 0.0f64..3.0, da in 0.0f64..3.0) {
        prop_assume!(h > 2 || m == 1);
        let pattern = sample_pattern_seeded(h, m, seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let Some(wg) = sample_grid(&mut rng, m, 0.0, 1.0) else { return Ok(()) };
        let fg = build_feynman_graph(&pattern, &wg.grid, false).unwrap();
        let parts = spatial_parts(&fg).unwrap();
        let z: Vec<[f64; 2]> = (0..h).map(|k| [k as f64 * 0.7 - 1.0, (seed % 7) as f64 * 0.3 - k as f64]).collect();
        prop_assert!(parts.log_at(Some(&z), a + da) <= parts.log_at(Some(&z), a));
        prop_assert!(parts.energy(&z) >= 0.0);
    }
}
