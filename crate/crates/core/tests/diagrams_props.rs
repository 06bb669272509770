use proptest::prelude::*;
use shf_lab::diagrams::{pattern_count, sample_pattern_seeded};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn parent_maps_point_to_last_collision(h in 3usize..=5, m in 1usize..=8, seed in any::<u64>()) {
        let pattern = sample_pattern_seeded(h, m, seed).unwrap();
        let pairs = pattern.pairs();
        let parents = pattern.parent_map();
        for r in 0..m {
            for (walker, p) in [(pairs[r].i, parents.p_i[r]), (pairs[r].j, parents.p_j[r])] {
                prop_assert!(p <= r);
                if p > 0 {
                    prop_assert!(pairs[p - 1].contains(walker));
                }
                for later in pairs.iter().take(r).skip(p) {
                    prop_assert!(!later.contains(walker));
                }
            }
            prop_assert!(r == 0 || pairs[r] != pairs[r - 1]);
        }
        prop_assert!(parents.total_jump() <= m * h);
        prop_assert!(parents.zero_count() <= h);
        prop_assert!(pattern.gap_profile().short_ratio(h) <= 1.0 + 1e-12);
    }

    #[test]
    fn counts_follow_the_product_formula(h in 2usize..=8, m in 1usize..=6) {
        let p = (h * (h - 1) / 2) as u128;
        prop_assert_eq!(pattern_count(h, m), p * (p - 1).pow(m as u32 - 1));
    }
}
