//! The spanning-tree lower bound and the slab-restricted moment mass.

use std::f64::consts::{LN_2, PI};

use serde::Serialize;

use super::slab::{sample_slab_grid_weighted, SlabConfig};
use crate::diagrams::{enumerate_patterns_capped, pattern_count, sample_pattern, CollisionPattern};
use crate::graph::kron_reduce;
use crate::moment::{build_feynman_graph, integrand_log, spatial_parts, TimeGrid, EXHAUSTIVE_PATTERNS};
use crate::rng::{run_batches, Module, BATCH};
use crate::special::{g_theta_integral, DickmanParams, GThetaTable};
use crate::stats::{Estimate, LogAccumulator};
use crate::{Error, Result};

const LN_3: f64 = 1.098_612_288_668_109_7;

/// Both sides of the spanning-tree bound on the zero-boundary Gaussian
/// integral, as logarithms.
#[derive(Debug, Clone, Serialize)]
pub struct TreeboundCheck {
    /// `ln[(2π)^{2m} 2^{-3m} 3^{-2m} ∏ u_r ∏ (m smallest ℓ)]`.
    pub lhs: f64,
    /// `ln` of the Gaussian integral itself.
    pub rhs: f64,
    /// Number of spanning trees of the (unweighted) graph.
    pub tree_count: f64,
    /// `ln(3^{2m} / tree_count)`, a floor for `rhs - lhs`.
    pub slack_floor: f64,
}

impl TreeboundCheck {
    pub fn margin(&self) -> f64 {
        self.rhs - self.lhs
    }
}

pub fn treebound_check(pattern: &CollisionPattern, grid: &TimeGrid) -> Result<TreeboundCheck> {
    let m = pattern.m();
    let config = SlabConfig::new(m)?;
    if !config.contains(grid) {
        return Err(Error::Domain("the tree bound needs times inside the slab windows".into()));
    }
    let fg = build_feynman_graph(pattern, grid, true)?;
    let rhs = spatial_parts(&fg)?.log_zero_boundary;
    let mf = m as f64;
    let smallest = &fg.ell_sorted[fg.ell_sorted.len() - m..];
    let lhs = 2.0 * mf * (2.0 * PI).ln() - 3.0 * mf * LN_2 - 2.0 * mf * LN_3 - grid.log_inv_gaps().iter().sum::<f64>()
        + smallest.iter().map(|l| l.ln()).sum::<f64>();
    let n = fg.base.vertex_count();
    let unit: Vec<f64> = fg.base.conductance_matrix().iter().map(|&c| if c > 0.0 { 1.0 } else { 0.0 }).collect();
    let interior: Vec<usize> = (1..n).collect();
    let tree_count = kron_reduce(n, &unit, &interior)?.log_det.exp().round();
    Ok(TreeboundCheck { lhs, rhs, tree_count, slack_floor: 2.0 * mf * LN_3 - tree_count.ln() })
}

/// `ln[2^m 3^{-2m} 4^{-|A|} / P]` where `P` is the product of the `m` largest
/// window bounds on the parent half-edge lengths of `pattern`.
///
/// A shared parent contributes `ℓ = s/2 ≤ (r - p)/m` twice, separate parents
/// contribute `s ≤ 2(r - p)/m` each. Edges to the origin are bounded by `3/2`
/// (shared) and `3`.
pub fn pattern_factor_log(pattern: &CollisionPattern) -> f64 {
    let m = pattern.m();
    let mf = m as f64;
    let parents = pattern.parent_map();
    let mut bounds = Vec::with_capacity(2 * m);
    let mut shared = 0usize;
    for r in 1..=m {
        let (pi, pj) = (parents.p_i[r - 1], parents.p_j[r - 1]);
        if pi == pj {
            shared += 1;
            let u = if pi == 0 { 1.5 } else { (r - pi) as f64 / mf };
            bounds.extend([u, u]);
        } else {
            for p in [pi, pj] {
                bounds.push(if p == 0 { 3.0 } else { 2.0 * (r - p) as f64 / mf });
            }
        }
    }
    bounds.sort_by(|x, y| y.total_cmp(x));
    let top: f64 = bounds[..m].iter().map(|u| u.ln()).sum();
    mf * LN_2 - 2.0 * mf * LN_3 - 2.0 * shared as f64 * LN_2 - top
}

/// `(1/54)^m`: the pattern factor with every bound at its worst case.
pub fn crude_pattern_factor_log(m: usize) -> f64 {
    -(m as f64) * 54f64.ln()
}

#[derive(Debug, Clone, Serialize)]
pub struct LowerChain {
    pub h: usize,
    pub m: usize,
    pub theta: f64,
    /// Monte Carlo mass of `Σ_patterns ∫_slab integrand` (the slab part of the
    /// `m`-collision term of `2^h E[Z(g_1)^h]`).
    pub mc: Estimate,
    /// The explicit-factor lower bound summed over patterns.
    pub analytic: f64,
    /// The same bound with `(1/54)^m` per pattern.
    pub crude: f64,
    pub patterns: u128,
    pub exhaustive: bool,
    /// `∫_0^{1/(5m)} G_θ`.
    pub short_mass: f64,
    /// `1/(2 ln m)` for `m ≥ 2`.
    pub log_m_floor: Option<f64>,
    /// Set when `m < 100 h`, below the range the bound is stated for.
    pub below_asymptotic_range: bool,
}

impl LowerChain {
    pub fn margin(&self) -> f64 {
        self.mc.value - self.analytic
    }

    pub fn holds_within(&self, sigmas: f64) -> bool {
        self.mc.value + sigmas * self.mc.std_error >= self.analytic
    }
}

pub fn lower_chain_evaluate(h: usize, m: usize, theta: f64, samples: usize, seed: u64) -> Result<LowerChain> {
    if h < 2 {
        return Err(Error::Domain("collisions need at least two walkers".into()));
    }
    if samples < 2 {
        return Err(Error::Domain("at least two samples are needed".into()));
    }
    let config = SlabConfig::new(m)?;
    let table = GThetaTable::new(theta)?;
    let count = pattern_count(h, m);
    let exhaustive = count <= EXHAUSTIVE_PATTERNS;
    let width = config.min_b_width();
    let short_mass = g_theta_integral(&DickmanParams::new(theta), width)?;
    let ln_slab = m as f64 * (short_mass * config.a_width()).ln();
    let crude = (count as f64).ln() + crude_pattern_factor_log(m) + ln_slab;

    let sample = |rng: &mut _, pattern: &CollisionPattern| -> Result<f64> {
        let (grid, ln_weight) = sample_slab_grid_weighted(&config, rng);
        Ok(ln_weight + integrand_log(pattern, &grid, &table, None)?)
    };
    let (mc, analytic) = if count == 0 {
        (Estimate::exact(0.0), 0.0)
    } else if exhaustive {
        let patterns: Vec<CollisionPattern> = enumerate_patterns_capped(h, m, EXHAUSTIVE_PATTERNS)?.collect();
        let analytic = patterns.iter().map(|p| (pattern_factor_log(p) + ln_slab).exp()).sum::<f64>();
        let per_pattern = (samples / patterns.len()).max(2);
        let chunk = (BATCH / per_pattern).max(1);
        let batches = run_batches(patterns.len(), chunk, seed, Module::LowerChain, m as u32, |rng, b, n| {
            let mut total = Estimate::default();
            for pattern in &patterns[b * chunk..b * chunk + n] {
                let mut acc = LogAccumulator::new();
                for _ in 0..per_pattern {
                    acc.push(sample(rng, pattern)?);
                }
                total = total.plus(acc.estimate());
            }
            Ok::<_, Error>(total)
        });
        let mut mc = Estimate::default();
        for b in batches {
            mc = mc.plus(b?);
        }
        (mc, analytic)
    } else {
        let batches = run_batches(samples, BATCH, seed, Module::LowerChain, m as u32, |rng, _, n| {
            let mut acc = LogAccumulator::new();
            for _ in 0..n {
                let pattern = sample_pattern(h, m, rng)?;
                acc.push(sample(rng, &pattern)?);
            }
            Ok::<_, Error>(acc)
        });
        let mut acc = LogAccumulator::new();
        for b in batches {
            acc.merge(&b?);
        }
        (acc.estimate().scale(count as f64), crude.exp())
    };
    Ok(LowerChain {
        h,
        m,
        theta,
        mc,
        analytic,
        crude: if count == 0 { 0.0 } else { crude.exp() },
        patterns: count,
        exhaustive,
        short_mass,
        log_m_floor: (m >= 2).then(|| 0.5 / (m as f64).ln()),
        below_asymptotic_range: m < 100 * h,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::slab::sample_slab_grid;
    use crate::quad::{integrate, Tolerance};
    use crate::rng::stream;
    use crate::special::g_theta_integral_any;

    #[test]
    fn single_collision_tree_bound_is_a_ninth() {
        // truth (2π)² a u / 16 against (2π)² u (a/2) / 72
        let grid = TimeGrid::new(2.0, 3.0, vec![2.47], vec![2.61]).unwrap();
        let p = CollisionPattern::from_tuples(2, &[(1, 2)]).unwrap();
        let c = treebound_check(&p, &grid).unwrap();
        let truth = (4.0 * PI * PI * 2.47 * 0.14 / 16.0).ln();
        assert!((c.rhs - truth).abs() < 1e-10);
        assert!((c.margin() - 9f64.ln()).abs() < 1e-10);
        assert_eq!(c.tree_count, 1.0);
    }

    #[test]
    fn tree_bound_holds_on_sampled_instances() {
        let mut rng = stream(11, Module::Treebound, 0);
        for m in 1..=6 {
            let config = SlabConfig::new(m).unwrap();
            for h in 3..=5 {
                for _ in 0..40 {
                    let p = sample_pattern(h, m, &mut rng).unwrap();
                    let g = super::super::slab::sample_slab_grid_with(&config, &mut rng);
                    let c = treebound_check(&p, &g).unwrap();
                    assert!(c.margin() >= c.slack_floor - 1e-9, "{p}: {c:?}");
                    assert!(c.tree_count <= 9f64.powi(m as i32));
                }
            }
        }
    }

    #[test]
    fn tree_bound_rejects_grids_outside_the_windows() {
        let p = CollisionPattern::from_tuples(2, &[(1, 2)]).unwrap();
        let grid = TimeGrid::new(2.0, 3.0, vec![2.1], vec![2.2]).unwrap();
        assert!(treebound_check(&p, &grid).is_err());
        assert!(treebound_check(&p, &sample_slab_grid(&SlabConfig::new(1).unwrap(), 4)).is_ok());
    }

    #[test]
    fn pattern_factors() {
        let one = CollisionPattern::from_tuples(2, &[(1, 2)]).unwrap();
        assert!((pattern_factor_log(&one) - (1.0f64 / 27.0).ln()).abs() < 1e-12);
        assert_eq!(pattern_count(3, 2), 6);
        for_all(3, 4, |p| assert!(pattern_factor_log(p) >= crude_pattern_factor_log(4)));
    }

    fn for_all(h: usize, m: usize, f: impl Fn(&CollisionPattern)) {
        enumerate_patterns_capped(h, m, 1000).unwrap().for_each(|p| f(&p));
    }

    #[test]
    fn single_collision_slab_mass() {
        // one pattern, integrand G(b - a)/a on a ∈ [2.4, 2.6], b ≤ 2.8
        let p = DickmanParams::new(0.0);
        let exact = integrate(|a| g_theta_integral_any(&p, 2.8 - a).unwrap() / a, 2.4, 2.6, Tolerance::rel(1e-10))
            .unwrap()
            .value;
        let chain = lower_chain_evaluate(2, 1, 0.0, 400_000, 3).unwrap();
        assert!((chain.mc.value - exact).abs() < 3.0 * chain.mc.std_error, "{:?} vs {exact}", chain.mc);
        assert!(chain.mc.relative_error() < 1e-3);
        let bound = 0.2 * g_theta_integral(&p, 0.2).unwrap() / 27.0;
        assert!((chain.analytic / bound - 1.0).abs() < 1e-12);
        assert!(chain.holds_within(0.0));
        assert!(chain.below_asymptotic_range && chain.log_m_floor.is_none());
    }

    #[test]
    fn short_mass_beats_log_floor() {
        let p = DickmanParams::new(0.0);
        for m in [100.0f64, 1e3, 1e4] {
            assert!(g_theta_integral(&p, 1.0 / (5.0 * m)).unwrap() >= 0.5 / m.ln());
        }
    }

    #[test]
    fn chain_holds_for_small_h() {
        let empty = lower_chain_evaluate(2, 3, 0.0, 100, 5).unwrap();
        assert_eq!((empty.patterns, empty.mc.value, empty.analytic), (0, 0.0, 0.0));
        for (h, m) in [(2, 1), (3, 2), (3, 4)] {
            let c = lower_chain_evaluate(h, m, 0.0, 4000, 5).unwrap();
            assert!(c.exhaustive);
            assert!(c.holds_within(3.0), "{c:?}");
            assert!(c.analytic >= c.crude);
        }
    }
}
