//! Numerical checks of the inequalities behind the moment lower bound, the
//! tail envelopes and the nested denominator integral.
//!
//! Every check reports a margin; [`verify`] runs them all into a [`Ledger`].

mod chain;
mod compare;
mod ledger;
mod nested;
mod slab;
mod tail;

pub use chain::{
    crude_pattern_factor_log, lower_chain_evaluate, pattern_factor_log, treebound_check, LowerChain, TreeboundCheck,
};
pub use compare::{compare_test_functions_check, CompareCheck};
pub use ledger::{Ledger, LedgerRow};
pub use nested::{jensen_lower_log, nested_denominator_integral, GrowthFit, NestedEstimate};
pub use slab::{curly_bound_holds, dominance_holds, sample_slab_grid, sample_slab_grid_with, SlabConfig};
pub use tail::{tail_envelope, TailEnvelope, TailParams};

use serde::{Deserialize, Serialize};

use crate::diagrams::{for_each_pattern, pattern_count, sample_pattern, CollisionPattern};
use crate::rng::{stream, Module};
use crate::Result;

/// Settings of a full [`verify`] run.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyOptions {
    pub h: usize,
    pub m_max: usize,
    pub theta: f64,
    /// Random (pattern, grid) pairs per collision count for the exact checks.
    pub instances: usize,
    /// Monte Carlo samples per estimate.
    pub samples: usize,
    pub delta: f64,
    pub seed: u64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self { h: 3, m_max: 4, theta: 0.0, instances: 2000, samples: 20_000, delta: 0.5, seed: 0 }
    }
}

fn params(h: usize, m: usize) -> String {
    format!("h={h};m={m}")
}

/// Runs every check; each row asserts `lhs ≥ rhs`.
pub fn verify(opts: &VerifyOptions) -> Result<Ledger> {
    let mut ledger = Ledger::new();
    let h = opts.h.max(2);
    for m in 1..=opts.m_max {
        let p = params(h, m);
        if pattern_count(h, m) == 0 {
            ledger.push(LedgerRow::new("lower_chain", p, 0.0, 0.0, 0.0));
            continue;
        }
        let config = SlabConfig::new(m)?;
        let mut rng = stream(opts.seed, Module::Treebound, m as u64);
        let mut worst_tree: Option<TreeboundCheck> = None;
        let (mut spacing, mut curly, mut first) = (f64::INFINITY, 0.0f64, f64::INFINITY);
        for _ in 0..opts.instances {
            let pattern = sample_pattern(h, m, &mut rng)?;
            let grid = sample_slab_grid_with(&config, &mut rng);
            let parents = pattern.parent_map();
            for k in 0..m {
                for p in [parents.p_i[k], parents.p_j[k]] {
                    let from = if p == 0 { 0.0 } else { grid.b[p - 1] };
                    spacing = spacing.min(grid.a[k] - from);
                }
            }
            curly = grid.gaps().iter().cloned().fold(curly, f64::max);
            first = first.min(grid.a[0] / 5.0);
            let check = treebound_check(&pattern, &grid)?;
            if worst_tree.as_ref().map_or(true, |w| check.margin() < w.margin()) {
                worst_tree = Some(check);
            }
        }
        ledger.push(LedgerRow::new("slab_dominance", p.clone(), spacing, curly, 0.0));
        ledger.push(LedgerRow::new("slab_curly_cap", p.clone(), config.max_curly(), curly, 0.0));
        ledger.push(LedgerRow::new("slab_first_time", p.clone(), first, config.max_curly(), 0.0));
        if let Some(w) = worst_tree {
            ledger.push(LedgerRow::new("treebound", p.clone(), w.rhs, w.lhs, 0.0));
        }

        if pattern_count(h, m) <= crate::moment::EXHAUSTIVE_PATTERNS {
            let mut worst = f64::NEG_INFINITY;
            for_each_pattern(h, m, crate::moment::EXHAUSTIVE_PATTERNS, |pairs| {
                let ratio = CollisionPattern::new(h, pairs.to_vec()).map(|c| c.gap_profile().short_ratio(h));
                worst = worst.max(ratio.map_or(f64::INFINITY, f64::ln));
            })?;
            ledger.push(LedgerRow::new("short_gaps", p.clone(), 0.0, worst, 0.0));
        }

        let chain = lower_chain_evaluate(h, m, opts.theta, opts.samples, opts.seed)?;
        ledger.push(LedgerRow::new("lower_chain", p.clone(), chain.mc.value, chain.analytic, chain.mc.std_error));

        let nested = nested_denominator_integral(2, m, opts.samples, opts.seed)?;
        let rel = nested.std_error / nested.value;
        ledger.push(LedgerRow::new("nested_jensen", params(2, m), nested.log_value, jensen_lower_log(m), rel));
    }

    if (2..=3).contains(&h) {
        let m_max = opts.m_max.min(2);
        let c = compare_test_functions_check(h, opts.delta, opts.theta, m_max, opts.samples, opts.seed)?;
        let p = format!("h={h};m_max={m_max};delta={}", opts.delta);
        ledger.push(LedgerRow::new("compare", p, c.lhs.value, c.rhs.value, c.sigma()));
    }

    for step in 1..=20 {
        let l = 10.0 * step as f64;
        let env = tail_envelope(&TailParams::new(1.0, 1.0, l)?)?;
        let p = format!("loglogz={l}");
        ledger.push(LedgerRow::new("tail_i3", p.clone(), 0.0, env.i3_log_bound, 0.0));
        let upper = if env.upper_exponent < 0.0 { (-env.upper_exponent).ln() } else { f64::NEG_INFINITY };
        ledger.push(LedgerRow::new("tail_nesting", p, env.lower_log_magnitude, upper, 0.0));
    }
    Ok(ledger)
}
