//! Interleaved collision times and their samplers.

use rand::Rng;
use serde::Serialize;
use statrs::function::gamma::ln_gamma;

use crate::{Error, Result};

/// Smallest curly gap kept in floating point; shorter gaps are represented
/// through their exact `ln(1/u)` and treated as contracted edges.
pub const GAP_FLOOR: f64 = 1e-300;

/// Times `t_start ≤ a_1 ≤ b_1 < a_2 ≤ … ≤ b_m ≤ t_end`.
///
/// The curly gaps `b_r - a_r` are stored separately (with their logarithms)
/// because a gap far below the resolution of `a_r` is lost in `b_r - a_r`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimeGrid {
    pub t_start: f64,
    pub t_end: f64,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    gaps: Vec<f64>,
    log_inv_gaps: Vec<f64>,
}

impl TimeGrid {
    pub fn new(t_start: f64, t_end: f64, a: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        if a.len() != b.len() {
            return Err(Error::Domain(format!("{} start times but {} end times", a.len(), b.len())));
        }
        let gaps: Vec<f64> = a.iter().zip(&b).map(|(x, y)| y - x).collect();
        let log_inv_gaps = gaps.iter().map(|&u| if u > 0.0 { -u.ln() } else { f64::INFINITY }).collect();
        let grid = Self { t_start, t_end, a, b, gaps, log_inv_gaps };
        grid.validate()?;
        Ok(grid)
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Domain(msg));
        if !(self.t_start < self.t_end) {
            return bad(format!("empty time window [{}, {}]", self.t_start, self.t_end));
        }
        let mut prev = self.t_start;
        for r in 0..self.a.len() {
            if !(self.a[r] > prev || (r == 0 && self.a[r] >= prev)) {
                return bad(format!("a_{} = {} does not follow {}", r + 1, self.a[r], prev));
            }
            if !(self.b[r] >= self.a[r]) {
                return bad(format!("b_{} = {} precedes a_{} = {}", r + 1, self.b[r], r + 1, self.a[r]));
            }
            prev = self.b[r];
        }
        if prev > self.t_end {
            return bad(format!("b_m = {prev} exceeds t_end = {}", self.t_end));
        }
        Ok(())
    }

    pub fn m(&self) -> usize {
        self.a.len()
    }

    /// Curly gaps `b_r - a_r` (floored at [`GAP_FLOOR`] for sampled grids).
    pub fn gaps(&self) -> &[f64] {
        &self.gaps
    }

    /// Exact `ln(1/(b_r - a_r))`.
    pub fn log_inv_gaps(&self) -> &[f64] {
        &self.log_inv_gaps
    }
}

/// A sampled grid with the log of its importance weight.
#[derive(Debug, Clone)]
pub struct WeightedGrid {
    pub grid: TimeGrid,
    pub ln_weight: f64,
}

/// Draws the curly gap: `v = 1/(1 + ln(T/u))` uniform on `(0, 1]`, i.e.
/// density `1/(u (1 + ln(T/u))²)` on `(0, T]`. Returns `(u, ln(T/u))`.
fn sample_gap<R: Rng + ?Sized>(rng: &mut R, span: f64) -> (f64, f64) {
    let v = 1.0 - rng.random::<f64>();
    let l = 1.0 / v - 1.0;
    ((span * (-l).exp()).max(GAP_FLOOR), l)
}

/// Samples a grid of `m` collisions in `[t_start, t_start + span]` with
/// log-singular curly gaps and uniform spacings. `None` means the gaps did not
/// fit (a zero-valued sample). The weight is `1 / density`.
pub fn sample_grid<R: Rng + ?Sized>(rng: &mut R, m: usize, t_start: f64, span: f64) -> Option<WeightedGrid> {
    let mut gaps = Vec::with_capacity(m);
    let mut logs = Vec::with_capacity(m);
    let mut ln_inv_q = 0.0;
    let mut total = 0.0;
    for _ in 0..m {
        let (u, l) = sample_gap(rng, span);
        total += u;
        // 1/q(u) = u (1 + l)² with ln u = ln T - l
        ln_inv_q += span.ln() - l + 2.0 * (1.0 + l).ln();
        gaps.push(u);
        logs.push(l - span.ln());
    }
    let free = span - total;
    if !(free > 0.0) {
        return None;
    }
    let mut cuts: Vec<f64> = (0..m).map(|_| rng.random::<f64>() * free).collect();
    cuts.sort_by(f64::total_cmp);
    let mut a = Vec::with_capacity(m);
    let mut b = Vec::with_capacity(m);
    let mut prev_cut = 0.0;
    let mut clock = t_start;
    for r in 0..m {
        clock += cuts[r] - prev_cut;
        prev_cut = cuts[r];
        a.push(clock);
        clock += gaps[r];
        b.push(clock);
    }
    let ln_weight = m as f64 * free.ln() - ln_gamma(m as f64 + 1.0) + ln_inv_q;
    let grid = TimeGrid { t_start, t_end: t_start + span, a, b, gaps, log_inv_gaps: logs };
    Some(WeightedGrid { grid, ln_weight })
}

/// Builds a grid from starts `a`, gaps and their exact `ln(1/u)`.
pub(crate) fn grid_from_gaps(
    t_start: f64,
    t_end: f64,
    a: Vec<f64>,
    gaps: Vec<f64>,
    log_inv_gaps: Vec<f64>,
) -> Result<TimeGrid> {
    let b = a.iter().zip(&gaps).map(|(x, u)| x + u).collect();
    let grid = TimeGrid { t_start, t_end, a, b, gaps, log_inv_gaps };
    grid.validate()?;
    Ok(grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Module};

    #[test]
    fn grid_validation() {
        assert!(TimeGrid::new(2.0, 3.0, vec![2.1, 2.5], vec![2.2, 2.6]).is_ok());
        assert!(TimeGrid::new(2.0, 3.0, vec![2.1, 2.15], vec![2.2, 2.6]).is_err());
        assert!(TimeGrid::new(2.0, 3.0, vec![2.1], vec![3.2]).is_err());
        assert!(TimeGrid::new(2.0, 3.0, vec![2.1], vec![2.0]).is_err());
        let g = TimeGrid::new(0.0, 1.0, vec![0.5], vec![0.5]).unwrap();
        assert_eq!(g.log_inv_gaps()[0], f64::INFINITY);
    }

    #[test]
    fn sampled_grids_are_ordered() {
        let mut rng = stream(1, Module::Moment, 0);
        let mut accepted = 0;
        for _ in 0..2000 {
            if let Some(w) = sample_grid(&mut rng, 4, 2.0, 1.0) {
                accepted += 1;
                let g = &w.grid;
                assert!(g.a[0] >= 2.0 && g.b[3] <= 3.0 + 1e-12);
                for r in 0..4 {
                    assert!(g.b[r] >= g.a[r]);
                    assert!(g.gaps()[r] > 0.0);
                    if r > 0 {
                        assert!(g.a[r] > g.b[r - 1]);
                    }
                }
                assert!(w.ln_weight.is_finite());
            }
        }
        assert!(accepted > 100);
    }

    #[test]
    fn importance_weights_integrate_simplex_volume() {
        // E[weight] over the sampler equals the volume of
        // {0 ≤ a_1 ≤ b_1 ≤ … ≤ b_m ≤ 1} = 1/(2m)!.
        let mut rng = stream(2, Module::Moment, 0);
        let n = 400_000;
        for m in [1usize, 2, 3] {
            let mut acc = crate::stats::LogAccumulator::new();
            for _ in 0..n {
                acc.push(sample_grid(&mut rng, m, 0.0, 1.0).map_or(f64::NEG_INFINITY, |w| w.ln_weight));
            }
            let est = acc.estimate();
            let exact = (-ln_gamma(2.0 * m as f64 + 1.0)).exp();
            assert!((est.value - exact).abs() < 4.0 * est.std_error + 1e-12, "m {m}: {est:?} vs {exact}");
        }
    }
}
