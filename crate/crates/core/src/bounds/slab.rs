//! Time windows on `[2, 3]` used by the lower-bound chain.

use rand::Rng;
use serde::Serialize;

use crate::diagrams::CollisionPattern;
use crate::moment::{grid_from_gaps, TimeGrid};
use crate::rng::{stream, Module};
use crate::{Error, Result};

/// Per-collision windows: `a_i` within `1/(10m)` of `2 + (2i-1)/(2m)` and
/// `b_i ∈ [a_i, 2 + 2i/(2m) - 1/(5m)]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SlabConfig {
    m: usize,
}

impl SlabConfig {
    pub fn new(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::Domain("slab windows need at least one collision".into()));
        }
        Ok(Self { m })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    fn scale(&self) -> f64 {
        self.m as f64
    }

    /// Window of `a_i` (1-based `i`).
    pub fn a_window(&self, i: usize) -> (f64, f64) {
        let m = self.scale();
        let centre = 2.0 + (2 * i - 1) as f64 / (2.0 * m);
        (centre - 0.1 / m, centre + 0.1 / m)
    }

    /// Right end of the window of `b_i`.
    pub fn b_upper(&self, i: usize) -> f64 {
        let m = self.scale();
        2.0 + (2 * i) as f64 / (2.0 * m) - 0.2 / m
    }

    /// Longest possible curly gap, `2/(5m)`.
    pub fn max_curly(&self) -> f64 {
        0.4 / self.scale()
    }

    /// Shortest possible distance `a_{i+1} - b_i`, `3/(5m)`.
    pub fn min_spacing(&self) -> f64 {
        0.6 / self.scale()
    }

    /// Shortest `b` window, reached at the right end of the `a` window: `1/(5m)`.
    pub fn min_b_width(&self) -> f64 {
        0.2 / self.scale()
    }

    /// Volume of one `a` window, `1/(5m)`.
    pub fn a_width(&self) -> f64 {
        0.2 / self.scale()
    }

    /// Checks that `grid` lies in the windows.
    pub fn contains(&self, grid: &TimeGrid) -> bool {
        grid.m() == self.m
            && (1..=self.m).all(|i| {
                let (lo, hi) = self.a_window(i);
                let (a, b) = (grid.a[i - 1], grid.b[i - 1]);
                a >= lo && a <= hi && b >= a && b <= self.b_upper(i)
            })
    }
}

/// Every curly gap is at most every parent distance of `pattern`.
pub fn dominance_holds(pattern: &CollisionPattern, grid: &TimeGrid) -> bool {
    let parents = pattern.parent_map();
    let parent_time = |p: usize| if p == 0 { 0.0 } else { grid.b[p - 1] };
    let longest = grid.gaps().iter().cloned().fold(0.0, f64::max);
    (0..pattern.m()).all(|k| {
        let a = grid.a[k];
        longest <= a - parent_time(parents.p_i[k]) && longest <= a - parent_time(parents.p_j[k])
    })
}

/// `0 ≤ b_r - a_r ≤ 2/(5m) ≤ a_1/5` for every `r`.
pub fn curly_bound_holds(config: &SlabConfig, grid: &TimeGrid) -> bool {
    let cap = config.max_curly();
    cap <= grid.a[0] / 5.0 && grid.gaps().iter().all(|&u| (0.0..=cap).contains(&u))
}

// Pattern-free form of the dominance relation: no curly gap exceeds the
// spacing between consecutive collisions or the first start time.
fn assert_admissible(config: &SlabConfig, grid: &TimeGrid) {
    let longest = grid.gaps().iter().cloned().fold(0.0, f64::max);
    let shortest = (1..grid.m()).map(|r| grid.a[r] - grid.b[r - 1]).fold(grid.a[0], f64::min);
    assert!(config.contains(grid), "sampled grid left the slab windows");
    assert!(longest <= shortest, "curly gap {longest} exceeds spacing {shortest}");
    assert!(curly_bound_holds(config, grid), "curly gap above 2/(5m)");
}

/// Uniform `a_i` in its window and `b_i` uniform on `[a_i, b_upper]`.
pub fn sample_slab_grid_with<R: Rng + ?Sized>(config: &SlabConfig, rng: &mut R) -> TimeGrid {
    let mut a = Vec::with_capacity(config.m);
    let mut gaps = Vec::with_capacity(config.m);
    for i in 1..=config.m {
        let (lo, hi) = config.a_window(i);
        let start = lo + (hi - lo) * rng.random::<f64>();
        let room = config.b_upper(i) - start;
        a.push(start);
        gaps.push(room * rng.random::<f64>());
    }
    let logs = gaps.iter().map(|&u: &f64| -u.ln()).collect();
    let grid = grid_from_gaps(2.0, 3.0, a, gaps, logs).expect("slab windows are ordered");
    assert_admissible(config, &grid);
    grid
}

pub fn sample_slab_grid(config: &SlabConfig, seed: u64) -> TimeGrid {
    sample_slab_grid_with(config, &mut stream(seed, Module::Slab, 0))
}

/// Slab grid with log-singular curly gaps, for integrands carrying `G_θ(b - a)`.
/// Returns the grid and `ln(1/density)` with respect to Lebesgue measure on
/// the windows. Gaps below `1e-300` are floored, their exact logarithm kept.
pub(crate) fn sample_slab_grid_weighted<R: Rng + ?Sized>(config: &SlabConfig, rng: &mut R) -> (TimeGrid, f64) {
    let mut a = Vec::with_capacity(config.m);
    let mut gaps = Vec::with_capacity(config.m);
    let mut logs = Vec::with_capacity(config.m);
    let mut ln_weight = 0.0;
    for i in 1..=config.m {
        let (lo, hi) = config.a_window(i);
        let start = lo + (hi - lo) * rng.random::<f64>();
        let room = config.b_upper(i) - start;
        // v = 1/(1 + ln(room/u)) uniform on (0, 1]
        let v = 1.0 - rng.random::<f64>();
        let l = 1.0 / v - 1.0;
        let u = (room * (-l).exp()).max(crate::moment::GAP_FLOOR);
        ln_weight += (hi - lo).ln() + room.ln() - l + 2.0 * (1.0 + l).ln();
        a.push(start);
        gaps.push(u);
        logs.push(l - room.ln());
    }
    let grid = grid_from_gaps(2.0, 3.0, a, gaps, logs).expect("slab windows are ordered");
    assert_admissible(config, &grid);
    (grid, ln_weight)
}
