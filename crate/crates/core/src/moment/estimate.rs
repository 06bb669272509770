//! Monte Carlo estimates of truncated moments and kernels.

use serde::Serialize;

use super::feynman::{build_feynman_graph, integrand_prefactor_log, spatial_parts};
use super::grid::sample_grid;
use crate::diagrams::{pattern_count, sample_pattern, CollisionPattern};
use crate::rng::{run_batches, Module, StreamRng, BATCH};
use crate::special::{DickmanDensity, GThetaTable};
use crate::stats::{Estimate, LogAccumulator};
use crate::{Error, Result};

/// Patterns are enumerated (and stratified over) up to this count.
pub const EXHAUSTIVE_PATTERNS: u128 = 100_000;

#[derive(Debug, Clone, Serialize)]
pub struct MContribution {
    pub m: usize,
    pub value: f64,
    pub std_error: f64,
    pub samples: usize,
    pub patterns: u128,
    pub exhaustive: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct MomentEstimate {
    pub h: usize,
    pub theta: f64,
    pub m_max: usize,
    pub value: f64,
    pub std_error: f64,
    /// The `m = 0` term.
    pub constant_term: f64,
    pub per_m: Vec<MContribution>,
    pub samples: usize,
    pub seed: u64,
}

impl MomentEstimate {
    pub fn relative_std_error(&self) -> f64 {
        if self.value == 0.0 {
            0.0
        } else {
            self.std_error / self.value
        }
    }
}

/// Where the walkers start.
#[derive(Debug, Clone, Copy)]
pub enum InitialData<'a> {
    /// `g_1` initial data: times on `[2, 3]`, augmented graphs.
    Gaussian,
    /// Fixed starting points `α z`, times on `[0, 1]`.
    Points { z: &'a [[f64; 2]], alphas: &'a [f64] },
}

impl InitialData<'_> {
    fn window(&self) -> f64 {
        match self {
            InitialData::Gaussian => 2.0,
            InitialData::Points { .. } => 0.0,
        }
    }

    fn outputs(&self) -> usize {
        match self {
            InitialData::Gaussian => 1,
            InitialData::Points { alphas, .. } => alphas.len(),
        }
    }
}

/// Per-sample log values (one per α) for a pattern and a freshly drawn grid.
fn sample_logs(
    rng: &mut StreamRng,
    pattern: &CollisionPattern,
    g: &impl DickmanDensity,
    data: InitialData<'_>,
    out: &mut [f64],
) -> Result<()> {
    let Some(wg) = sample_grid(rng, pattern.m(), data.window(), 1.0) else {
        out.fill(f64::NEG_INFINITY);
        return Ok(());
    };
    let augmented = matches!(data, InitialData::Gaussian);
    let fg = build_feynman_graph(pattern, &wg.grid, augmented)?;
    let base = wg.ln_weight + integrand_prefactor_log(&fg, &wg.grid, g)?;
    let parts = spatial_parts(&fg)?;
    match data {
        InitialData::Gaussian => out[0] = base + parts.log_zero_boundary,
        InitialData::Points { z, alphas } => {
            let energy = parts.energy(z);
            for (o, &alpha) in out.iter_mut().zip(alphas) {
                *o = base + parts.log_zero_boundary - 0.5 * alpha * alpha * energy;
            }
        }
    }
    Ok(())
}

/// Estimates `Σ_{patterns} ∫ integrand` at a fixed `m`, one value per output.
fn contribution(
    h: usize,
    m: usize,
    g: &impl DickmanDensity,
    data: InitialData<'_>,
    samples: usize,
    seed: u64,
    module: Module,
) -> Result<Vec<MContribution>> {
    let count = pattern_count(h, m);
    let outputs = data.outputs();
    if count == 0 {
        let zero = MContribution { m, value: 0.0, std_error: 0.0, samples: 0, patterns: 0, exhaustive: true };
        return Ok(vec![zero; outputs]);
    }
    let per_pattern = if count <= EXHAUSTIVE_PATTERNS { samples / count as usize } else { 0 };
    let key = m as u32;
    if per_pattern >= 2 {
        // Stratified: every pattern gets `per_pattern` grids.
        let patterns: Vec<CollisionPattern> =
            crate::diagrams::enumerate_patterns_capped(h, m, EXHAUSTIVE_PATTERNS)?.collect();
        let chunk = (BATCH / per_pattern).max(1);
        let batches = run_batches(patterns.len(), chunk, seed, module, key, |rng, b, n| -> Result<Vec<Estimate>> {
            let mut sums = vec![Estimate::default(); outputs];
            let mut logs = vec![0.0; outputs];
            for pattern in &patterns[b * chunk..b * chunk + n] {
                let mut accs = vec![LogAccumulator::new(); outputs];
                for _ in 0..per_pattern {
                    sample_logs(rng, pattern, g, data, &mut logs)?;
                    accs.iter_mut().zip(&logs).for_each(|(acc, &l)| acc.push(l));
                }
                for (s, acc) in sums.iter_mut().zip(&accs) {
                    *s = s.plus(acc.estimate());
                }
            }
            Ok(sums)
        });
        let mut totals = vec![Estimate::default(); outputs];
        for batch in batches {
            for (t, e) in totals.iter_mut().zip(batch?) {
                *t = t.plus(e);
            }
        }
        let used = per_pattern * patterns.len();
        return Ok(totals
            .into_iter()
            .map(|e| MContribution {
                m,
                value: e.value,
                std_error: e.std_error,
                samples: used,
                patterns: count,
                exhaustive: true,
            })
            .collect());
    }
    // Uniform patterns with exact-count reweighting.
    let batches = run_batches(samples, BATCH, seed, module, key, |rng, _, n| -> Result<Vec<LogAccumulator>> {
        let mut accs = vec![LogAccumulator::new(); outputs];
        let mut logs = vec![0.0; outputs];
        for _ in 0..n {
            let pattern = sample_pattern(h, m, rng)?;
            sample_logs(rng, &pattern, g, data, &mut logs)?;
            accs.iter_mut().zip(&logs).for_each(|(acc, &l)| acc.push(l));
        }
        Ok(accs)
    });
    let mut accs = vec![LogAccumulator::new(); outputs];
    for batch in batches {
        for (acc, b) in accs.iter_mut().zip(batch?) {
            acc.merge(&b);
        }
    }
    Ok(accs
        .iter()
        .map(|acc| {
            let e = acc.estimate().scale(count as f64);
            MContribution { m, value: e.value, std_error: e.std_error, samples, patterns: count, exhaustive: false }
        })
        .collect())
}

fn check(h: usize, samples: usize) -> Result<()> {
    if h == 0 {
        return Err(Error::Domain("h must be at least 1".into()));
    }
    if samples < 2 {
        return Err(Error::Domain("at least two samples per truncation level are needed".into()));
    }
    Ok(())
}

fn assemble(h: usize, theta: f64, m_max: usize, scale: f64, per_m: Vec<MContribution>, seed: u64) -> MomentEstimate {
    let per_m: Vec<MContribution> = per_m
        .into_iter()
        .map(|c| MContribution { value: c.value * scale, std_error: c.std_error * scale, ..c })
        .collect();
    let total = per_m
        .iter()
        .fold(Estimate::exact(scale), |acc, c| acc.plus(Estimate { value: c.value, std_error: c.std_error }));
    MomentEstimate {
        h,
        theta,
        m_max,
        value: total.value,
        std_error: total.std_error,
        constant_term: scale,
        samples: per_m.iter().map(|c| c.samples).sum(),
        per_m,
        seed,
    }
}

/// `E[(Z_1^θ(g_1))^h]` truncated at `m_max` collisions, with `samples`
/// Monte Carlo draws per collision count.
pub fn moment_gaussian(h: usize, theta: f64, m_max: usize, samples: usize, seed: u64) -> Result<MomentEstimate> {
    check(h, samples)?;
    let table = GThetaTable::new(theta)?;
    moment_gaussian_with(h, &table, m_max, samples, seed)
}

pub fn moment_gaussian_with(
    h: usize,
    g: &impl DickmanDensity,
    m_max: usize,
    samples: usize,
    seed: u64,
) -> Result<MomentEstimate> {
    check(h, samples)?;
    let mut per_m = Vec::with_capacity(m_max);
    for m in 1..=m_max {
        per_m.push(contribution(h, m, g, InitialData::Gaussian, samples, seed, Module::Moment)?.remove(0));
    }
    Ok(assemble(h, g.theta(), m_max, 0.5f64.powi(h as i32), per_m, seed))
}

/// `K_t^(h)(α z)` for every `α` in `alphas`, truncated at `m_max`.
///
/// All `α` share the same samples, so each sampled term is exactly
/// non-increasing in `α`. Times `t ≠ 1` use `K_t^θ(z) = K_1^{θ + ln t}(z/√t)`.
pub fn kernel_at_points_scaled(
    zs: &[[f64; 2]],
    alphas: &[f64],
    theta: f64,
    t: f64,
    m_max: usize,
    samples: usize,
    seed: u64,
) -> Result<Vec<MomentEstimate>> {
    let h = zs.len();
    check(h, samples)?;
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::Domain(format!("t must be positive, got {t}")));
    }
    if alphas.is_empty() {
        return Err(Error::Domain("at least one scale factor is needed".into()));
    }
    let shifted = theta + t.ln();
    let scaled: Vec<[f64; 2]> = zs.iter().map(|z| [z[0] / t.sqrt(), z[1] / t.sqrt()]).collect();
    let table = GThetaTable::new(shifted)?;
    let data = InitialData::Points { z: &scaled, alphas };
    let mut per_alpha: Vec<Vec<MContribution>> = vec![Vec::new(); alphas.len()];
    for m in 1..=m_max {
        for (k, c) in contribution(h, m, &table, data, samples, seed, Module::Kernel)?.into_iter().enumerate() {
            per_alpha[k].push(c);
        }
    }
    Ok(per_alpha.into_iter().map(|per_m| assemble(h, theta, m_max, 1.0, per_m, seed)).collect())
}

pub fn kernel_at_points(
    zs: &[[f64; 2]],
    theta: f64,
    t: f64,
    m_max: usize,
    samples: usize,
    seed: u64,
) -> Result<MomentEstimate> {
    Ok(kernel_at_points_scaled(zs, &[1.0], theta, t, m_max, samples, seed)?.remove(0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_moment_is_one_half() {
        let e = moment_gaussian(1, 0.3, 5, 100, 1).unwrap();
        assert_eq!(e.value, 0.5);
        assert_eq!(e.std_error, 0.0);
    }

    #[test]
    fn no_collisions_gives_constant_term() {
        for h in 1..6 {
            let e = moment_gaussian(h, 0.0, 0, 10, 1).unwrap();
            assert_eq!(e.value, 0.5f64.powi(h as i32));
        }
        let k = kernel_at_points(&[[0.0, 0.0]], 0.0, 1.0, 4, 10, 1).unwrap();
        assert_eq!(k.value, 1.0);
    }

    #[test]
    fn estimates_are_seed_deterministic() {
        let a = moment_gaussian(3, 0.0, 2, 2000, 5).unwrap();
        let b = moment_gaussian(3, 0.0, 2, 2000, 5).unwrap();
        assert_eq!(a.value, b.value);
        assert_eq!(a.per_m.len(), 2);
        assert!(a.per_m.iter().all(|c| c.value >= 0.0));
    }

    #[test]
    fn alpha_scan_is_monotone_sample_by_sample() {
        let z = [[0.3, 0.0], [-0.2, 0.4], [0.0, -0.5]];
        let k = kernel_at_points_scaled(&z, &[0.5, 1.0, 2.0], 0.0, 1.0, 2, 3000, 9).unwrap();
        assert!(k[0].value >= k[1].value && k[1].value >= k[2].value);
    }
}
