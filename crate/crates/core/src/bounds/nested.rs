//! The nested denominator integral
//! `∫_{[0,1]^{m+h-1}} ∏_{i≤m} 1/(x_i + … + x_{i+h-1}) dx`.
//!
//! Sampling works in `s = -ln x`: `s_1 ~ Exp(1/2)` and the increments
//! `s_{i+1} - s_i` follow the density `1/(2π cosh(Δ/2))`. The resulting weight
//! is `2 π^{n-1} √x_n ∏ (x_i + x_{i+1}) · f(x)`, bounded for every `h ≥ 2`.

use std::f64::consts::{LN_2, PI};

use rand::Rng;
use serde::Serialize;

use crate::rng::{run_batches, Module, BATCH};
use crate::stats::LogAccumulator;
use crate::{Error, Result};

#[derive(Debug, Clone, Serialize)]
pub struct NestedEstimate {
    pub h: usize,
    pub m: usize,
    pub value: f64,
    pub std_error: f64,
    pub log_value: f64,
    pub samples: usize,
}

fn log_weight<R: Rng + ?Sized>(rng: &mut R, h: usize, m: usize, x: &mut [f64]) -> f64 {
    let n = x.len();
    let mut s = -2.0 * (1.0 - rng.random::<f64>()).ln();
    for i in 0..n {
        if i > 0 {
            let u: f64 = rng.random();
            s += 2.0 * (0.5 * PI * u).tan().ln();
        }
        if !(s >= 0.0) {
            return f64::NEG_INFINITY;
        }
        x[i] = (-s).exp();
    }
    let mut log = LN_2 + (n - 1) as f64 * PI.ln() + 0.5 * x[n - 1].ln();
    for i in 0..n - 1 {
        log += (x[i] + x[i + 1]).ln();
    }
    for i in 0..m {
        log -= x[i..i + h].iter().sum::<f64>().ln();
    }
    log
}

pub fn nested_denominator_integral(h: usize, m: usize, samples: usize, seed: u64) -> Result<NestedEstimate> {
    if h < 2 || m == 0 {
        return Err(Error::Domain(format!("need h ≥ 2 and m ≥ 1, got h = {h}, m = {m}")));
    }
    if samples < 2 {
        return Err(Error::Domain("at least two samples are needed".into()));
    }
    let key = ((h as u32) << 16) | m as u32;
    let batches = run_batches(samples, BATCH, seed, Module::Nested, key, |rng, _, count| {
        let mut x = vec![0.0; m + h - 1];
        let mut acc = LogAccumulator::new();
        for _ in 0..count {
            acc.push(log_weight(rng, h, m, &mut x));
        }
        acc
    });
    let mut acc = LogAccumulator::new();
    batches.iter().for_each(|b| acc.merge(b));
    let e = acc.estimate();
    Ok(NestedEstimate { h, m, value: e.value, std_error: e.std_error, log_value: acc.log_mean(), samples })
}

/// `m (3/2 - 2 ln 2) = -m E ln(X_1 + X_2)`: the convexity lower bound on the
/// log of the `h = 2` integral.
pub fn jensen_lower_log(m: usize) -> f64 {
    m as f64 * (1.5 - 2.0 * LN_2)
}

/// Least-squares slope of `ln I_m` against `m`, with the slopes of the lower
/// and upper halves of the range.
#[derive(Debug, Clone, Serialize)]
pub struct GrowthFit {
    pub slope: f64,
    pub lower_half: f64,
    pub upper_half: f64,
}

impl GrowthFit {
    pub fn from_points(points: &[(usize, f64)]) -> Result<Self> {
        if points.len() < 3 {
            return Err(Error::Domain("a growth fit needs at least three points".into()));
        }
        let mid = points.len() / 2;
        Ok(Self { slope: slope(points), lower_half: slope(&points[..=mid]), upper_half: slope(&points[mid..]) })
    }

    /// Largest relative deviation of a half-range slope from the full slope.
    pub fn max_relative_deviation(&self) -> f64 {
        ((self.lower_half - self.slope) / self.slope).abs().max(((self.upper_half - self.slope) / self.slope).abs())
    }
}

fn slope(points: &[(usize, f64)]) -> f64 {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0 as f64).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 as f64 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 as f64 - mx).powi(2)).sum();
    sxy / sxx
}
