//! Box-restricted kernel mass against the Gaussian-weighted moment.

use std::f64::consts::PI;

use rand::Rng;
use serde::Serialize;

use crate::diagrams::{pattern_count, sample_pattern};
use crate::moment::{integrand_log, moment_gaussian, sample_grid};
use crate::rng::{run_batches, Module, BATCH};
use crate::special::GThetaTable;
use crate::stats::{Estimate, LogAccumulator};
use crate::{Error, Result};

#[derive(Debug, Clone, Serialize)]
pub struct CompareCheck {
    pub h: usize,
    pub delta: f64,
    pub theta: f64,
    pub m_max: usize,
    /// `∫_{([-δ, δ]²)^h} K^(h)`, truncated at `m_max` collisions.
    pub lhs: Estimate,
    /// `δ^{2h} e^{-2h²} ∫ K^(h) g_1^{⊗h}`, truncated the same way.
    pub rhs: Estimate,
    pub multiplier: f64,
    /// `sup g_1^{⊗h} = (2π)^{-h}`.
    pub gaussian_sup: f64,
}

impl CompareCheck {
    pub fn margin(&self) -> f64 {
        self.lhs.value - self.rhs.value
    }

    pub fn sigma(&self) -> f64 {
        self.lhs.std_error.hypot(self.rhs.std_error)
    }

    pub fn holds_within(&self, sigmas: f64) -> bool {
        self.margin() + sigmas * self.sigma() >= 0.0
    }
}

/// Evaluates both sides with `samples` draws each. Only `h ∈ {2, 3}` and
/// `m_max ≤ 2` are supported.
pub fn compare_test_functions_check(
    h: usize,
    delta: f64,
    theta: f64,
    m_max: usize,
    samples: usize,
    seed: u64,
) -> Result<CompareCheck> {
    if !(2..=3).contains(&h) {
        return Err(Error::Domain(format!("the comparison is evaluated for h = 2 or 3, got {h}")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Domain(format!("delta must lie in (0, 1), got {delta}")));
    }
    if m_max > 2 {
        return Err(Error::Domain(format!("m_max is limited to 2, got {m_max}")));
    }
    if samples < 2 {
        return Err(Error::Domain("at least two samples are needed".into()));
    }
    let table = GThetaTable::new(theta)?;
    let counts: Vec<f64> = (1..=m_max).map(|m| pattern_count(h, m) as f64).collect();
    let batches = run_batches(samples, BATCH, seed, Module::Compare, 0, |rng, _, n| {
        let mut acc = LogAccumulator::new();
        let mut z = vec![[0.0; 2]; h];
        let mut terms = Vec::with_capacity(m_max);
        for _ in 0..n {
            for p in z.iter_mut() {
                *p = [delta * (2.0 * rng.random::<f64>() - 1.0), delta * (2.0 * rng.random::<f64>() - 1.0)];
            }
            terms.clear();
            for (k, &count) in counts.iter().enumerate() {
                let m = k + 1;
                if count == 0.0 {
                    terms.push(f64::NEG_INFINITY);
                    continue;
                }
                let pattern = sample_pattern(h, m, rng)?;
                let term = match sample_grid(rng, m, 0.0, 1.0) {
                    Some(wg) => wg.ln_weight + count.ln() + integrand_log(&pattern, &wg.grid, &table, Some(&z))?,
                    None => f64::NEG_INFINITY,
                };
                terms.push(term);
            }
            acc.push(log_sum_exp(&terms));
        }
        Ok::<_, Error>(acc)
    });
    let mut acc = LogAccumulator::new();
    for b in batches {
        acc.merge(&b?);
    }
    let volume = (2.0 * delta).powi(2 * h as i32);
    let lhs = Estimate::exact(1.0).plus(acc.estimate()).scale(volume);

    let multiplier = delta.powi(2 * h as i32) * (-2.0 * (h * h) as f64).exp();
    let moment = moment_gaussian(h, theta, m_max, samples, seed)?;
    let rhs = Estimate { value: moment.value, std_error: moment.std_error }.scale(multiplier * 2f64.powi(h as i32));
    Ok(CompareCheck { h, delta, theta, m_max, lhs, rhs, multiplier, gaussian_sup: (2.0 * PI).powi(-(h as i32)) })
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let top = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if top == f64::NEG_INFINITY {
        return top;
    }
    top + xs.iter().map(|x| (x - top).exp()).sum::<f64>().ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moment::second_moment_g1;
    use crate::quad::{integrate, Tolerance};
    use crate::special::{g_theta_integral_any, DickmanParams};

    #[test]
    fn holds_at_two_walkers() {
        let c = compare_test_functions_check(2, 0.5, 0.0, 1, 20_000, 1).unwrap();
        assert!(c.holds_within(3.0));
        assert!(c.margin() > 0.9 * c.lhs.value);
        assert!(c.gaussian_sup < 1.0);
        // rhs uses the exact h = 2 moment
        let exact = second_moment_g1(0.0).unwrap().analytic;
        assert!((c.rhs.value / (c.multiplier * 4.0 * exact) - 1.0).abs() < 0.02);
    }

    #[test]
    fn box_mass_matches_one_dimensional_oracle() {
        // h = 2, m = 1: K(z) = 1 + 2π ∫_0^1 g_a(z1 - z2) Gint(1 - a) da. Over the
        // box, z1 - z2 has independent triangular coordinates on [-2δ, 2δ].
        let delta: f64 = 0.3;
        let p = DickmanParams::new(0.0);
        let tri = |x: f64| (2.0 * delta - x.abs()) / (4.0 * delta * delta);
        let tol = Tolerance::rel(1e-9);
        let inner = |a: f64| {
            let one = integrate(|x| tri(x) * (-x * x / (2.0 * a)).exp(), -2.0 * delta, 2.0 * delta, tol).unwrap().value;
            one * one / (2.0 * PI * a)
        };
        let mass = integrate(|a| inner(a) * g_theta_integral_any(&p, 1.0 - a).unwrap(), 0.0, 1.0, tol).unwrap().value;
        let volume = (2.0 * delta).powi(4);
        let expected = volume * (1.0 + 2.0 * PI * mass);
        let c = compare_test_functions_check(2, delta, 0.0, 1, 200_000, 2).unwrap();
        assert!((c.lhs.value - expected).abs() < 3.0 * c.lhs.std_error + 1e-12, "{:?} vs {expected}", c.lhs);
    }

    #[test]
    fn domain_errors() {
        assert!(compare_test_functions_check(4, 0.5, 0.0, 1, 10, 1).is_err());
        assert!(compare_test_functions_check(2, 1.0, 0.0, 1, 10, 1).is_err());
        assert!(compare_test_functions_check(2, 0.5, 0.0, 3, 10, 1).is_err());
    }
}
