//! Streaming estimators.

use serde::{Deserialize, Serialize};

/// Mean and standard error of a Monte Carlo estimate.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Self { value, std_error: 0.0 }
    }

    /// Sum of independent estimates.
    pub fn plus(self, other: Estimate) -> Self {
        Self { value: self.value + other.value, std_error: self.std_error.hypot(other.std_error) }
    }

    pub fn scale(self, factor: f64) -> Self {
        Self { value: self.value * factor, std_error: self.std_error * factor.abs() }
    }

    pub fn relative_error(&self) -> f64 {
        if self.value == 0.0 {
            if self.std_error == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            self.std_error / self.value.abs()
        }
    }
}

/// Accumulates non-negative samples given by their logarithms.
///
/// Samples are stored relative to a running maximum (streaming log-sum-exp),
/// so values spanning hundreds of orders of magnitude never overflow.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogAccumulator {
    count: u64,
    shift: f64,
    sum: f64,
    sum_sq: f64,
}

impl Default for LogAccumulator {
    fn default() -> Self {
        Self { count: 0, shift: f64::NEG_INFINITY, sum: 0.0, sum_sq: 0.0 }
    }
}

impl LogAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a sample `exp(log_value)`; `-inf` records a zero.
    pub fn push(&mut self, log_value: f64) {
        debug_assert!(!log_value.is_nan());
        self.count += 1;
        if log_value == f64::NEG_INFINITY {
            return;
        }
        if log_value > self.shift {
            self.rescale(log_value);
        }
        let x = (log_value - self.shift).exp();
        self.sum += x;
        self.sum_sq += x * x;
    }

    fn rescale(&mut self, new_shift: f64) {
        if self.shift != f64::NEG_INFINITY {
            let r = (self.shift - new_shift).exp();
            self.sum *= r;
            self.sum_sq *= r * r;
        }
        self.shift = new_shift;
    }

    pub fn merge(&mut self, other: &LogAccumulator) {
        if other.shift > self.shift {
            self.rescale(other.shift);
        }
        let r = if other.shift == f64::NEG_INFINITY { 0.0 } else { (other.shift - self.shift).exp() };
        self.count += other.count;
        self.sum += other.sum * r;
        self.sum_sq += other.sum_sq * r * r;
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    /// Logarithm of the sample mean (`-inf` if every sample was zero).
    pub fn log_mean(&self) -> f64 {
        if self.count == 0 || self.sum == 0.0 {
            return f64::NEG_INFINITY;
        }
        self.shift + (self.sum / self.count as f64).ln()
    }

    /// Standard error of the mean divided by the mean.
    pub fn relative_std_error(&self) -> f64 {
        if self.count < 2 || self.sum == 0.0 {
            return 0.0;
        }
        let n = self.count as f64;
        let mean = self.sum / n;
        let var = (self.sum_sq / n - mean * mean).max(0.0) * n / (n - 1.0);
        (var / n).sqrt() / mean
    }

    pub fn estimate(&self) -> Estimate {
        let value = self.log_mean().exp();
        Estimate { value, std_error: value * self.relative_std_error() }
    }
}

/// Kolmogorov–Smirnov distance between the empirical law of `samples` and a
/// continuous distribution function.
pub fn ks_distance(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    d
}

/// Sample mean and standard error of the mean.
pub fn mean_and_error(xs: &[f64]) -> Estimate {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return Estimate::default();
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return Estimate::exact(mean);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Estimate { value: mean, std_error: (var / n).sqrt() }
}
