//! Heat kernel and the Dickman renewal density.
//!
//! `G_θ(t) = ∫_0^∞ e^{(θ-γ)s} s t^{s-1} / Γ(s+1) ds` and its primitive
//! `∫_0^t G_θ = ∫_0^∞ e^{(θ-γ)s} t^s / Γ(s+1) ds` are both integrals of
//! `exp(ψ(s))` with `ψ(s) = κ s [+ ln s] - ln Γ(s+1)` and `κ = θ - γ - ln(1/t)`.
//! They are evaluated in log space with a certified truncation of the tail.

use std::f64::consts::PI;

use statrs::function::gamma::ln_gamma;

use crate::quad::{integrate_points, CompositeRule, Tolerance};
use crate::{Error, Result};

pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_860_6;

/// Range of θ covered by the test suite.
pub const TESTED_THETA: (f64, f64) = (-5.0, 5.0);

/// `g_t(x) = exp(-|x|²/(2t)) / (2πt)`.
pub fn heat_kernel(t: f64, x: [f64; 2]) -> Result<f64> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::Domain(format!("heat kernel needs t > 0, got {t}")));
    }
    Ok(ln_heat_kernel(t, x).exp())
}

/// Logarithm of the heat kernel; `t` must be positive.
pub fn ln_heat_kernel(t: f64, x: [f64; 2]) -> f64 {
    -(x[0] * x[0] + x[1] * x[1]) / (2.0 * t) - (2.0 * PI * t).ln()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DickmanParams {
    pub theta: f64,
    pub euler_gamma: f64,
    /// Initial truncation point; doubled until the tail bound is small enough.
    pub s_max: f64,
    pub rel_tol: f64,
}

impl DickmanParams {
    pub fn new(theta: f64) -> Self {
        Self { theta, euler_gamma: EULER_GAMMA, s_max: 8.0, rel_tol: 1e-10 }
    }

    pub fn with_rel_tol(mut self, rel_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !self.theta.is_finite() {
            return Err(Error::Domain(format!("theta must be finite, got {}", self.theta)));
        }
        if (self.euler_gamma - EULER_GAMMA).abs() > 1e-12 {
            return Err(Error::Domain(format!(
                "euler_gamma {} is not the Euler-Mascheroni constant",
                self.euler_gamma
            )));
        }
        if !(self.rel_tol > 0.0 && self.rel_tol <= 1e-3) {
            return Err(Error::Domain(format!("rel_tol must lie in (0, 1e-3], got {}", self.rel_tol)));
        }
        if !(self.s_max > 0.0) || !self.s_max.is_finite() {
            return Err(Error::Domain(format!("s_max must be positive, got {}", self.s_max)));
        }
        if self.theta < TESTED_THETA.0 || self.theta > TESTED_THETA.1 {
            log::warn!("theta = {} lies outside the tested range [-5, 5]", self.theta);
        }
        Ok(())
    }
}

/// Diagnostics of one evaluation of `G_θ` or its primitive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DickmanEvaluation {
    /// Natural logarithm of the value.
    pub ln_value: f64,
    /// Truncation point actually used.
    pub s_max: f64,
    /// Certified bound on the discarded tail, relative to the value.
    pub tail_bound: f64,
    /// Quadrature error estimate, relative to the value.
    pub quad_error: f64,
    pub evaluations: usize,
}

impl DickmanEvaluation {
    pub fn value(&self) -> f64 {
        self.ln_value.exp()
    }
}

#[derive(Clone, Copy)]
struct Exponent {
    kappa: f64,
    /// Whether the integrand carries the extra factor `s`.
    with_s: bool,
}

impl Exponent {
    fn psi(&self, s: f64) -> f64 {
        if s <= 0.0 {
            return if self.with_s { f64::NEG_INFINITY } else { 0.0 };
        }
        let extra = if self.with_s { s.ln() } else { 0.0 };
        self.kappa * s + extra - ln_gamma(s + 1.0)
    }

    // Stirling: ln Γ(s+1) ≥ s ln s - s + ½ ln(2πs), so on s ≥ 1 the concave
    // function below dominates ψ.
    fn upper(&self, s: f64) -> f64 {
        let extra = if self.with_s { s.ln() } else { 0.0 };
        self.kappa * s + extra - (s * s.ln() - s + 0.5 * (2.0 * PI * s).ln())
    }

    fn upper_slope(&self, s: f64) -> f64 {
        let extra = if self.with_s { 1.0 / s } else { 0.0 };
        self.kappa + extra - s.ln() - 0.5 / s
    }

    /// Bound on `∫_S^∞ exp(ψ(s) - shift) ds`, or infinity when the concave
    /// majorant is not yet decreasing at `S`.
    fn tail(&self, s: f64, shift: f64) -> f64 {
        let s = s.max(1.0);
        let slope = self.upper_slope(s);
        if slope >= 0.0 {
            return f64::INFINITY;
        }
        (self.upper(s) - shift).exp() / -slope
    }
}

fn log_integral(exponent: Exponent, params: &DickmanParams) -> Result<DickmanEvaluation> {
    let scale = 1.0 / exponent.kappa.abs().max(1.0);
    // Locate the bulk of the integrand on a geometric grid to fix the shift.
    let mut s_end = params.s_max.max(1.0);
    while exponent.upper_slope(s_end) > -1.0 {
        s_end *= 2.0;
    }
    let mut shift = f64::NEG_INFINITY;
    let mut s = scale * 1e-3;
    while s <= s_end {
        shift = shift.max(exponent.psi(s));
        s *= 1.1;
    }
    if !exponent.with_s {
        shift = shift.max(0.0);
    }

    // Graded mesh: first panel of length ~1/|κ|, then geometric.
    let mut points = vec![0.0];
    let mut p = scale / 16.0;
    while p < s_end {
        points.push(p);
        p *= 4.0;
    }
    points.push(s_end);

    let tol = Tolerance { abs: 0.0, rel: 0.25 * params.rel_tol, max_intervals: 4000 };
    let f = |s: f64| (exponent.psi(s) - shift).exp();
    let first = integrate_points(f, &points, tol)?;
    let mut value = first.value;
    let mut error = first.error;
    let mut evaluations = first.evaluations;
    loop {
        let tail = exponent.tail(s_end, shift);
        if tail <= 0.5 * params.rel_tol * value {
            if !(value > 0.0) {
                return Err(Error::Numerical(format!("Dickman integral vanished (kappa {})", exponent.kappa)));
            }
            return Ok(DickmanEvaluation {
                ln_value: shift + value.ln(),
                s_max: s_end,
                tail_bound: tail / value,
                quad_error: error / value,
                evaluations,
            });
        }
        if s_end > 1e8 {
            return Err(Error::Numerical(format!(
                "Dickman tail not certified: s_max {s_end:e}, tail {tail:e}, value {value:e}"
            )));
        }
        let piece = integrate_points(f, &[s_end, 2.0 * s_end], tol)?;
        value += piece.value;
        error += piece.error;
        evaluations += piece.evaluations;
        s_end *= 2.0;
    }
}

fn log_inverse(t: f64) -> Result<f64> {
    if !(t > 0.0 && t <= 1.0) {
        return Err(Error::Domain(format!("t must lie in (0, 1], got {t}")));
    }
    Ok(-t.ln())
}

/// `G_θ` at `t = e^{-l}`, `l ≥ 0`; avoids underflow of `t` itself.
pub fn g_theta_at_log(params: &DickmanParams, l: f64) -> Result<DickmanEvaluation> {
    params.validate()?;
    if !(l >= 0.0) || !l.is_finite() {
        return Err(Error::Domain(format!("ln(1/t) must be finite and non-negative, got {l}")));
    }
    let exponent = Exponent { kappa: params.theta - params.euler_gamma - l, with_s: true };
    let mut e = log_integral(exponent, params)?;
    e.ln_value += l;
    Ok(e)
}

/// `G_θ(t)` for `t ∈ (0, 1]` with diagnostics.
pub fn g_theta_detailed(params: &DickmanParams, t: f64) -> Result<DickmanEvaluation> {
    g_theta_at_log(params, log_inverse(t)?)
}

pub fn g_theta(params: &DickmanParams, t: f64) -> Result<f64> {
    Ok(g_theta_detailed(params, t)?.value())
}

pub fn ln_g_theta(params: &DickmanParams, t: f64) -> Result<f64> {
    Ok(g_theta_detailed(params, t)?.ln_value)
}

/// `∫_0^t G_θ(s) ds` at `t = e^{-l}`.
pub fn g_theta_integral_at_log(params: &DickmanParams, l: f64) -> Result<DickmanEvaluation> {
    params.validate()?;
    if !(l >= 0.0) || !l.is_finite() {
        return Err(Error::Domain(format!("ln(1/t) must be finite and non-negative, got {l}")));
    }
    log_integral(Exponent { kappa: params.theta - params.euler_gamma - l, with_s: false }, params)
}

/// `∫_0^t G_θ(s) ds` for `t ∈ (0, 1]`.
pub fn g_theta_integral(params: &DickmanParams, t: f64) -> Result<f64> {
    Ok(g_theta_integral_at_log(params, log_inverse(t)?)?.value())
}

/// `G_θ(u)` for any `u > 0`, using `G_θ(u) = G_{θ + ln u}(1) / u` above 1.
pub fn g_theta_any(params: &DickmanParams, u: f64) -> Result<f64> {
    if u > 1.0 && u.is_finite() {
        let shifted = DickmanParams { theta: params.theta + u.ln(), ..*params };
        return Ok(g_theta(&shifted, 1.0)? / u);
    }
    g_theta(params, u)
}

/// `∫_0^s G_θ` for any `s > 0`, using `∫_0^s G_θ = ∫_0^1 G_{θ + ln s}` above 1.
pub fn g_theta_integral_any(params: &DickmanParams, s: f64) -> Result<f64> {
    if s > 1.0 && s.is_finite() {
        let shifted = DickmanParams { theta: params.theta + s.ln(), ..*params };
        return g_theta_integral(&shifted, 1.0);
    }
    g_theta_integral(params, s)
}

/// Source of `ln G_θ` values: exact quadrature or an interpolation table.
pub trait DickmanDensity: Sync {
    fn theta(&self) -> f64;
    /// `ln G_θ(e^{-l})` for `l ≥ 0`.
    fn ln_g_at_log(&self, l: f64) -> Result<f64>;
}

impl DickmanDensity for DickmanParams {
    fn theta(&self) -> f64 {
        self.theta
    }
    fn ln_g_at_log(&self, l: f64) -> Result<f64> {
        Ok(g_theta_at_log(self, l)?.ln_value)
    }
}

impl DickmanDensity for GThetaTable {
    fn theta(&self) -> f64 {
        self.theta
    }
    fn ln_g_at_log(&self, l: f64) -> Result<f64> {
        if !(l >= 0.0) || !l.is_finite() {
            return Err(Error::Domain(format!("ln(1/t) must be finite and non-negative, got {l}")));
        }
        Ok(GThetaTable::ln_g_at_log(self, l))
    }
}

/// Independent evaluation of `G_θ(t)`: substitute `s = e^y` and apply a fixed
/// composite Gauss–Legendre rule on `y ∈ [ln 1e-30, ln s_max]`.
///
/// Intended as a cross-check, not for production use.
pub fn g_theta_substituted(params: &DickmanParams, t: f64) -> Result<f64> {
    let detailed = g_theta_detailed(params, t)?;
    let l = -t.ln();
    let exponent = Exponent { kappa: params.theta - params.euler_gamma - l, with_s: true };
    let y_hi = detailed.s_max.ln();
    let rule = CompositeRule::new(-30.0 * std::f64::consts::LN_10, y_hi, 400, 20);
    let shift = detailed.ln_value - l;
    let sum = rule.apply(|y| (exponent.psi(y.exp()) + y - shift).exp());
    Ok((shift + l + sum.ln()).exp())
}

/// Interpolation table for `ln G_θ` on `(0, 1]`.
///
/// With `v = 1/(1 + ln(1/u))` the function `ln(u G_θ(u)) + 2 ln(1/v)` is smooth
/// on `[0, 1]` and vanishes at `v = 0`; it is tabulated on a uniform `v` grid
/// and interpolated by local cubics.
#[derive(Debug, Clone)]
pub struct GThetaTable {
    theta: f64,
    values: Vec<f64>,
}

impl GThetaTable {
    pub const DEFAULT_NODES: usize = 1024;

    pub fn new(theta: f64) -> Result<Self> {
        Self::with_nodes(theta, Self::DEFAULT_NODES)
    }

    pub fn with_nodes(theta: f64, intervals: usize) -> Result<Self> {
        if intervals < 4 {
            return Err(Error::Domain("table needs at least 4 intervals".into()));
        }
        let params = DickmanParams::new(theta).with_rel_tol(1e-12);
        let mut values = Vec::with_capacity(intervals + 1);
        values.push(0.0);
        for k in 1..=intervals {
            let v = k as f64 / intervals as f64;
            let l = 1.0 / v - 1.0;
            let ln_g = g_theta_at_log(&params, l)?.ln_value;
            // ln(u G) = ln G - l, and 2 ln(1/v) = 2 ln(1 + l).
            values.push(ln_g - l + 2.0 * (1.0 + l).ln());
        }
        Ok(Self { theta, values })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// `ln G_θ(u)` at `u = e^{-l}`.
    pub fn ln_g_at_log(&self, l: f64) -> f64 {
        let v = 1.0 / (1.0 + l);
        self.interpolate(v) - 2.0 * (1.0 + l).ln() + l
    }

    /// `ln G_θ(u)` for `u ∈ (0, 1]`.
    pub fn ln_g(&self, u: f64) -> f64 {
        debug_assert!(u > 0.0 && u <= 1.0 + 1e-12);
        self.ln_g_at_log(-u.ln())
    }

    fn interpolate(&self, v: f64) -> f64 {
        let n = self.values.len() - 1;
        let x = v.clamp(0.0, 1.0) * n as f64;
        let i = (x.floor() as usize).clamp(1, n - 2);
        let start = i - 1;
        let ys = &self.values[start..start + 4];
        let xs = x - start as f64;
        // Lagrange cubic through nodes 0, 1, 2, 3 (local coordinates).
        let (d0, d1, d2, d3) = (xs, xs - 1.0, xs - 2.0, xs - 3.0);
        -ys[0] * d1 * d2 * d3 / 6.0 + ys[1] * d0 * d2 * d3 / 2.0 - ys[2] * d0 * d1 * d3 / 2.0
            + ys[3] * d0 * d1 * d2 / 6.0
    }
}
