//! The two-point kernel with flat final data and its `g_1` contraction.
//!
//! Integrating out the endpoints `y, y'` leaves
//! `K(x, x') = π ∬_{0<a<b<t} g_a(x' - x) G_θ(b - a) da db
//!           = π ∫_0^t g_a(x' - x) (∫_0^{t-a} G_θ) da`.

use std::f64::consts::PI;

use serde::Serialize;

use crate::quad::{integrate_points, CompositeRule, Tolerance};
use crate::special::{g_theta_at_log, g_theta_integral_any, heat_kernel, DickmanParams};
use crate::{Error, Result};

fn squared_distance(x: [f64; 2], xprime: [f64; 2]) -> f64 {
    (x[0] - xprime[0]).powi(2) + (x[1] - xprime[1]).powi(2)
}

fn check(x: [f64; 2], xprime: [f64; 2], t: f64) -> Result<f64> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::Domain(format!("t must be positive, got {t}")));
    }
    let d2 = squared_distance(x, xprime);
    if d2 == 0.0 {
        // g_a(0) = 1/(2πa) and ∫_0^{t-a} G_θ → ∫_0^t G_θ > 0 as a → 0.
        return Err(Error::Domain("the kernel diverges logarithmically at x = x'".into()));
    }
    Ok(d2)
}

fn breakpoints(d2: f64, t: f64) -> Vec<f64> {
    // g_a(d) peaks at a = d²/2.
    let peak = 0.5 * d2;
    let mut pts = vec![0.0];
    for f in [0.25, 1.0, 4.0] {
        if peak * f < t {
            pts.push(peak * f);
        }
    }
    pts.push(t);
    pts
}

/// `π ∫_0^t g_a(x' - x) ∫_0^{t-a} G_θ da` (flat final data).
pub fn covariance_second_moment(theta: f64, x: [f64; 2], xprime: [f64; 2], t: f64) -> Result<f64> {
    let d2 = check(x, xprime, t)?;
    let params = DickmanParams::new(theta);
    let mut err = None;
    let integrand = |a: f64| {
        if a <= 0.0 || a >= t {
            return 0.0;
        }
        let gk = (-d2 / (2.0 * a)).exp() / (2.0 * PI * a);
        if gk == 0.0 {
            return 0.0;
        }
        match g_theta_integral_any(&params, t - a) {
            Ok(v) => gk * v,
            Err(e) => {
                err.get_or_insert(e);
                0.0
            }
        }
    };
    let r = integrate_points(integrand, &breakpoints(d2, t), Tolerance::rel(1e-9))?;
    if let Some(e) = err {
        return Err(e);
    }
    Ok(PI * r.value)
}

/// `∫_0^s G_θ` by direct quadrature of `G_θ` with `v = 1/(1 + ln(1/u))`,
/// which maps the endpoint singularity to a bounded integrand (`s ≤ 1`).
fn g_integral_direct(params: &DickmanParams, s: f64) -> Result<f64> {
    if s <= 0.0 {
        return Ok(0.0);
    }
    let v_max = 1.0 / (1.0 - s.ln());
    let mut err = None;
    // u G(u) / v² = exp(ln G - l + 2 ln(1 + l))
    let f = |v: f64| {
        if v <= 0.0 {
            return 1.0;
        }
        let l = 1.0 / v - 1.0;
        match g_theta_at_log(params, l) {
            Ok(e) => (e.ln_value - l + 2.0 * (1.0 + l).ln()).exp(),
            Err(e) => {
                err.get_or_insert(e);
                0.0
            }
        }
    };
    let r = integrate_points(f, &[0.0, 0.5 * v_max, v_max], Tolerance::rel(1e-10))?;
    match err {
        Some(e) => Err(e),
        None => Ok(r.value),
    }
}

/// The same kernel as [`covariance_second_moment`] by a nested quadrature over
/// `(a, b)` that integrates `G_θ` itself rather than its closed-form
/// primitive. Requires `t ≤ 1`.
pub fn covariance_second_moment_nested(theta: f64, x: [f64; 2], xprime: [f64; 2], t: f64) -> Result<f64> {
    let d2 = check(x, xprime, t)?;
    if t > 1.0 {
        return Err(Error::Domain("the nested scheme needs t <= 1".into()));
    }
    let params = DickmanParams::new(theta).with_rel_tol(1e-11);
    let mut err = None;
    let outer = |a: f64| {
        if a <= 0.0 || a >= t {
            return 0.0;
        }
        let gk = (-d2 / (2.0 * a)).exp() / (2.0 * PI * a);
        if gk == 0.0 {
            return 0.0;
        }
        match g_integral_direct(&params, t - a) {
            Ok(v) => gk * v,
            Err(e) => {
                err.get_or_insert(e);
                0.0
            }
        }
    };
    let r = integrate_points(outer, &breakpoints(d2, t), Tolerance::rel(1e-8))?;
    match err {
        Some(e) => Err(e),
        None => Ok(PI * r.value),
    }
}

/// `E[Z_1^θ(g_1)²]` from the two-point kernel.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SecondMomentG1 {
    /// `¼ + ¼ ∫_0^1 (∫_0^{1-a} G_θ) / (2 + a) da`, after the Gaussian
    /// integrals over `x, x'` are done in closed form.
    pub analytic: f64,
    /// `¼ + ½ ∫ g_2(d) K(0, d) dd` by radial quadrature of the kernel.
    pub quadrature: f64,
}

pub fn second_moment_g1(theta: f64) -> Result<SecondMomentG1> {
    let params = DickmanParams::new(theta);
    let mut err = None;
    let f = |a: f64| match g_theta_integral_any(&params, 1.0 - a) {
        Ok(v) => v / (2.0 + a),
        Err(e) => {
            err.get_or_insert(e);
            0.0
        }
    };
    let inner = integrate_points(f, &[0.0, 0.5, 0.9, 0.99, 1.0], Tolerance::rel(1e-11))?.value;
    if let Some(e) = err {
        return Err(e);
    }
    let analytic = 0.25 + 0.25 * inner;

    // x - x' ~ g_2: ∫ g_2(d) K(d) dd = ∫_0^∞ 2π r g_2(r) K(r) dr with r = w².
    let rule = CompositeRule::new(0.0, 12f64.sqrt(), 24, 12);
    let mut failure = None;
    let radial = rule.apply(|w| {
        let r = w * w;
        match covariance_second_moment(theta, [0.0, 0.0], [r, 0.0], 1.0) {
            Ok(k) => 2.0 * PI * r * heat_kernel(2.0, [r, 0.0]).unwrap_or(0.0) * k * 2.0 * w,
            Err(e) => {
                failure.get_or_insert(e);
                0.0
            }
        }
    });
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(SecondMomentG1 { analytic, quadrature: 0.25 + 0.5 * radial })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coincident_points_diverge() {
        assert!(matches!(covariance_second_moment(0.0, [1.0, 1.0], [1.0, 1.0], 1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn two_schemes_agree() {
        let a = covariance_second_moment(0.0, [0.0, 0.0], [0.5, 0.0], 1.0).unwrap();
        let b = covariance_second_moment_nested(0.0, [0.0, 0.0], [0.5, 0.0], 1.0).unwrap();
        assert!((a / b - 1.0).abs() < 1e-5, "{a} vs {b}");
    }

    #[test]
    fn second_moment_reference_values() {
        // Independent arbitrary-precision evaluation of the closed-form route.
        for (theta, expected) in
            [(-1.0, 0.297_021_284_966_233), (0.0, 0.330_012_778_405_086), (1.0, 0.451_317_003_393_655)]
        {
            let s = second_moment_g1(theta).unwrap();
            assert!((s.analytic - expected).abs() < 1e-9, "{theta}: {}", s.analytic);
            assert!((s.quadrature - expected).abs() < 1e-5, "{theta}: {}", s.quadrature);
        }
    }
}
