//! Upper-tail envelopes from moment bounds.
//!
//! Tail levels are astronomically large, so the level is passed as
//! `L = ln ln z` and every derived quantity is kept in log form.

use serde::Serialize;

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailParams {
    /// `c` in `E[X^h] ≤ exp(exp(c h²))`.
    pub c_upper: f64,
    /// `c0` in `E[X^h] ≥ exp(exp(c0 h))`.
    pub c0_lower: f64,
    /// `ln ln z`.
    pub log_log_z: f64,
}

impl TailParams {
    pub fn new(c_upper: f64, c0_lower: f64, log_log_z: f64) -> Result<Self> {
        if !(c_upper > 0.0 && c0_lower > 0.0) {
            return Err(Error::Domain("tail constants must be positive".into()));
        }
        if !log_log_z.is_finite() {
            return Err(Error::Domain("ln ln z must be finite".into()));
        }
        Ok(Self { c_upper, c0_lower, log_log_z })
    }

    /// From the level `z` itself (`z > e`).
    pub fn from_level(c_upper: f64, c0_lower: f64, z: f64) -> Result<Self> {
        if !(z > std::f64::consts::E) {
            return Err(Error::Domain(format!("tail level must exceed e, got {z}")));
        }
        Self::new(c_upper, c0_lower, z.ln().ln())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TailEnvelope {
    pub l: f64,
    pub m: f64,
    pub h: u64,
    /// `ln ln w = c L² M²`.
    pub log_log_w: f64,
    /// `ln P(X ≥ z) ≤ ln z - (ln z/√c) √(ln ln z)`.
    pub upper_exponent: f64,
    /// `ln(L M) + c L² M²`, the log of `-lower_exponent`.
    pub lower_log_magnitude: f64,
    /// `LM - h - 1`, the decay power of the `[w, ∞)` piece.
    pub i3_power: f64,
    /// `ln(h w^{-(LM-h-1)} / (LM - h - 1))`.
    pub i3_log_bound: f64,
    /// `ln P(X ≥ t) ≤ (1 - LM) ln t` at `t = w`, as `1 - √(ln ln w / c) ≤ 1 - LM`.
    pub markov_step_holds: bool,
}

impl TailEnvelope {
    /// `-LM exp(c L² M²)`; `-∞` once it leaves floating-point range.
    pub fn lower_exponent(&self) -> f64 {
        -self.lower_log_magnitude.exp()
    }

    pub fn nested(&self) -> bool {
        if self.upper_exponent >= 0.0 {
            return true;
        }
        self.lower_log_magnitude >= (-self.upper_exponent).ln()
    }
}

pub fn tail_envelope(params: &TailParams) -> Result<TailEnvelope> {
    let l = params.log_log_z;
    if !(l > 1.0) {
        return Err(Error::Domain(format!("z too small: ln ln z = {l} must exceed 1")));
    }
    let m = l.ln();
    let lm = l * m;
    let floor = lm.floor();
    if floor < 11.0 {
        return Err(Error::Domain(format!("z too small: h = ⌊LM⌋ - 10 = {} < 1", floor - 10.0)));
    }
    let h = floor - 10.0;
    let c = params.c_upper;
    let log_log_w = c * lm * lm;
    let upper_exponent = l.exp() * (1.0 - (l / c).sqrt());
    let i3_power = lm - h - 1.0;
    let log_w = log_log_w.exp();
    let i3_log_bound = h.ln() - i3_power.ln() - i3_power * log_w;
    let markov_step_holds = 1.0 - (log_log_w / c).sqrt() <= 1.0 - lm + 1e-12 * lm;
    Ok(TailEnvelope {
        l,
        m,
        h: h as u64,
        log_log_w,
        upper_exponent,
        lower_log_magnitude: lm.ln() + log_log_w,
        i3_power,
        i3_log_bound,
        markov_step_holds,
    })
}
