//! Numerical laboratory for the moment structure of the critical 2d
//! stochastic heat flow.
//!
//! The crate is organised bottom-up:
//!
//! * [`special`] – heat kernel, the Dickman renewal density `G_θ` and its
//!   primitive.
//! * [`diagrams`] – collision patterns, parent maps and gap profiles.
//! * [`graph`] – weighted graphs, Laplacians, the Matrix-Tree theorem, planar
//!   Gaussian free field partition functions and harmonic extensions.
//! * [`moment`] – Feynman graphs built from (pattern, times), the closed-form
//!   spatial integrals and Monte Carlo estimates of moments and kernels.
//! * [`bounds`] – the inequality chain behind the moment lower bound, the
//!   tail envelopes and the nested denominator integral.
//! * [`dpre`] – the discrete directed polymer at the critical window.
//! * [`cli`] – the `shf-lab` command-line front end.
//!
//! Everything is deterministic for a fixed seed: random streams are keyed by
//! `(seed, module, batch)` and merged in batch order.

pub mod bounds;
pub mod cli;
pub mod diagrams;
pub mod dpre;
mod error;
pub mod graph;
pub mod moment;
pub mod quad;
pub mod rng;
pub mod special;
pub mod stats;

pub use error::{Error, Result};
