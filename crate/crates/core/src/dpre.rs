//! The discrete 2d directed polymer in a Gaussian environment at the critical
//! window.
//!
//! Walks are simple random walks on `ℤ²`. In the rotated coordinates
//! `u = x + y`, `v = x - y` a walk is a pair of independent ±1 walks, which is
//! what every routine here uses: the transfer matrix lives on the lattice
//! `(i, j)` with `u = 2i - n`, `v = 2j - n`, and two walks meet iff both
//! rotated coordinates agree.

use rand::rngs::SmallRng;
use rand::{Rng, RngCore, SeedableRng};
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::rng::{run_batches, Module};
use crate::stats::{ks_distance, mean_and_error, Estimate};
use crate::{Error, Result};

/// Largest horizon accepted by [`compute_r_n`].
pub const MAX_R_N_STEPS: u64 = 10_000_000;

/// Work guard for one transfer-matrix sample, in site updates.
pub const MAX_SITE_UPDATES: f64 = 2e9;

/// `Σ_{n=1}^{N} P(S_n = S'_n)` for two independent walks from the same point.
///
/// The difference of the two walks is, per rotated coordinate, a lazy walk
/// whose return probability `q_n = C(2n, n) 4^{-n}` obeys
/// `q_n = q_{n-1} (2n - 1)/(2n)`; the two coordinates are independent, so
/// `P(S_n = S'_n) = q_n²`.
pub fn compute_r_n(n_steps: u64) -> Result<f64> {
    if n_steps == 0 {
        return Err(Error::Domain("R_N needs N ≥ 1".into()));
    }
    if n_steps > MAX_R_N_STEPS {
        return Err(Error::Resource(format!("R_N limited to N ≤ {MAX_R_N_STEPS}, got {n_steps}")));
    }
    let mut q = 1.0f64;
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for n in 1..=n_steps {
        let k = n as f64;
        q *= (2.0 * k - 1.0) / (2.0 * k);
        // Kahan summation keeps the 1e6-term sum at full precision
        let y = q * q - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    Ok(sum)
}

/// Inverse temperature at the critical window for a horizon `N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CriticalWindow {
    pub n_steps: usize,
    pub theta: f64,
    pub r_n: f64,
    /// `(1/R_N)(1 + θ/ln N)`.
    pub sigma_sq: f64,
    /// `√ln(1 + σ²)`.
    pub beta_n: f64,
}

impl CriticalWindow {
    pub fn new(n_steps: usize, theta: f64) -> Result<Self> {
        if n_steps < 2 {
            return Err(Error::Domain(format!("the window needs N ≥ 2, got {n_steps}")));
        }
        if !theta.is_finite() {
            return Err(Error::Domain("theta must be finite".into()));
        }
        let r_n = compute_r_n(n_steps as u64)?;
        let factor = 1.0 + theta / (n_steps as f64).ln();
        if !(factor > 0.0) {
            return Err(Error::Domain(format!("1 + θ/ln N = {factor} must be positive")));
        }
        let sigma_sq = factor / r_n;
        Ok(Self { n_steps, theta, r_n, sigma_sq, beta_n: sigma_sq.ln_1p().sqrt() })
    }

    /// A window with a prescribed inverse temperature, e.g. `β = 0`.
    pub fn with_beta(n_steps: usize, beta: f64) -> Result<Self> {
        if n_steps < 2 || !(beta >= 0.0) || !beta.is_finite() {
            return Err(Error::Domain(format!("need N ≥ 2 and finite β ≥ 0, got N = {n_steps}, β = {beta}")));
        }
        let r_n = compute_r_n(n_steps as u64)?;
        let sigma_sq = (beta * beta).exp_m1();
        let theta = (sigma_sq * r_n - 1.0) * (n_steps as f64).ln();
        Ok(Self { n_steps, theta, r_n, sigma_sq, beta_n: beta })
    }

    /// `|x|_∞` cutoff of the transfer matrix, `⌊4√N⌋`.
    pub fn half_width(&self) -> usize {
        (4.0 * (self.n_steps as f64).sqrt()).floor() as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PolymerSample {
    /// Point-to-plane partition function from the origin.
    pub partition_value: f64,
    /// Key of the disorder field this sample was computed from.
    pub seed: u64,
    pub n_steps: usize,
}

/// Transfer-matrix state restricted to `|u| + |v| ≤ 2K`, i.e. `|x|_∞ ≤ K`.
struct Transfer {
    n_steps: usize,
    reach: usize,
    stride: usize,
    prev: Vec<f64>,
    cur: Vec<f64>,
}

impl Transfer {
    fn new(window: &CriticalWindow) -> Result<Self> {
        let n = window.n_steps;
        let reach = 2 * window.half_width();
        let stride = n.min(reach) + 2;
        let updates = n as f64 * (stride * stride) as f64 / 2.0;
        if updates > MAX_SITE_UPDATES {
            return Err(Error::Resource(format!(
                "{updates:.3e} site updates per sample exceed {MAX_SITE_UPDATES:.0e}"
            )));
        }
        Ok(Self { n_steps: n, reach, stride, prev: vec![0.0; stride * stride], cur: vec![0.0; stride * stride] })
    }

    /// Lowest index of the bounding box at time `n`.
    fn low(&self, n: usize) -> usize {
        n.saturating_sub(self.reach).div_ceil(2)
    }

    fn high(&self, n: usize) -> usize {
        n.min((n + self.reach) / 2)
    }

    fn columns(&self, n: usize, i: usize) -> Option<(usize, usize)> {
        columns(self.reach, n, i)
    }

    /// Runs the recursion; `weights(n, i, jlo, out)` fills the site weights of
    /// row `i` at time `n` for columns `jlo..jlo + out.len()`.
    fn run(&mut self, mut weights: impl FnMut(usize, usize, usize, &mut [f64])) -> f64 {
        let s = self.stride;
        let reach = self.reach;
        self.prev[0] = 1.0;
        let mut row_weights = vec![0.0; s];
        for n in 1..=self.n_steps {
            let (plo, phi) = (self.low(n - 1), self.high(n - 1));
            let (lo, hi) = (self.low(n), self.high(n));
            for i in lo..=hi {
                let Some((jlo, jhi)) = columns(reach, n, i) else { continue };
                let base = (i - lo) * s;
                let row = &mut self.cur[base + jlo - lo..=base + jhi - lo];
                row.fill(0.0);
                for pi in [i.wrapping_sub(1), i] {
                    if pi < plo || pi > phi {
                        continue;
                    }
                    let Some((pjlo, pjhi)) = columns(reach, n - 1, pi) else { continue };
                    let src = &self.prev[(pi - plo) * s..];
                    // column j receives prev columns j (v - 1) and j - 1 (v + 1)
                    for shift in 0..2 {
                        let (a, b) = (jlo.max(pjlo + shift), jhi.min(pjhi + shift));
                        if a > b {
                            continue;
                        }
                        let from = &src[a - shift - plo..=b - shift - plo];
                        for (x, y) in row[a - jlo..=b - jlo].iter_mut().zip(from) {
                            *x += y;
                        }
                    }
                }
                let w = &mut row_weights[..=jhi - jlo];
                weights(n, i, jlo, w);
                for (x, w) in row.iter_mut().zip(w.iter()) {
                    *x *= 0.25 * w;
                }
            }
            std::mem::swap(&mut self.prev, &mut self.cur);
        }
        let (lo, hi) = (self.low(self.n_steps), self.high(self.n_steps));
        let mut total = 0.0;
        for i in lo..=hi {
            if let Some((jlo, jhi)) = self.columns(self.n_steps, i) {
                let base = (i - lo) * s;
                total += self.prev[base + jlo - lo..=base + jhi - lo].iter().sum::<f64>();
            }
        }
        self.prev.fill(0.0);
        total
    }
}

/// Columns of row `i` inside the diamond `|u| + |v| ≤ reach` at time `n`.
fn columns(reach: usize, n: usize, i: usize) -> Option<(usize, usize)> {
    let u = (2 * i).abs_diff(n);
    if u > reach || i > n {
        return None;
    }
    let room = (reach - u).min(n);
    // |2j - n| ≤ room
    let lo = (n - room).div_ceil(2);
    let hi = (n + room) / 2;
    (lo <= hi).then_some((lo, hi))
}

/// Free-walk mass kept by the truncation; `1 - free_mass` bounds the
/// discarded tail.
pub fn truncated_free_mass(window: &CriticalWindow) -> Result<f64> {
    Ok(Transfer::new(window)?.run(|_, _, _, w| w.fill(1.0)))
}

fn row_key(key: u64, n: usize, i: usize) -> u64 {
    key ^ ((n as u64) << 40) ^ ((i as u64) << 20)
}

/// One point-to-plane partition function for the disorder field `key`,
/// normalised by the truncated free mass so that `β = 0` gives exactly 1.
fn partition_one(transfer: &mut Transfer, window: &CriticalWindow, key: u64, free_mass: f64) -> f64 {
    let beta = window.beta_n;
    if beta == 0.0 {
        return transfer.run(|_, _, _, w| w.fill(1.0)) / free_mass;
    }
    let shift = -0.5 * beta * beta;
    let z = transfer.run(|n, i, _, w| {
        // disorder of row (n, i), drawn lazily from its own stream
        let mut rng = SmallRng::seed_from_u64(row_key(key, n, i));
        for x in w.iter_mut() {
            let omega: f64 = rng.sample(StandardNormal);
            *x = (beta * omega + shift).exp();
        }
    });
    z / free_mass
}

/// Samples per parallel batch of transfer-matrix runs.
const POLYMER_BATCH: usize = 8;

pub fn simulate_partition(window: &CriticalWindow, samples: usize, seed: u64) -> Result<Vec<PolymerSample>> {
    let free_mass = truncated_free_mass(window)?;
    log::info!(
        "N = {}: |x|_inf <= {} keeps free mass {free_mass:.17}, tail {:.3e}",
        window.n_steps,
        window.half_width(),
        1.0 - free_mass
    );
    let batches = run_batches(samples, POLYMER_BATCH, seed, Module::Polymer, 0, |rng, _, count| {
        let mut transfer = Transfer::new(window)?;
        (0..count)
            .map(|_| {
                let key = rng.next_u64();
                let partition_value = partition_one(&mut transfer, window, key, free_mass);
                Ok(PolymerSample { partition_value, seed: key, n_steps: window.n_steps })
            })
            .collect::<Result<Vec<_>>>()
    });
    let mut out = Vec::with_capacity(samples);
    for b in batches {
        out.extend(b?);
    }
    Ok(out)
}

/// Collision count of two independent walks over steps `1..=n`.
///
/// The rotated difference performs, per coordinate, the lazy step `a - b` for
/// fair bits `a, b`; one 64-bit word drives 16 steps.
fn pair_collisions<R: RngCore>(n: usize, rng: &mut R) -> u32 {
    let (mut du, mut dv) = (0i32, 0i32);
    let mut count = 0;
    let mut bits = 0u64;
    for step in 0..n {
        if step % 16 == 0 {
            bits = rng.next_u64();
        }
        du += (bits & 1) as i32 - ((bits >> 1) & 1) as i32;
        dv += ((bits >> 2) & 1) as i32 - ((bits >> 3) & 1) as i32;
        bits >>= 4;
        count += u32::from(du == 0 && dv == 0);
    }
    count
}

/// Total pairwise collision count `Σ_{i<j} I_ij` of `h` independent walks.
fn group_collisions<R: RngCore>(h: usize, n: usize, rng: &mut R, pos: &mut [(i32, i32)]) -> u32 {
    pos.fill((0, 0));
    let mut count = 0;
    for _ in 0..n {
        let bits = rng.next_u64();
        for (k, p) in pos.iter_mut().enumerate() {
            let b = bits >> (2 * k);
            p.0 += if b & 1 == 1 { 1 } else { -1 };
            p.1 += if b & 2 == 2 { 1 } else { -1 };
        }
        for a in 0..h {
            for b in a + 1..h {
                count += u32::from(pos[a] == pos[b]);
            }
        }
    }
    count
}

#[derive(Debug, Clone, Serialize)]
pub struct CollisionLaw {
    pub n_steps: usize,
    /// `π I_N / ln N` per sample, in sampling order.
    pub scaled: Vec<f64>,
    pub ks_distance: f64,
    /// KS distance of `π (I_N + U)/ln N`, `U` uniform on `[0, 1)`, which
    /// removes the lattice atoms of the raw law.
    pub ks_distance_smoothed: f64,
    pub mean: Estimate,
}

/// Empirical law of `π I_N / ln N` against its `Exp(1)` limit.
pub fn collision_law(n_steps: usize, samples: usize, seed: u64) -> Result<CollisionLaw> {
    if n_steps < 1000 {
        return Err(Error::Domain(format!("the collision law is sampled for N ≥ 1000, got {n_steps}")));
    }
    if samples < 2 {
        return Err(Error::Domain("at least two samples are needed".into()));
    }
    let scale = std::f64::consts::PI / (n_steps as f64).ln();
    let batches = run_batches(samples, 256, seed, Module::Collisions, 0, |rng, _, count| {
        (0..count)
            .map(|_| {
                let k = f64::from(pair_collisions(n_steps, rng));
                (k * scale, (k + rng.random::<f64>()) * scale)
            })
            .collect::<Vec<_>>()
    });
    let (scaled, smoothed): (Vec<f64>, Vec<f64>) = batches.into_iter().flatten().unzip();
    let cdf = |x: f64| if x <= 0.0 { 0.0 } else { -(-x).exp_m1() };
    Ok(CollisionLaw {
        n_steps,
        ks_distance: ks_distance(&scaled, cdf),
        ks_distance_smoothed: ks_distance(&smoothed, cdf),
        mean: mean_and_error(&scaled),
        scaled,
    })
}

/// Largest moment order accepted by [`dpre_moment`].
pub const MAX_MOMENT_ORDER: usize = 4;

#[derive(Debug, Clone, Serialize)]
pub struct DpreMoment {
    pub h: usize,
    pub window: CriticalWindow,
    /// Mean of `Z^h` over disorder samples.
    pub direct: Estimate,
    /// Mean of `exp(β² Σ_{i<j} I_ij)` over independent walks.
    pub collision: Estimate,
    pub direct_samples: usize,
    pub walk_samples: usize,
}

impl DpreMoment {
    pub fn difference_sigmas(&self) -> f64 {
        let sigma = self.direct.std_error.hypot(self.collision.std_error);
        let diff = (self.direct.value - self.collision.value).abs();
        if diff == 0.0 {
            0.0
        } else {
            diff / sigma
        }
    }

    pub fn agree_within(&self, sigmas: f64) -> bool {
        self.difference_sigmas() <= sigmas
    }

    /// Either estimate has a relative standard error above 50%.
    pub fn diverging(&self) -> bool {
        self.direct.relative_error() > 0.5 || self.collision.relative_error() > 0.5
    }
}

fn check_order(h: usize) -> Result<()> {
    if h == 0 || h > MAX_MOMENT_ORDER {
        return Err(Error::Domain(format!("moment order must lie in 1..={MAX_MOMENT_ORDER}, got {h}")));
    }
    Ok(())
}

/// Mean of `exp(β² Σ_{i<j} I_ij)` over `samples` groups of `h` walks.
pub fn collision_moment(h: usize, window: &CriticalWindow, samples: usize, seed: u64) -> Result<Estimate> {
    check_order(h)?;
    if h == 1 {
        return Ok(Estimate::exact(1.0));
    }
    let b2 = window.beta_n * window.beta_n;
    let n = window.n_steps;
    let batches = run_batches(samples, 1024, seed, Module::PolymerMoment, h as u32, |rng, _, count| {
        let mut pos = vec![(0, 0); h];
        (0..count)
            .map(|_| {
                let k = if h == 2 { pair_collisions(n, rng) } else { group_collisions(h, n, rng, &mut pos) };
                (b2 * f64::from(k)).exp()
            })
            .collect::<Vec<_>>()
    });
    let values: Vec<f64> = batches.into_iter().flatten().collect();
    Ok(mean_and_error(&values))
}

/// `E[Z^h]` by direct simulation of `direct_samples` disorder fields and by
/// the collision representation over `walk_samples` walk groups.
///
/// For `h = 1` both are exact: `E[Z] = 1` by the normalisation of the
/// disorder, and the collision sum is empty.
pub fn dpre_moment_with(
    h: usize,
    window: &CriticalWindow,
    direct_samples: usize,
    walk_samples: usize,
    seed: u64,
) -> Result<DpreMoment> {
    check_order(h)?;
    let (direct, collision) = if h == 1 {
        (Estimate::exact(1.0), Estimate::exact(1.0))
    } else {
        let zs = simulate_partition(window, direct_samples, seed)?;
        let powers: Vec<f64> = zs.iter().map(|s| s.partition_value.powi(h as i32)).collect();
        (mean_and_error(&powers), collision_moment(h, window, walk_samples, seed)?)
    };
    let out = DpreMoment { h, window: *window, direct, collision, direct_samples, walk_samples };
    if out.diverging() {
        log::warn!("E[Z^{h}] at N = {}: relative standard error above 50%", window.n_steps);
    }
    Ok(out)
}

pub fn dpre_moment(h: usize, window: &CriticalWindow, samples: usize, seed: u64) -> Result<DpreMoment> {
    dpre_moment_with(h, window, samples, samples, seed)
}

/// `E[exp(β² (I_12 + I_13 + I_23))]` against `E[exp(β² I)]³`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CorrelationCheck {
    pub triple: Estimate,
    pub pair: Estimate,
    pub product: Estimate,
}

impl CorrelationCheck {
    pub fn holds_within(&self, sigmas: f64) -> bool {
        self.triple.value - self.product.value + sigmas * self.triple.std_error.hypot(self.product.std_error) >= 0.0
    }
}

pub fn correlation_check(window: &CriticalWindow, samples: usize, seed: u64) -> Result<CorrelationCheck> {
    let triple = collision_moment(3, window, samples, seed)?;
    let pair = collision_moment(2, window, samples, seed)?;
    let cube = pair.value.powi(3);
    let product = Estimate { value: cube, std_error: 3.0 * pair.value * pair.value * pair.std_error };
    Ok(CorrelationCheck { triple, pair, product })
}

/// Exact `E[Z²] = E[(1 + σ²)^{I_N}]` by the renewal recursion
/// `U(n) = σ² p_n + σ² Σ_{k<n} p_{n-k} U(k)`, `E[Z²] = 1 + Σ_{n ≤ N} U(n)`.
pub fn second_moment_exact(window: &CriticalWindow) -> f64 {
    let n = window.n_steps;
    let mut p = Vec::with_capacity(n + 1);
    p.push(1.0);
    let mut q = 1.0f64;
    for k in 1..=n {
        q *= (2.0 * k as f64 - 1.0) / (2.0 * k as f64);
        p.push(q * q);
    }
    let s2 = window.sigma_sq;
    let mut u = vec![0.0; n + 1];
    for m in 1..=n {
        let conv: f64 = (1..m).map(|k| p[m - k] * u[k]).sum();
        u[m] = s2 * (p[m] + conv);
    }
    1.0 + u.iter().sum::<f64>()
}
