//! Transfer-matrix cocycle `M_n(E) = T_n ⋯ T_1` with `T_j = ((E - λv_j, -1), (1, 0))`.
//!
//! Applied to `(ξ_1, ξ_0) = e_1` the product generates the solution of
//! `ξ_{n+1} = (E - λv_n) ξ_n - ξ_{n-1}`, so `⟨M_N e_1, e_1⟩ = det(E - H_N)`.
//!
//! Products are renormalized by powers of two. The scaling is exact in binary
//! floating point, so the accumulated exponent is an integer ledger and results
//! do not depend on how often renormalization happens.

use std::f64::consts::LN_2;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::model::SiteDistribution;
use crate::rng::{streams, sub_seed};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transfer2x2 {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl Transfer2x2 {
    pub const IDENTITY: Self = Self { a: 1.0, b: 0.0, c: 0.0, d: 1.0 };

    pub fn det(&self) -> f64 {
        self.a * self.d - self.b * self.c
    }

    /// `self · rhs`
    pub fn mul(&self, rhs: &Self) -> Self {
        Self {
            a: self.a * rhs.a + self.b * rhs.c,
            b: self.a * rhs.b + self.b * rhs.d,
            c: self.c * rhs.a + self.d * rhs.c,
            d: self.c * rhs.b + self.d * rhs.d,
        }
    }

    pub fn apply(&self, x: [f64; 2]) -> [f64; 2] {
        [self.a * x[0] + self.b * x[1], self.c * x[0] + self.d * x[1]]
    }

    pub fn max_abs(&self) -> f64 {
        self.a.abs().max(self.b.abs()).max(self.c.abs()).max(self.d.abs())
    }

    /// Largest singular value, closed form for 2×2.
    pub fn operator_norm(&self) -> f64 {
        let fro2 = self.a * self.a + self.b * self.b + self.c * self.c + self.d * self.d;
        let det = self.det();
        let disc = (fro2 * fro2 - 4.0 * det * det).max(0.0).sqrt();
        (0.5 * (fro2 + disc)).sqrt()
    }

    fn scaled(&self, s: f64) -> Self {
        Self { a: self.a * s, b: self.b * s, c: self.c * s, d: self.d * s }
    }
}

/// `((E - v, -1), (1, 0))`; `v` is the diagonal entry `λ v_n`.
#[inline]
pub fn one_step(energy: f64, v: f64) -> Transfer2x2 {
    Transfer2x2 { a: energy - v, b: -1.0, c: 1.0, d: 0.0 }
}

/// Exponent `e` with `2^e <= m < 2^{e+1}` for positive finite `m`.
#[inline]
fn binary_exponent(m: f64) -> i32 {
    debug_assert!(m > 0.0 && m.is_finite());
    let bits = (m.to_bits() >> 52) & 0x7ff;
    if bits == 0 {
        // subnormal
        (m.log2().floor()) as i32
    } else {
        bits as i32 - 1023
    }
}

#[inline]
fn pow2(e: i32) -> f64 {
    2f64.powi(e)
}

/// Running product `M_n = 2^{exponent} · current`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CocycleState {
    /// Scaled product; after renormalization its largest entry lies in `[1, 2)`.
    pub current: Transfer2x2,
    /// Accumulated base-2 exponent.
    pub exponent: i64,
    pub step: usize,
}

impl Default for CocycleState {
    fn default() -> Self {
        Self::new()
    }
}

impl CocycleState {
    pub fn new() -> Self {
        Self { current: Transfer2x2::IDENTITY, exponent: 0, step: 0 }
    }

    /// Natural log of the scale factor.
    pub fn log_scale(&self) -> f64 {
        self.exponent as f64 * LN_2
    }

    /// Left-multiplies by `one_step(E, v)` without renormalizing.
    #[inline]
    pub fn advance(&mut self, energy: f64, v: f64) {
        let t = energy - v;
        let m = self.current;
        self.current = Transfer2x2 { a: t * m.a - m.c, b: t * m.b - m.d, c: m.a, d: m.b };
        self.step += 1;
    }

    pub fn renormalize(&mut self) {
        let m = self.current.max_abs();
        if m > 0.0 && m.is_finite() {
            let e = binary_exponent(m);
            self.current = self.current.scaled(pow2(-e));
            self.exponent += e as i64;
        }
    }

    pub fn propagate(&mut self, energy: f64, v: f64) {
        self.advance(energy, v);
        self.renormalize();
    }

    /// `log ‖M_n e_1‖`
    pub fn log_norm_e1(&self) -> f64 {
        self.current.a.hypot(self.current.c).ln() + self.log_scale()
    }

    /// `log ‖M_n‖`
    pub fn log_operator_norm(&self) -> f64 {
        self.current.operator_norm().ln() + self.log_scale()
    }

    /// `M_n / ‖M_n‖`
    pub fn unit_current(&self) -> Transfer2x2 {
        self.current.scaled(1.0 / self.current.operator_norm())
    }

    /// Direction of `M_n e_1`.
    pub fn direction(&self) -> [f64; 2] {
        let r = self.current.a.hypot(self.current.c);
        [self.current.a / r, self.current.c / r]
    }

    /// `|det M_n - 1| / ‖M_n‖²`. The raw determinant of a long hyperbolic
    /// product is lost to cancellation; this normalized drift is what rounding
    /// can actually be held to.
    pub fn det_drift(&self) -> f64 {
        let norm = self.current.operator_norm();
        let target = pow2_i64(-2 * self.exponent);
        (self.current.det() - target).abs() / (norm * norm)
    }

    /// `det M_n` reconstructed from the scaled product (meaningful while `‖M_n‖` stays moderate).
    pub fn det(&self) -> f64 {
        self.current.det() * pow2_i64(2 * self.exponent)
    }
}

fn pow2_i64(e: i64) -> f64 {
    2f64.powi(e.clamp(i32::MIN as i64, i32::MAX as i64) as i32)
}

/// Propagates `e_1` and returns `(u, exponent)` with `M_N e_1 = 2^exponent · u`.
fn propagate_e1(diagonal: impl Iterator<Item = f64>, energy: f64) -> ([f64; 2], i64) {
    let mut u = [1.0, 0.0];
    let mut exponent = 0i64;
    for v in diagonal {
        u = [(energy - v) * u[0] - u[1], u[0]];
        let m = u[0].abs().max(u[1].abs());
        let e = binary_exponent(m);
        if e != 0 {
            let s = pow2(-e);
            u = [u[0] * s, u[1] * s];
            exponent += e as i64;
        }
    }
    (u, exponent)
}

/// Sign and log-magnitude of `⟨M_N(E) e_1, e_1⟩ = det(E - H_N)`.
///
/// The sign is `0` (with log-magnitude `-∞`) only when the entry vanishes exactly.
pub fn char_poly_value(values: &[f64], coupling: f64, energy: f64) -> (i8, f64) {
    let (u, exponent) = propagate_e1(values.iter().map(|v| coupling * v), energy);
    if u[0] == 0.0 {
        return (0, f64::NEG_INFINITY);
    }
    let sign = if u[0] > 0.0 { 1 } else { -1 };
    (sign, u[0].abs().ln() + exponent as f64 * LN_2)
}

/// `log ‖M_N(E) e_1‖`; `0` for an empty potential.
pub fn log_norm(values: &[f64], coupling: f64, energy: f64) -> f64 {
    let (u, exponent) = propagate_e1(values.iter().map(|v| coupling * v), energy);
    u[0].hypot(u[1]).ln() + exponent as f64 * LN_2
}

/// `log ‖M_N(E) e_1‖` from the full matrix product, renormalizing every `interval` steps.
pub fn log_norm_with_interval(values: &[f64], coupling: f64, energy: f64, interval: usize) -> f64 {
    let interval = interval.max(1);
    let mut state = CocycleState::new();
    for (i, v) in values.iter().enumerate() {
        state.advance(energy, coupling * v);
        if (i + 1) % interval == 0 {
            state.renormalize();
        }
    }
    state.renormalize();
    state.log_norm_e1()
}

/// `d/dE log ‖M_N(E) e_1‖` by forward-mode differentiation of the recursion.
///
/// With `u_n = M_n e_1` and `u'_n = T_n u'_{n-1} + (u_{n-1})_1 e_1`, the result
/// is `⟨u_N, u'_N⟩ / ‖u_N‖²`; both vectors share one power-of-two scale.
pub fn log_norm_derivative(values: &[f64], coupling: f64, energy: f64) -> Result<f64> {
    let mut u = [1.0f64, 0.0];
    let mut du = [0.0f64, 0.0];
    for v in values {
        let t = energy - coupling * v;
        let nu = [t * u[0] - u[1], u[0]];
        let ndu = [t * du[0] - du[1] + u[0], du[0]];
        u = nu;
        du = ndu;
        let m = u[0].abs().max(u[1].abs());
        if m == 0.0 || !m.is_finite() {
            return Err(Error::InvalidInput(format!("transfer vector degenerated at E = {energy}")));
        }
        let s = pow2(-binary_exponent(m));
        u = [u[0] * s, u[1] * s];
        du = [du[0] * s, du[1] * s];
    }
    let norm2 = u[0] * u[0] + u[1] * u[1];
    Ok((u[0] * du[0] + u[1] * du[1]) / norm2)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LyapunovEstimate {
    pub gamma: f64,
    pub stderr: f64,
    pub steps: usize,
    pub replicas: usize,
}

/// Potential values for one replica of a transfer-matrix run, drawn on the fly.
fn replica_sites(dist: &SiteDistribution, seed: u64, replica: u64, len: usize) -> impl Iterator<Item = f64> + '_ {
    let coupling = dist.coupling();
    (0..len as u64).map(move |i| coupling * dist.sample_site(seed, replica, i))
}

/// Mean of `log ‖M_steps(E) e_1‖ / steps` over independent replicas.
pub fn lyapunov_exponent(dist: &SiteDistribution, energy: f64, steps: usize, replicas: usize, seed: u64) -> Result<LyapunovEstimate> {
    if steps == 0 || replicas < 2 {
        return Err(Error::InvalidInput("Lyapunov estimate needs steps >= 1 and at least 2 replicas".into()));
    }
    let seed = sub_seed(seed, streams::LYAPUNOV);
    let per: Vec<f64> = (0..replicas as u64)
        .into_par_iter()
        .map(|r| {
            let (u, exponent) = propagate_e1(replica_sites(dist, seed, r, steps), energy);
            (u[0].hypot(u[1]).ln() + exponent as f64 * LN_2) / steps as f64
        })
        .collect();
    let (mean, var) = mean_var(&per);
    Ok(LyapunovEstimate { gamma: mean, stderr: (var / replicas as f64).sqrt(), steps, replicas })
}

fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = if x.len() > 1 { x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    (mean, var)
}

/// `log ‖M_N(E) e_1‖` for realizations `0..r` of the potential stream.
pub fn log_norm_samples(dist: &SiteDistribution, energy: f64, n: usize, r: usize, seed: u64) -> Vec<f64> {
    (0..r as u64)
        .into_par_iter()
        .map(|idx| {
            let (u, exponent) = propagate_e1(replica_sites(dist, seed, idx, n), energy);
            u[0].hypot(u[1]).ln() + exponent as f64 * LN_2
        })
        .collect()
}

/// Fraction of samples with `log ‖M_N e_1‖ > θ γ N`.
pub fn exceedance_fraction(samples: &[f64], theta: f64, gamma: f64, n: usize) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    let cut = theta * gamma * n as f64;
    samples.iter().filter(|&&s| s > cut).count() as f64 / samples.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LargeDeviation {
    pub fraction: f64,
    pub gamma: LyapunovEstimate,
    pub n: usize,
    pub theta: f64,
    pub realizations: usize,
}

/// Fraction of `r` realizations with `log ‖M_N(E0) e_1‖ > θ γ̂ N`, where `γ̂` comes
/// from an independent Lyapunov run of `steps` steps and 32 replicas.
pub fn large_deviation_fraction(
    dist: &SiteDistribution,
    e0: f64,
    n: usize,
    theta: f64,
    r: usize,
    steps: usize,
    seed: u64,
) -> Result<LargeDeviation> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::InvalidInput(format!("threshold fraction must lie in (0, 1), got {theta}")));
    }
    let gamma = lyapunov_exponent(dist, e0, steps, 32, seed)?;
    let samples = log_norm_samples(dist, e0, n, r, seed);
    Ok(LargeDeviation { fraction: exceedance_fraction(&samples, theta, gamma.gamma, n), gamma, n, theta, realizations: r })
}

/// Samples of `‖M_ℓ‖ / ‖M_ℓ ζ‖` for a fixed unit vector `ζ`.
pub fn direction_ratio_samples(dist: &SiteDistribution, energy: f64, ell: usize, r: usize, seed: u64, zeta: [f64; 2]) -> Result<Vec<f64>> {
    if ell == 0 {
        return Err(Error::InvalidInput("ℓ must be at least 1".into()));
    }
    let norm = zeta[0].hypot(zeta[1]);
    if !(norm > 0.0) {
        return Err(Error::InvalidInput("direction must be nonzero".into()));
    }
    let zeta = [zeta[0] / norm, zeta[1] / norm];
    let seed = sub_seed(seed, streams::DIRECTION);
    Ok((0..r as u64)
        .into_par_iter()
        .map(|idx| {
            let mut state = CocycleState::new();
            for v in replica_sites(dist, seed, idx, ell) {
                state.propagate(energy, v);
            }
            // the common scale cancels in the ratio
            let image = state.current.apply(zeta);
            (state.current.operator_norm() / image[0].hypot(image[1])).max(1.0)
        })
        .collect())
}
