//! Ensemble spectral functions: integrated density of states and its
//! derivative, localization profiles and box restrictions, spectral averaging,
//! Wronskians of eigenvector pairs, and the boundary-small eigenpair event.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::model::{sample_operator, DistKind, SiteDistribution, TridiagonalOperator};
use crate::rng::{streams, sub_seed, CounterRng};
use crate::stats::{self, Interval, LineFit};
use crate::tridiag::{self, EigenPair};
use crate::{Error, Result};

/// Monte Carlo integrated density of states on an energy grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdsEstimate {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub stderr: Vec<f64>,
    pub n: usize,
    pub realizations: usize,
    pub seed: u64,
    /// Per-realization normalized counting functions, kept for derived estimates.
    #[serde(skip)]
    pub samples: Vec<Vec<f64>>,
}

pub fn estimate_ids(dist: &SiteDistribution, n: usize, grid: &[f64], r: usize, seed: u64) -> Result<IdsEstimate> {
    if r == 0 {
        return Err(Error::InvalidInput("need at least one realization".into()));
    }
    if grid.windows(2).any(|w| !(w[0] <= w[1])) {
        return Err(Error::InvalidInput("energy grid must be sorted".into()));
    }
    let samples: Vec<Vec<f64>> = (0..r as u64)
        .into_par_iter()
        .map(|idx| {
            let op = sample_operator(dist, n, seed, idx)?;
            Ok(tridiag::sturm_counts(&op, grid).into_iter().map(|c| c as f64 / n as f64).collect())
        })
        .collect::<Result<_>>()?;
    let (values, stderr) = stats::column_means(&samples, None);
    Ok(IdsEstimate { grid: grid.to_vec(), values, stderr, n, realizations: r, seed, samples })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DosEstimate {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub stderr: Vec<f64>,
    pub bandwidth: f64,
    /// Largest magnitude removed by clipping negative values at zero.
    pub clipped: f64,
}

/// Triangular-kernel weight `(h - |u|)₊ / h²`, which integrates to one.
#[inline]
pub fn triangular_kernel(u: f64, h: f64) -> f64 {
    ((h - u.abs()) / (h * h)).max(0.0)
}

/// Density of states from an IDS estimate: the IDS increments between grid
/// points are spread with a triangular kernel of half-width `h`.
pub fn estimate_dos(ids: &IdsEstimate, h: f64) -> Result<DosEstimate> {
    let g = &ids.grid;
    if g.len() < 2 {
        return Err(Error::InvalidInput("DOS needs at least two grid points".into()));
    }
    let spacing = g.windows(2).map(|w| w[1] - w[0]).fold(0.0f64, f64::max);
    if !(h >= 2.0 * spacing * (1.0 - 1e-9)) {
        return Err(Error::InvalidInput(format!("bandwidth {h} is below twice the grid spacing {spacing}")));
    }
    let mids: Vec<f64> = g.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    let smooth = |ids_values: &[f64]| -> Vec<f64> {
        g.iter()
            .map(|&e| {
                mids.iter()
                    .enumerate()
                    .map(|(i, &m)| triangular_kernel(e - m, h) * (ids_values[i + 1] - ids_values[i]))
                    .sum()
            })
            .collect()
    };
    let per: Vec<Vec<f64>> = if ids.samples.is_empty() {
        vec![smooth(&ids.values)]
    } else {
        ids.samples.par_iter().map(|s| smooth(s)).collect()
    };
    let (mut values, mut stderr) = stats::column_means(&per, None);
    if ids.samples.is_empty() {
        stderr.iter_mut().for_each(|s| *s = 0.0);
    }
    let mut clipped = 0.0f64;
    for v in values.iter_mut() {
        if *v < 0.0 {
            clipped = clipped.max(-*v);
            *v = 0.0;
        }
    }
    Ok(DosEstimate { grid: g.clone(), values, stderr, bandwidth: h, clipped })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointDos {
    pub energy: f64,
    pub value: f64,
    pub stderr: f64,
    pub bandwidth: f64,
    pub n: usize,
    pub realizations: usize,
}

/// `k̂(E) = 𝔼[(1/N) Σ_k K_h(E - E_k)]` with the triangular kernel: the same
/// smoothing as [`estimate_dos`] evaluated exactly from the eigenvalues near `E`.
pub fn local_dos(dist: &SiteDistribution, n: usize, energy: f64, h: f64, r: usize, seed: u64, rel_tol: f64) -> Result<PointDos> {
    if !(h > 0.0) || r == 0 {
        return Err(Error::InvalidInput("local DOS needs h > 0 and r >= 1".into()));
    }
    let per: Vec<f64> = (0..r as u64)
        .into_par_iter()
        .map(|idx| {
            let op = sample_operator(dist, n, seed, idx)?;
            let s = tridiag::eigenvalues_in_interval(&op, energy - h, energy + h, rel_tol * op.scale())?;
            Ok(s.eigenvalues.iter().map(|e| triangular_kernel(energy - e, h)).sum::<f64>() / n as f64)
        })
        .collect::<Result<_>>()?;
    Ok(PointDos { energy, value: stats::mean(&per), stderr: stats::stderr(&per), bandwidth: h, n, realizations: r })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HolderFit {
    pub gamma: f64,
    pub ci: Option<Interval>,
    pub deltas: Vec<f64>,
    /// `sup_E 𝒩_N([E - δ, E + δ))` per δ.
    pub sup_mass: Vec<f64>,
    pub stderr: Vec<f64>,
    pub realizations: usize,
}

/// Fits `log sup_E 𝒩([E - δ, E + δ))` against `log δ`; the sup runs over
/// `points` energies spread evenly over `window`.
pub fn holder_exponent_of_ids(
    dist: &SiteDistribution,
    n: usize,
    window: (f64, f64),
    points: usize,
    deltas: &[f64],
    r: usize,
    seed: u64,
) -> Result<HolderFit> {
    let (lo, hi) = window;
    if !(lo < hi) || points < 2 {
        return Err(Error::InvalidInput("window must satisfy lo < hi with at least 2 points".into()));
    }
    let energies: Vec<f64> = (0..points).map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64).collect();
    let mut shifts = Vec::with_capacity(2 * points * deltas.len());
    for &d in deltas {
        for &e in &energies {
            shifts.push(e - d);
            shifts.push(e + d);
        }
    }
    // per realization: masses for every (δ, E)
    let per: Vec<Vec<f64>> = (0..r as u64)
        .into_par_iter()
        .map(|idx| {
            let op = sample_operator(dist, n, seed, idx)?;
            let c = tridiag::sturm_counts(&op, &shifts);
            Ok(c.chunks(2).map(|p| (p[1] - p[0]) as f64 / n as f64).collect())
        })
        .collect::<Result<_>>()?;

    let sup_of = |mult: Option<&[u32]>| -> (Vec<f64>, Vec<f64>) {
        let (mean, se) = stats::column_means(&per, mult);
        let mut sup = Vec::with_capacity(deltas.len());
        let mut sup_se = Vec::with_capacity(deltas.len());
        for chunk in 0..deltas.len() {
            let range = chunk * points..(chunk + 1) * points;
            let (arg, &m) = mean[range.clone()].iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap();
            sup.push(m);
            sup_se.push(se[range.start + arg]);
        }
        (sup, sup_se)
    };
    let (sup_mass, stderr) = sup_of(None);
    let fit = stats::loglog_slope(deltas, &sup_mass, &stderr, r)?;
    if !(fit.slope > 0.0 && fit.slope <= 1.05) {
        return Err(Error::DegenerateFit(format!(
            "IDS Hölder slope {:.4} lies outside (0, 1.05]; masses {:?}",
            fit.slope, sup_mass
        )));
    }
    // basic bootstrap interval, reflected about the estimate
    let ci = stats::bootstrap_interval(r, 1000, sub_seed(seed, streams::BOOTSTRAP), 0.95, |m| {
        let (s, se) = sup_of(Some(m));
        stats::loglog_slope(deltas, &s, &se, r).ok().map(|f| f.slope)
    })
    .map(|c| Interval { lo: 2.0 * fit.slope - c.hi, hi: 2.0 * fit.slope - c.lo });
    Ok(HolderFit { gamma: fit.slope, ci, deltas: deltas.to_vec(), sup_mass, stderr, realizations: r })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalizationProfile {
    pub energy: f64,
    pub center: usize,
    /// Exponential decay rate per site; `+∞` when the tail is identically zero.
    pub decay_rate: f64,
    pub onset_radius: usize,
    pub tail_max: f64,
    /// Total decay across the system below `e²`.
    pub delocalized: bool,
}

/// Exponential decay fit of `log |ξ_n|` against `|n - center|` outside
/// `onset_factor · ln N` sites. Entries at the rounding floor are ignored.
pub fn localization_profile(pair: &EigenPair, onset_factor: f64) -> LocalizationProfile {
    let n = pair.vector.len();
    let onset = (onset_factor * (n as f64).ln()).round().max(0.0) as usize;
    let c = pair.center;
    let peak = pair.vector.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let floor = 1e-12 * peak;
    let mut tail_max = 0.0f64;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (i, v) in pair.vector.iter().enumerate() {
        let dist = i.abs_diff(c);
        if dist > onset {
            tail_max = tail_max.max(v.abs());
            if v.abs() > floor {
                xs.push(dist as f64);
                ys.push(v.abs().ln());
            }
        }
    }
    let decay_rate = if tail_max == 0.0 {
        f64::INFINITY
    } else {
        match stats::ordinary_line(&xs, &ys) {
            Ok(f) => (-f.slope).max(0.0),
            // all surviving tail entries sit at one distance: decay unresolvable
            Err(_) => 0.0,
        }
    };
    LocalizationProfile {
        energy: pair.energy,
        center: c,
        decay_rate,
        onset_radius: onset,
        tail_max,
        delocalized: decay_rate * n as f64 <= 2.0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxResidual {
    pub residual: f64,
    pub boundary_mass: f64,
}

/// Restricts an eigenvector of `op` to `sites` and measures how nearly it is an
/// eigenvector of the restricted operator.
pub fn box_restriction_residual(pair: &EigenPair, op: &TridiagonalOperator, sites: std::ops::Range<usize>) -> Result<BoxResidual> {
    if sites.start >= sites.end || sites.end > op.n() || pair.vector.len() != op.n() {
        return Err(Error::InvalidInput(format!("box {sites:?} does not fit an operator of size {}", op.n())));
    }
    let inside = &pair.vector[sites.clone()];
    let mass = inside.iter().map(|v| v * v).sum::<f64>().sqrt();
    if mass < 1e-6 {
        return Err(Error::InvalidInput(format!("box {sites:?} carries only {mass:e} of the eigenvector")));
    }
    let outside = pair.vector[..sites.start].iter().chain(&pair.vector[sites.end..]).map(|v| v * v).sum::<f64>().sqrt();
    let restricted = op.restrict(sites)?;
    let x: Vec<f64> = inside.iter().map(|v| v / mass).collect();
    Ok(BoxResidual { residual: restricted.residual_norm(pair.energy, &x), boundary_mass: outside })
}

/// Distance from `energy` to the nearest eigenvalue of `op`.
pub fn spectrum_distance(op: &TridiagonalOperator, energy: f64, tol: f64) -> Result<f64> {
    let below = tridiag::sturm_count(op, energy);
    let mut best = f64::INFINITY;
    if below > 0 {
        best = best.min((energy - tridiag::kth_eigenvalue(op, below - 1, tol)?).abs());
    }
    if below < op.n() {
        best = best.min((tridiag::kth_eigenvalue(op, below, tol)? - energy).abs());
    }
    Ok(best)
}

/// `⟨δ_j, X_I(H) δ_j⟩ = Σ_{E_k ∈ I} ξ_k(j)²`
pub fn local_spectral_weight(op: &TridiagonalOperator, site: usize, lo: f64, hi: f64, tol: f64) -> Result<f64> {
    let slice = tridiag::eigenvalues_in_interval(op, lo, hi, tol)?;
    let pairs = tridiag::eigenpairs(op, &slice.eigenvalues)?;
    Ok(pairs.iter().map(|p| p.vector[site] * p.vector[site]).sum())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralAverage {
    pub estimate: f64,
    pub stderr: f64,
    pub per_realization: Vec<f64>,
}

/// Monte Carlo `𝔼_{v_j} ⟨δ_j, X_I(H) δ_j⟩` with all other sites frozen per outer
/// realization; `inner` draws of `v_j` per realization.
#[allow(clippy::too_many_arguments)]
pub fn spectral_average(
    dist: &SiteDistribution,
    n: usize,
    site: usize,
    lo: f64,
    hi: f64,
    r: usize,
    inner: usize,
    seed: u64,
) -> Result<SpectralAverage> {
    if site >= n || r == 0 || inner == 0 || !(lo <= hi) {
        return Err(Error::InvalidInput("spectral average needs site < N, r, inner >= 1 and lo <= hi".into()));
    }
    let inner_seed = sub_seed(seed, streams::INNER_SITE);
    let per: Vec<f64> = (0..r as u64)
        .into_par_iter()
        .map(|idx| {
            let base = sample_operator(dist, n, seed, idx)?;
            let tol = tridiag::default_tol(&base);
            let mut acc = 0.0;
            for q in 0..inner as u64 {
                let v = dist.sample_site(inner_seed, idx, q);
                let op = base.with_site(site, dist.coupling() * v);
                acc += local_spectral_weight(&op, site, lo, hi, tol)?;
            }
            Ok(acc / inner as f64)
        })
        .collect::<Result<_>>()?;
    Ok(SpectralAverage { estimate: stats::mean(&per), stderr: stats::stderr(&per), per_realization: per })
}

/// Exact `𝔼_{v_j}⟨δ_j, X_I(H)δ_j⟩` for a uniform site law with the other sites
/// fixed by `op`: each eigenvalue branch `E_k(v)` increases with
/// `dE_k/dv = λ ξ_k(j)²`, so the average is
/// `Σ_k |[E_k(λa), E_k(λb)] ∩ I| / (λ (b - a))`.
pub fn spectral_average_uniform_exact(op: &TridiagonalOperator, dist: &SiteDistribution, site: usize, lo: f64, hi: f64) -> Result<f64> {
    let DistKind::Uniform { a, b } = dist.kind() else {
        return Err(Error::InvalidInput("exact spectral average needs a uniform law".into()));
    };
    let lam = dist.coupling();
    if !(b > a) || lam == 0.0 {
        return Err(Error::InvalidInput("exact spectral average needs a nondegenerate law".into()));
    }
    let (d_lo, d_hi) = if lam > 0.0 { (lam * a, lam * b) } else { (lam * b, lam * a) };
    let low = op.with_site(site, d_lo);
    let high = op.with_site(site, d_hi);
    let tol = 1e-14 * high.scale();
    let e_lo = tridiag::full_spectrum(&low, tol)?;
    let e_hi = tridiag::full_spectrum(&high, tol)?;
    let covered: f64 = e_lo.iter().zip(&e_hi).map(|(&x, &y)| (y.min(hi) - x.max(lo)).max(0.0)).sum();
    Ok(covered / (d_hi - d_lo))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WronskianDiagnostic {
    /// `W[0] = 0` and `W[n + 1] = ξ'_n ξ_{n+1} - ξ_n ξ'_{n+1}` with `ξ_N = 0`.
    pub w: Vec<f64>,
    /// `D_n = ξ'_ν ξ_n - ξ_ν ξ'_n` with `ν` the first pair's centre.
    pub d: Vec<f64>,
    pub total_variation: f64,
    /// `max_n |W[n+1] - W[n] - (E - E') ξ_n ξ'_n|`
    pub max_identity_violation: f64,
    pub energy_gap: f64,
}

pub fn wronskian_check(pair: &EigenPair, other: &EigenPair) -> Result<WronskianDiagnostic> {
    let x = &pair.vector;
    let y = &other.vector;
    if x.len() != y.len() || x.is_empty() {
        return Err(Error::InvalidInput("eigenvectors differ in length".into()));
    }
    let n = x.len();
    let at = |v: &[f64], i: usize| if i < n { v[i] } else { 0.0 };
    let mut w = Vec::with_capacity(n + 1);
    w.push(0.0);
    for i in 0..n {
        w.push(y[i] * at(x, i + 1) - x[i] * at(y, i + 1));
    }
    let gap = pair.energy - other.energy;
    let mut tv = 0.0;
    let mut worst = 0.0f64;
    for i in 0..n {
        let step = w[i + 1] - w[i];
        tv += step.abs();
        worst = worst.max((step - gap * x[i] * y[i]).abs());
    }
    let nu = pair.center;
    let d = (0..n).map(|i| y[nu] * x[i] - x[nu] * y[i]).collect();
    Ok(WronskianDiagnostic { w, d, total_variation: tv, max_identity_violation: worst, energy_gap: gap.abs() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventProbability {
    pub deltas: Vec<f64>,
    pub probability: Vec<f64>,
    pub stderr: Vec<f64>,
    /// 0/1 indicators per realization and δ.
    #[serde(skip)]
    pub indicators: Vec<Vec<f64>>,
}

/// Fraction of realizations of `H_M` with an eigenpair satisfying
/// `|E_j - E| < δ`, `|ξ_0| < δ` and `|ξ_{M-1}| < δ`, for each δ.
pub fn boundary_small_eigenpair_probability(dist: &SiteDistribution, m: usize, energy: f64, deltas: &[f64], r: usize, seed: u64) -> Result<EventProbability> {
    if !matches!(dist.kind(), DistKind::Bernoulli { .. }) {
        return Err(Error::InvalidInput("the boundary-small eigenpair event is defined for Bernoulli laws".into()));
    }
    if deltas.iter().any(|d| !(*d > 0.0)) || r == 0 {
        return Err(Error::InvalidInput("need positive δ values and r >= 1".into()));
    }
    let dmax = deltas.iter().copied().fold(0.0, f64::max);
    let indicators: Vec<Vec<f64>> = (0..r as u64)
        .into_par_iter()
        .map(|idx| {
            let op = sample_operator(dist, m, seed, idx)?;
            let tol = tridiag::default_tol(&op);
            let slice = tridiag::eigenvalues_in_interval(&op, energy - dmax, energy + dmax, tol)?;
            let pairs = tridiag::eigenpairs(&op, &slice.eigenvalues)?;
            Ok(deltas
                .iter()
                .map(|&d| {
                    let hit = pairs.iter().any(|p| {
                        (p.energy - energy).abs() < d && p.vector[0].abs() < d && p.vector[m - 1].abs() < d
                    });
                    hit as u8 as f64
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    let (probability, stderr) = stats::column_means(&indicators, None);
    Ok(EventProbability { deltas: deltas.to_vec(), probability, stderr, indicators })
}

/// Slope of `log P` against `log δ` for an event sweep, with a bootstrap CI.
pub fn event_slope(ev: &EventProbability, seed: u64) -> Result<(LineFit, Option<Interval>)> {
    let r = ev.indicators.len();
    let fit = stats::loglog_slope(&ev.deltas, &ev.probability, &ev.stderr, r)?;
    let ci = stats::bootstrap_interval(r, 1000, sub_seed(seed, streams::BOOTSTRAP), 0.95, |m| {
        let (p, se) = stats::column_means(&ev.indicators, Some(m));
        stats::loglog_slope(&ev.deltas, &p, &se, r).ok().map(|f| f.slope)
    });
    Ok((fit, ci))
}

/// Random start for property runs that need one unit direction.
pub fn random_unit_vector(seed: u64, index: u64) -> [f64; 2] {
    let mut rng = CounterRng::new(seed, streams::DIRECTION, index);
    let t = rng.uniform(0.0, std::f64::consts::TAU);
    [t.cos(), t.sin()]
}
