//! Spectral kernel for symmetric tridiagonal operators with unit off-diagonals.
//!
//! Counting uses the Sturm pivot recursion `q_0 = d_0 - μ`,
//! `q_i = d_i - μ - 1/q_{i-1}`; the number of negative pivots is the number
//! of eigenvalues strictly below `μ`. Eigenvalues come from count-guided
//! bisection, eigenvectors from inverse iteration.

use serde::{Deserialize, Serialize};

use crate::model::TridiagonalOperator;
use crate::rng::{streams, CounterRng};
use crate::{Error, Result};

/// Zero pivots are replaced by `+ZERO_PIVOT_EPS * ‖T‖_∞`, which acts like a
/// shift just below `μ` so an eigenvalue exactly at `μ` is not counted.
pub const ZERO_PIVOT_EPS: f64 = 1.0 / (1u64 << 50) as f64;

/// Default bisection tolerance relative to `‖diag‖_∞ + 2`.
pub const DEFAULT_RELATIVE_TOL: f64 = 1e-13;

/// Pairs closer than this (relative to the operator scale) are treated as a cluster
/// and orthogonalized against each other during inverse iteration.
pub const CLUSTER_GAP: f64 = 1e-10;

/// Eigenvalue, unit eigenvector, residual `‖(H - E) ξ‖₂` and localization centre.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenPair {
    pub energy: f64,
    pub vector: Vec<f64>,
    pub residual: f64,
    /// `argmax_n |ξ_n|`, smallest index on ties.
    pub center: usize,
}

/// Eigenvalues of an operator inside the half-open interval `[lo, hi)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSlice {
    pub lo: f64,
    pub hi: f64,
    pub eigenvalues: Vec<f64>,
    pub count: usize,
}

pub fn default_tol(op: &TridiagonalOperator) -> f64 {
    DEFAULT_RELATIVE_TOL * op.scale()
}

#[inline]
fn pivot_floor(op: &TridiagonalOperator) -> f64 {
    ZERO_PIVOT_EPS * op.scale()
}

/// Number of eigenvalues strictly below `mu`.
pub fn sturm_count(op: &TridiagonalOperator, mu: f64) -> usize {
    minor_sign_changes::<1>(op.diagonal(), &[mu], pivot_floor(op))[0] as usize
}

/// Sturm counts at many shifts, evaluated in independent lanes.
pub fn sturm_counts(op: &TridiagonalOperator, shifts: &[f64]) -> Vec<usize> {
    let mut out = vec![0; shifts.len()];
    sturm_counts_into(op, shifts, &mut out);
    out
}

pub fn sturm_counts_into(op: &TridiagonalOperator, shifts: &[f64], out: &mut [usize]) {
    assert_eq!(shifts.len(), out.len());
    let floor = pivot_floor(op);
    let d = op.diagonal();
    let mut rest = (shifts, out);
    while !rest.0.is_empty() {
        let take = match rest.0.len() {
            n if n >= WIDE => WIDE,
            n if n >= 2 => n.min(NARROW),
            _ => 1,
        };
        let (mus, tail) = rest.0.split_at(take);
        let (dst, dst_tail) = rest.1.split_at_mut(take);
        match take {
            WIDE => copy_counts(&minor_sign_changes::<WIDE>(d, mus.try_into().unwrap(), floor), dst),
            1 => dst[0] = minor_sign_changes::<1>(d, &[mus[0]], floor)[0] as usize,
            _ => {
                let mut lanes = [mus[0]; NARROW];
                lanes[..take].copy_from_slice(mus);
                copy_counts(&minor_sign_changes::<NARROW>(d, &lanes, floor)[..take], dst);
            }
        }
        rest = (tail, dst_tail);
    }
}

fn copy_counts(src: &[u64], dst: &mut [usize]) {
    for (o, c) in dst.iter_mut().zip(src) {
        *o = *c as usize;
    }
}

const WIDE: usize = 32;
const NARROW: usize = 8;

/// Counts negative pivots `q_i = p_i / p_{i-1}` through the leading minors
/// `p_i = (d_i - μ) p_{i-1} - p_{i-2}`, which trades the division per step for
/// a multiply: a sign change between consecutive minors is a negative pivot.
/// The pair `(p_i, p_{i-1})` is rescaled by a power of two every few steps so
/// it neither overflows nor underflows, and a zero minor is replaced by
/// `floor · p_{i-1}` (pivot `floor`). Lanes are independent so the loop
/// vectorizes and pipelines.
fn minor_sign_changes<const L: usize>(d: &[f64], mu: &[f64; L], floor: f64) -> [u64; L] {
    const RESCALE: usize = 8;
    let mut cur = [1.0f64; L];
    let mut prev = [0.0f64; L];
    let mut count = [0u64; L];
    for block in d.chunks(RESCALE) {
        for &di in block {
            for l in 0..L {
                let x = (di - mu[l]) * cur[l] - prev[l];
                let x = if x == 0.0 { floor * cur[l] } else { x };
                count[l] += (x.to_bits() ^ cur[l].to_bits()) >> 63;
                prev[l] = cur[l];
                cur[l] = x;
            }
        }
        for l in 0..L {
            let m = cur[l].abs().max(prev[l].abs());
            // multiply by 2^(1023 - e) where m lies in [2^(e-1023), 2^(e-1022))
            let e = (m.to_bits() >> 52) & 0x7ff;
            let s = f64::from_bits(2046u64.saturating_sub(e).max(1) << 52);
            cur[l] *= s;
            prev[l] *= s;
        }
    }
    count
}

/// `#{E ∈ Spec T : lo <= E < hi}`.
pub fn count_in_interval(op: &TridiagonalOperator, lo: f64, hi: f64) -> usize {
    debug_assert!(lo <= hi, "interval [{lo}, {hi}) is reversed");
    if lo >= hi {
        return 0;
    }
    let c = sturm_counts(op, &[lo, hi]);
    c[1].saturating_sub(c[0])
}

#[derive(Debug, Clone, Copy)]
struct Bracket {
    lo: f64,
    hi: f64,
    c_lo: usize,
    c_hi: usize,
}

/// Count-guided bisection of `[lo, hi)` knowing the counts at both ends.
fn bisect(op: &TridiagonalOperator, root: Bracket, tol: f64) -> Vec<f64> {
    let mut found = Vec::with_capacity(root.c_hi.saturating_sub(root.c_lo));
    let mut active = Vec::new();
    if root.c_hi > root.c_lo {
        active.push(root);
    }
    let mut mids = Vec::new();
    let mut counts = Vec::new();
    let mut next = Vec::new();
    while !active.is_empty() {
        mids.clear();
        next.clear();
        for br in active.drain(..) {
            let width = br.hi - br.lo;
            let mid = br.lo + 0.5 * width;
            let k = br.c_hi - br.c_lo;
            if (k == 1 && width <= tol) || mid <= br.lo || mid >= br.hi {
                // a bracket that cannot be split any further holds a numerically
                // degenerate cluster; its members share the midpoint
                found.extend(std::iter::repeat_n(mid, k));
            } else {
                next.push(br);
                mids.push(mid);
            }
        }
        counts.resize(mids.len(), 0);
        sturm_counts_into(op, &mids, &mut counts);
        for ((br, &mid), &c) in next.iter().zip(&mids).zip(&counts) {
            let c = c.clamp(br.c_lo, br.c_hi);
            if c > br.c_lo {
                active.push(Bracket { lo: br.lo, hi: mid, c_lo: br.c_lo, c_hi: c });
            }
            if br.c_hi > c {
                active.push(Bracket { lo: mid, hi: br.hi, c_lo: c, c_hi: br.c_hi });
            }
        }
    }
    found.sort_by(f64::total_cmp);
    found
}

/// All eigenvalues in `[lo, hi)`, each bracketed to width `tol`.
pub fn eigenvalues_in_interval(op: &TridiagonalOperator, lo: f64, hi: f64, tol: f64) -> Result<SpectrumSlice> {
    if !(tol > 0.0) {
        return Err(Error::InvalidInput(format!("bisection tolerance must be positive, got {tol}")));
    }
    if !(lo <= hi) {
        return Err(Error::InvalidInput(format!("interval [{lo}, {hi}) is reversed")));
    }
    let c = sturm_counts(op, &[lo, hi]);
    let eigenvalues = bisect(op, Bracket { lo, hi, c_lo: c[0], c_hi: c[1].max(c[0]) }, tol);
    Ok(SpectrumSlice { lo, hi, count: eigenvalues.len(), eigenvalues })
}

/// The `k`-th smallest eigenvalue (0-based) to width `tol`.
pub fn kth_eigenvalue(op: &TridiagonalOperator, k: usize, tol: f64) -> Result<f64> {
    if k >= op.n() {
        return Err(Error::InvalidInput(format!("eigenvalue index {k} out of range for N = {}", op.n())));
    }
    let (mut lo, mut hi) = padded_bounds(op, tol);
    while hi - lo > tol {
        let mid = lo + 0.5 * (hi - lo);
        if mid <= lo || mid >= hi {
            break;
        }
        if sturm_count(op, mid) > k {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(lo + 0.5 * (hi - lo))
}

fn padded_bounds(op: &TridiagonalOperator, tol: f64) -> (f64, f64) {
    let (lo, hi) = op.spectral_bounds();
    let pad = tol + 1e-12 * op.scale();
    (lo - pad, hi + pad)
}

/// The whole spectrum in increasing order.
pub fn full_spectrum(op: &TridiagonalOperator, tol: f64) -> Result<Vec<f64>> {
    let (lo, hi) = padded_bounds(op, tol);
    let slice = eigenvalues_in_interval(op, lo, hi, tol)?;
    if slice.count != op.n() {
        return Err(Error::CountMismatch { expected: op.n(), found: slice.count });
    }
    Ok(slice.eigenvalues)
}

/// Smallest gap between consecutive eigenvalues.
pub fn min_spacing(op: &TridiagonalOperator, tol: f64) -> Result<f64> {
    if op.n() < 2 {
        return Err(Error::InvalidInput("min spacing needs N >= 2".into()));
    }
    let spectrum = full_spectrum(op, tol)?;
    let gap = spectrum
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::INFINITY, f64::min);
    if gap <= 2.0 * tol {
        return Err(Error::ToleranceTooCoarse { tol, gap });
    }
    Ok(gap)
}

/// Consecutive eigenvalue pairs `(E, E')` with `E' - E < threshold`.
///
/// Avoids resolving every eigenvalue to `tol`: one batch of about `N` evenly
/// spaced shifts slices the spectrum, slices holding two or more eigenvalues
/// are bisected until each piece isolates one eigenvalue or is narrower than
/// `threshold`, and only candidate windows are resolved to `tol`.
pub fn close_pairs(op: &TridiagonalOperator, threshold: f64, tol: f64) -> Result<Vec<(f64, f64)>> {
    if !(threshold > 0.0) || !(tol > 0.0) {
        return Err(Error::InvalidInput("threshold and tolerance must be positive".into()));
    }
    let (lo, hi) = padded_bounds(op, tol);
    let slices = op.n() + 1;
    let mut edges: Vec<f64> = (0..=slices).map(|i| lo + (hi - lo) * i as f64 / slices as f64).collect();
    edges[slices] = hi;
    let counts = sturm_counts(op, &edges);

    let mut isolated: Vec<Bracket> = Vec::new();
    let mut active: Vec<Bracket> = Vec::new();
    for i in 0..slices {
        let br = Bracket { lo: edges[i], hi: edges[i + 1], c_lo: counts[i], c_hi: counts[i + 1].max(counts[i]) };
        match br.c_hi - br.c_lo {
            0 => {}
            1 => isolated.push(br),
            _ => active.push(br),
        }
    }
    let mut mids = Vec::new();
    let mut mid_counts = Vec::new();
    let mut next = Vec::new();
    while !active.is_empty() {
        mids.clear();
        next.clear();
        for br in active.drain(..) {
            let k = br.c_hi - br.c_lo;
            let mid = br.lo + 0.5 * (br.hi - br.lo);
            if k == 1 || br.hi - br.lo <= threshold || mid <= br.lo || mid >= br.hi {
                isolated.push(br);
            } else {
                next.push(br);
                mids.push(mid);
            }
        }
        mid_counts.resize(mids.len(), 0);
        sturm_counts_into(op, &mids, &mut mid_counts);
        for ((br, &mid), &c) in next.iter().zip(&mids).zip(&mid_counts) {
            let c = c.clamp(br.c_lo, br.c_hi);
            if c > br.c_lo {
                active.push(Bracket { lo: br.lo, hi: mid, c_lo: br.c_lo, c_hi: c });
            }
            if br.c_hi > c {
                active.push(Bracket { lo: mid, hi: br.hi, c_lo: c, c_hi: br.c_hi });
            }
        }
    }
    isolated.sort_by(|a, b| a.lo.total_cmp(&b.lo));

    // A close pair either shares a bracket, or straddles the common edge of two
    // touching nonempty brackets with both members within `threshold` of it.
    // Brackets separated by an empty stretch of width >= threshold cannot
    // hold a close pair between them.
    let mut windows: Vec<(f64, f64)> = Vec::new();
    for br in &isolated {
        if br.c_hi - br.c_lo >= 2 {
            windows.push((br.lo, br.hi));
        }
    }
    // probe the left side first; the right side only matters where the left
    // neighbour sits within `threshold` of the edge
    let mut probe_edges = Vec::new();
    for w in isolated.windows(2) {
        if w[1].lo - w[0].hi < threshold {
            probe_edges.push((w[0].hi, w[1].lo, w[0].c_hi));
        }
    }
    let left: Vec<f64> = probe_edges.iter().map(|&(_, b, _)| b - threshold).collect();
    let left_counts = sturm_counts(op, &left);
    let near: Vec<(f64, f64, usize)> = probe_edges
        .iter()
        .zip(&left_counts)
        .filter(|&(&(_, _, c_edge), &c)| c < c_edge)
        .map(|(&(a, b, _), &c)| (a, b, c))
        .collect();
    let right: Vec<f64> = near.iter().map(|&(a, _, _)| a + threshold).collect();
    let right_counts = sturm_counts(op, &right);
    for (&(a, b, c_left), &c_right) in near.iter().zip(&right_counts) {
        if c_right.saturating_sub(c_left) >= 2 {
            windows.push((b - threshold, a + threshold));
        }
    }
    windows.sort_by(|a, b| a.0.total_cmp(&b.0));
    // merge overlapping windows so no eigenvalue is reported twice
    let mut merged: Vec<(f64, f64)> = Vec::new();
    for w in windows {
        match merged.last_mut() {
            Some(last) if w.0 <= last.1 => last.1 = last.1.max(w.1),
            _ => merged.push(w),
        }
    }
    let mut pairs = Vec::new();
    for (a, b) in merged {
        // extend by the threshold so a partner just outside the window is seen
        let slice = eigenvalues_in_interval(op, a - threshold, b + threshold, tol)?;
        for w in slice.eigenvalues.windows(2) {
            if w[1] - w[0] < threshold {
                pairs.push((w[0], w[1]));
            }
        }
    }
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
    pairs.dedup();
    Ok(pairs)
}

/// Rank-one interlacing: raising site `site` to `tau >= d_site` removes at most
/// one eigenvalue from `[lo, hi)`.
pub fn interlacing_check(op: &TridiagonalOperator, site: usize, tau: f64, lo: f64, hi: f64) -> Result<bool> {
    if site >= op.n() {
        return Err(Error::InvalidInput(format!("site {site} out of range for N = {}", op.n())));
    }
    if !(tau >= op.diagonal()[site]) {
        return Err(Error::InvalidInput(format!("tau = {tau} is below the current diagonal value {}", op.diagonal()[site])));
    }
    let before = count_in_interval(op, lo, hi);
    let after = count_in_interval(&op.with_site(site, tau), lo, hi);
    Ok(before <= after + 1)
}

/// LU factorisation of `T - shift` with partial pivoting (upper bandwidth 2).
struct ShiftedLu {
    sub: Vec<f64>,
    diag: Vec<f64>,
    sup1: Vec<f64>,
    sup2: Vec<f64>,
    swapped: Vec<bool>,
}

impl ShiftedLu {
    fn new(op: &TridiagonalOperator, shift: f64) -> Self {
        let n = op.n();
        let tiny = f64::EPSILON * op.scale();
        let mut diag: Vec<f64> = op.diagonal().iter().map(|d| d - shift).collect();
        let mut sub = vec![1.0f64; n.saturating_sub(1)];
        let mut sup1 = vec![1.0f64; n.saturating_sub(1)];
        let mut sup2 = vec![0.0f64; n.saturating_sub(2)];
        let mut swapped = vec![false; n.saturating_sub(1)];
        for i in 0..n.saturating_sub(1) {
            if diag[i].abs() >= sub[i].abs() {
                if diag[i] == 0.0 {
                    diag[i] = tiny;
                }
                let fact = sub[i] / diag[i];
                sub[i] = fact;
                diag[i + 1] -= fact * sup1[i];
            } else {
                let fact = diag[i] / sub[i];
                diag[i] = sub[i];
                sub[i] = fact;
                let temp = sup1[i];
                sup1[i] = diag[i + 1];
                diag[i + 1] = temp - fact * diag[i + 1];
                if i + 2 < n {
                    sup2[i] = sup1[i + 1];
                    sup1[i + 1] *= -fact;
                }
                swapped[i] = true;
            }
        }
        for d in diag.iter_mut() {
            if d.abs() < tiny {
                *d = if *d < 0.0 { -tiny } else { tiny };
            }
        }
        Self { sub, diag, sup1, sup2, swapped }
    }

    fn solve_in_place(&self, x: &mut [f64]) {
        let n = x.len();
        for i in 0..n.saturating_sub(1) {
            if self.swapped[i] {
                x.swap(i, i + 1);
            }
            x[i + 1] -= self.sub[i] * x[i];
        }
        for i in (0..n).rev() {
            let mut v = x[i];
            if i + 1 < n {
                v -= self.sup1[i] * x[i + 1];
            }
            if i + 2 < n {
                v -= self.sup2[i] * x[i + 2];
            }
            x[i] = v / self.diag[i];
        }
        // rescale to avoid overflow on the next iteration
        let m = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if m > 0.0 && m.is_finite() {
            x.iter_mut().for_each(|v| *v /= m);
        }
    }
}

fn normalize(x: &mut [f64]) -> f64 {
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        x.iter_mut().for_each(|v| *v /= norm);
    }
    norm
}

fn orthogonalize(x: &mut [f64], against: &[&[f64]]) {
    // two passes of classical Gram–Schmidt
    for _ in 0..2 {
        for q in against {
            let dot: f64 = x.iter().zip(q.iter()).map(|(a, b)| a * b).sum();
            x.iter_mut().zip(q.iter()).for_each(|(a, b)| *a -= dot * b);
        }
    }
}

/// `argmax |ξ_n|`, smallest index among entries equal to the maximum up to rounding.
pub fn localization_center(vector: &[f64]) -> usize {
    let max = vector.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let cut = max * (1.0 - 1e-12);
    vector.iter().position(|v| v.abs() >= cut).unwrap_or(0)
}

const MIN_ITERATIONS: usize = 2;
const MAX_ITERATIONS: usize = 6;

/// Inverse iteration at `energy`, keeping the iterate orthogonal to `previous`.
pub fn eigenvector_orthogonal_to(op: &TridiagonalOperator, energy: f64, previous: &[&[f64]]) -> Result<EigenPair> {
    let n = op.n();
    let scale = op.scale();
    let accept = 1e-8 * scale;
    let good_enough = 1e-13 * scale;
    let lu = ShiftedLu::new(op, energy);
    let mut rng = CounterRng::new(n as u64, streams::START_VECTOR, energy.to_bits());
    let mut x: Vec<f64> = (0..n).map(|_| rng.uniform(-1.0, 1.0)).collect();
    orthogonalize(&mut x, previous);
    normalize(&mut x);

    let mut best: Option<EigenPair> = None;
    for iteration in 0..MAX_ITERATIONS {
        lu.solve_in_place(&mut x);
        orthogonalize(&mut x, previous);
        if normalize(&mut x) == 0.0 || x.iter().any(|v| !v.is_finite()) {
            break;
        }
        let hx = op.apply(&x);
        let rayleigh: f64 = hx.iter().zip(&x).map(|(a, b)| a * b).sum();
        let residual = hx
            .iter()
            .zip(&x)
            .map(|(a, b)| {
                let r = a - rayleigh * b;
                r * r
            })
            .sum::<f64>()
            .sqrt();
        if best.as_ref().is_none_or(|b| residual < b.residual) {
            best = Some(EigenPair { energy: rayleigh, vector: x.clone(), residual, center: 0 });
        }
        if iteration + 1 >= MIN_ITERATIONS && residual <= good_enough {
            break;
        }
    }
    match best {
        Some(mut pair) if pair.residual <= accept => {
            pair.center = localization_center(&pair.vector);
            if pair.vector[pair.center] < 0.0 {
                pair.vector.iter_mut().for_each(|v| *v = -*v);
            }
            Ok(pair)
        }
        other => Err(Error::NoConvergence {
            energy,
            best_residual: other.map_or(f64::INFINITY, |p| p.residual),
        }),
    }
}

/// Eigenpair for an eigenvalue estimate `energy`.
pub fn eigenvector(op: &TridiagonalOperator, energy: f64) -> Result<EigenPair> {
    eigenvector_orthogonal_to(op, energy, &[])
}

/// Eigenpairs for sorted eigenvalue estimates; members of a cluster (gaps below
/// [`CLUSTER_GAP`] relative to scale) are orthogonalized against each other.
pub fn eigenpairs(op: &TridiagonalOperator, energies: &[f64]) -> Result<Vec<EigenPair>> {
    let cluster_gap = CLUSTER_GAP * op.scale();
    let mut pairs: Vec<EigenPair> = Vec::with_capacity(energies.len());
    let mut cluster_start = 0;
    for (i, &e) in energies.iter().enumerate() {
        if i > 0 && e - energies[i - 1] >= cluster_gap {
            cluster_start = i;
        }
        let previous: Vec<&[f64]> = pairs[cluster_start..i].iter().map(|p| p.vector.as_slice()).collect();
        let pair = eigenvector_orthogonal_to(op, e, &previous)?;
        pairs.push(pair);
    }
    Ok(pairs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{sample_operator, SiteDistribution};
    use std::f64::consts::PI;

    fn free_eigs(n: usize) -> Vec<f64> {
        let mut e: Vec<f64> = (1..=n).map(|k| 2.0 * (k as f64 * PI / (n as f64 + 1.0)).cos()).collect();
        e.sort_by(f64::total_cmp);
        e
    }

    #[test]
    fn sturm_examples() {
        let op = TridiagonalOperator::free(3).unwrap();
        assert_eq!(sturm_count(&op, 0.0), 1);
        assert_eq!(sturm_count(&op, 3.0), 3);
        assert_eq!(sturm_count(&op, -3.0), 0);
        assert_eq!(count_in_interval(&op, -0.5, 0.5), 1);
        assert_eq!(count_in_interval(&op, 10.0, 11.0), 0);
    }

    #[test]
    fn batched_counts_match_scalar() {
        let dist = SiteDistribution::uniform(-1.0, 1.0).unwrap();
        let op = sample_operator(&dist, 77, 5, 0).unwrap();
        let shifts: Vec<f64> = (0..37).map(|i| -3.5 + 0.19 * i as f64).collect();
        let batched = sturm_counts(&op, &shifts);
        for (mu, c) in shifts.iter().zip(batched) {
            assert_eq!(c, sturm_count(&op, *mu));
        }
    }

    #[test]
    fn free_spectrum() {
        let op = TridiagonalOperator::free(3).unwrap();
        let tol = 1e-12;
        let spec = full_spectrum(&op, tol).unwrap();
        let want = [-2f64.sqrt(), 0.0, 2f64.sqrt()];
        for (a, b) in spec.iter().zip(want) {
            assert!((a - b).abs() < 1e-10);
        }
        let op = TridiagonalOperator::free(100).unwrap();
        let spec = full_spectrum(&op, default_tol(&op)).unwrap();
        for (a, b) in spec.iter().zip(free_eigs(100)) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn one_site() {
        let op = TridiagonalOperator::new(vec![3.0]).unwrap();
        let spec = full_spectrum(&op, 1e-13).unwrap();
        assert_eq!(spec.len(), 1);
        assert!((spec[0] - 3.0).abs() < 1e-12);
        assert!(min_spacing(&op, 1e-13).is_err());
    }

    #[test]
    fn slice_is_strictly_increasing_and_inside() {
        let dist = SiteDistribution::uniform(0.0, 1.0).unwrap();
        let op = sample_operator(&dist, 200, 11, 4).unwrap();
        let s = eigenvalues_in_interval(&op, -0.3, 1.1, 1e-12).unwrap();
        assert_eq!(s.count, s.eigenvalues.len());
        assert_eq!(s.count, count_in_interval(&op, -0.3, 1.1));
        assert!(s.eigenvalues.windows(2).all(|w| w[0] < w[1]));
        assert!(s.eigenvalues.iter().all(|e| (-0.3..1.1).contains(e)));
        // each bracket carries exactly one eigenvalue
        for e in &s.eigenvalues {
            assert_eq!(count_in_interval(&op, e - 1e-12, e + 1e-12), 1);
        }
    }

    #[test]
    fn eigenvector_free_center() {
        let op = TridiagonalOperator::free(3).unwrap();
        let pair = eigenvector(&op, 0.0).unwrap();
        let s = 0.5f64.sqrt();
        assert!((pair.vector[0] - s).abs() < 1e-12);
        assert!(pair.vector[1].abs() < 1e-12);
        assert!((pair.vector[2] + s).abs() < 1e-12);
        assert_eq!(pair.center, 0);
        assert!(pair.residual < 1e-12);
    }

    #[test]
    fn eigenvectors_orthonormal() {
        let dist = SiteDistribution::bernoulli(0.5).unwrap().with_coupling(3.0).unwrap();
        let op = sample_operator(&dist, 120, 3, 1).unwrap();
        let spec = full_spectrum(&op, default_tol(&op)).unwrap();
        let pairs = eigenpairs(&op, &spec).unwrap();
        for (i, p) in pairs.iter().enumerate() {
            let norm: f64 = p.vector.iter().map(|v| v * v).sum();
            assert!((norm - 1.0).abs() < 1e-12);
            assert!(p.residual <= 1e-8 * op.scale());
            for q in &pairs[i + 1..] {
                let dot: f64 = p.vector.iter().zip(&q.vector).map(|(a, b)| a * b).sum();
                assert!(dot.abs() <= 1e-6, "overlap {dot}");
            }
        }
    }

    #[test]
    fn min_spacing_free() {
        let op = TridiagonalOperator::free(3).unwrap();
        assert!((min_spacing(&op, 1e-13).unwrap() - 2f64.sqrt()).abs() < 1e-10);
        let n = 57;
        let op = TridiagonalOperator::free(n).unwrap();
        let e = free_eigs(n);
        let want = e.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
        assert!((min_spacing(&op, default_tol(&op)).unwrap() - want).abs() < 1e-11);
    }

    #[test]
    fn interlacing_examples() {
        let op = TridiagonalOperator::free(3).unwrap();
        assert!(interlacing_check(&op, 1, 0.0, -3.0, 3.0).unwrap());
        assert!(interlacing_check(&op, 1, 10.0, -3.0, 3.0).unwrap());
        assert_eq!(count_in_interval(&op.with_site(1, 10.0), -3.0, 3.0), 2);
        assert!(interlacing_check(&op, 1, -1.0, -3.0, 3.0).is_err());
    }

    #[test]
    fn close_pairs_match_full_spectrum() {
        let dist = SiteDistribution::bernoulli(0.5).unwrap().with_coupling(4.0).unwrap();
        for r in 0..5 {
            let op = sample_operator(&dist, 300, 8, r).unwrap();
            let tol = default_tol(&op);
            let spec = full_spectrum(&op, tol).unwrap();
            let threshold = 1e-6;
            let want: Vec<f64> = spec.windows(2).filter(|w| w[1] - w[0] < threshold).map(|w| w[0]).collect();
            let got = close_pairs(&op, threshold, tol).unwrap();
            assert_eq!(got.len(), want.len(), "realization {r}");
            for ((a, _), b) in got.iter().zip(&want) {
                assert!((a - b).abs() < 1e-10);
            }
        }
    }
}
