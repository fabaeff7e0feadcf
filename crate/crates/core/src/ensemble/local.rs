//! Local eigenvalue statistics near `E0` on the scale `1/N`, for the full
//! operator and for the independent-box approximation.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::model::sample_operator;
use crate::rng::{streams, sub_seed};
use crate::spectral::local_dos;
use crate::stats;
use crate::tridiag;
use crate::{Error, Result};

use super::{per_realization, Check, EnsembleSummary, ExperimentOutput, PointEstimate, Table, Tracker};

/// Rescaled eigenvalues `N (E - E0)` in `[0, L)` for one realization, with the
/// rescaled distance from each point to the next eigenvalue of the same
/// process (which may lie beyond the window).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointProcessSample {
    pub realization: u64,
    pub points: Vec<f64>,
    pub forward_gaps: Vec<f64>,
}

impl PointProcessSample {
    pub fn count(&self) -> usize {
        self.points.len()
    }

    /// Consecutive gaps between points inside the window.
    pub fn inner_gaps(&self) -> Vec<f64> {
        self.points.windows(2).map(|w| w[1] - w[0]).collect()
    }
}

fn full_process(cfg: &ExperimentConfig, n: usize, idx: u64) -> Result<(PointProcessSample, Vec<usize>)> {
    let op = sample_operator(&cfg.dist, n, cfg.seed, idx)?;
    let tol = cfg.absolute_tol(op.scale());
    let nf = n as f64;
    let slice = tridiag::eigenvalues_in_interval(&op, cfg.e0, cfg.e0 + cfg.l / nf, tol)?;
    let below = tridiag::sturm_count(&op, cfg.e0);
    let mut gaps = Vec::with_capacity(slice.count);
    for (j, &e) in slice.eigenvalues.iter().enumerate() {
        let next = if j + 1 < slice.count {
            slice.eigenvalues[j + 1]
        } else if below + j + 1 < n {
            tridiag::kth_eigenvalue(&op, below + j + 1, tol)?
        } else {
            continue;
        };
        gaps.push(nf * (next - e));
    }
    let centers = tridiag::eigenpairs(&op, &slice.eigenvalues)?.iter().map(|p| p.center).collect();
    let points = slice.eigenvalues.iter().map(|e| nf * (e - cfg.e0)).collect();
    Ok((PointProcessSample { realization: idx, points, forward_gaps: gaps }, centers))
}

struct Diagnostics {
    counts: Vec<usize>,
    mean: f64,
    chi: stats::ChiSquareTest,
    ks: f64,
    ks_inner: Option<f64>,
    gaps: Vec<f64>,
}

fn diagnose(samples: &[PointProcessSample], l: f64) -> Result<Diagnostics> {
    let nonempty = samples.iter().filter(|s| s.count() > 0).count();
    if nonempty < 50 {
        return Err(Error::InsufficientData(format!(
            "only {nonempty} realizations have an eigenvalue in the window; increase l or r"
        )));
    }
    let counts: Vec<usize> = samples.iter().map(|s| s.count()).collect();
    let mean = counts.iter().sum::<usize>() as f64 / counts.len() as f64;
    let chi = stats::poisson_chi_square(&counts, mean)?;
    let rate = mean / l;
    let mut gaps: Vec<f64> = samples.iter().flat_map(|s| s.forward_gaps.iter().copied()).collect();
    gaps.sort_by(f64::total_cmp);
    let ks = stats::ks_exponential(&gaps, rate);
    let inner: Vec<f64> = samples.iter().filter(|s| s.count() >= 2).flat_map(|s| s.inner_gaps()).collect();
    let ks_inner = (!inner.is_empty()).then(|| stats::ks_exponential(&inner, rate));
    Ok(Diagnostics { counts, mean, chi, ks, ks_inner, gaps })
}

fn record(summary: &mut EnsembleSummary, prefix: &str, n: usize, l: f64, d: &Diagnostics) {
    let r = d.counts.len();
    let values: Vec<f64> = d.counts.iter().map(|&c| c as f64).collect();
    summary.estimates.push(PointEstimate {
        quantity: format!("{prefix}mean_count"),
        n,
        delta: Some(l / n as f64),
        value: d.mean,
        stderr: stats::stderr(&values),
        realizations: r,
    });
    summary.constant(format!("{prefix}intensity_n{n}"), d.mean / l);
    summary.constant(format!("{prefix}count_variance_n{n}"), stats::variance(&values));
    summary.constant(format!("{prefix}chi2_statistic_n{n}"), d.chi.statistic);
    summary.constant(format!("{prefix}chi2_df_n{n}"), d.chi.degrees_of_freedom as f64);
    summary.constant(format!("{prefix}chi2_p_n{n}"), d.chi.p_value);
    summary.constant(format!("{prefix}ks_distance_n{n}"), d.ks);
    if let Some(k) = d.ks_inner {
        summary.constant(format!("{prefix}ks_inner_gaps_n{n}"), k);
    }
    summary.constant(format!("{prefix}gaps_n{n}"), d.gaps.len() as f64);
}

fn gap_rows(table: &mut Table, n: usize, d: &Diagnostics, l: f64) {
    let m = d.gaps.len() as f64;
    let rate = d.mean / l;
    for (i, &g) in d.gaps.iter().enumerate() {
        table.push(vec![n as f64, g, (i as f64 + 1.0) / m, 1.0 - (-rate * g).exp()]);
    }
}

fn poisson_pmf(k: usize, mean: f64) -> f64 {
    let log = -mean + k as f64 * mean.ln() - (1..=k).map(|i| (i as f64).ln()).sum::<f64>();
    if mean == 0.0 {
        (k == 0) as u8 as f64
    } else {
        log.exp()
    }
}

/// Counting statistics and forward gaps of `{N (E - E0)} ∩ [0, L)` compared with
/// a Poisson process of the fitted intensity.
pub fn poisson_local_statistics(cfg: &ExperimentConfig, tracker: &Tracker) -> Result<ExperimentOutput> {
    let mut summary = EnsembleSummary::new(cfg);
    let mut data = Table::new(&["n", "count", "observed_fraction", "poisson_pmf"]);
    let mut gaps = Table::new(&["n", "gap", "empirical_cdf", "exponential_cdf"]);
    let mut points = Table::new(&["n", "realization", "point"]);
    tracker.grow(cfg.n.len() * cfg.r);
    let k_hat = local_dos(&cfg.dist, cfg.dos_n, cfg.e0, cfg.h, cfg.dos_r, sub_seed(cfg.seed, streams::DOS_RUN), cfg.tol)?;
    summary.constant("k_hat", k_hat.value);
    summary.constant("k_hat_stderr", k_hat.stderr);
    for &n in &cfg.n {
        let samples: Vec<PointProcessSample> =
            per_realization(0..cfg.r as u64, tracker, |idx| full_process(cfg, n, idx).map(|x| x.0))?;
        let d = diagnose(&samples, cfg.l)?;
        record(&mut summary, "", n, cfg.l, &d);
        for (k, p) in stats::pmf(&d.counts).into_iter().enumerate() {
            data.push(vec![n as f64, k as f64, p, poisson_pmf(k, d.mean)]);
        }
        gap_rows(&mut gaps, n, &d, cfg.l);
        for s in &samples {
            for &x in &s.points {
                points.push(vec![n as f64, s.realization as f64, x]);
            }
        }
        let rho = d.mean / cfg.l;
        summary.checks.push(Check::at_least(format!("chi2_p_n{n}"), d.chi.p_value, 0.01));
        summary.checks.push(Check::at_most(format!("ks_distance_n{n}"), d.ks, 0.05));
        summary.checks.push(Check::at_most(format!("intensity_vs_dos_n{n}"), (rho / k_hat.value - 1.0).abs(), 0.15));
    }
    summary.notes.push(
        "gaps run from each window point to the next eigenvalue, which may lie beyond the window; \
         ks_inner_gaps uses only consecutive points inside the window"
            .into(),
    );
    let mut out = ExperimentOutput::new(summary, data);
    out.extra.insert("gaps.csv".into(), gaps);
    out.extra.insert("points.csv".into(), points);
    Ok(out)
}

/// Alternating boxes and buffers covering `[0, N)`, starting and ending with a
/// box. Buffers have exactly `buffer_len` sites; boxes have at least `box_len`,
/// with the sites left over spread evenly across them. Each box is widened by
/// `buffer_len / 2` on both sides, so widened boxes stay disjoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockPartition {
    pub box_len: usize,
    pub buffer_len: usize,
    pub boxes: Vec<Range<usize>>,
    pub widened: Vec<Range<usize>>,
}

impl BlockPartition {
    /// Box length `round(K log N)`, buffer length `max(1, round(K1 log N))`.
    pub fn new(n: usize, k: f64, k1: f64) -> Result<Self> {
        let log = (n as f64).ln();
        let box_len = (k * log).round() as usize;
        let buffer_len = ((k1 * log).round() as usize).max(1);
        if box_len == 0 || box_len > n {
            return Err(Error::InvalidInput(format!(
                "N = {n} cannot hold a box of K log N = {box_len} sites; increase N or reduce K"
            )));
        }
        let count = (n + buffer_len) / (box_len + buffer_len);
        let spare = n - count * box_len - (count - 1) * buffer_len;
        let half = buffer_len / 2;
        let mut boxes = Vec::with_capacity(count);
        let mut widened = Vec::with_capacity(count);
        let mut start = 0;
        for i in 0..count {
            let len = box_len + spare / count + usize::from(i < spare % count);
            boxes.push(start..start + len);
            widened.push(start.saturating_sub(half)..(start + len + half).min(n));
            start += len + buffer_len;
        }
        Ok(Self { box_len, buffer_len, boxes, widened })
    }

    pub fn in_buffer(&self, site: usize) -> bool {
        !self.boxes.iter().any(|b| b.contains(&site))
    }
}

struct BlockRealization {
    full: PointProcessSample,
    block: PointProcessSample,
    buffer_hits: usize,
    discarded: usize,
    censored: usize,
}

fn block_realization(cfg: &ExperimentConfig, n: usize, part: &BlockPartition, idx: u64) -> Result<BlockRealization> {
    let (full, centers) = full_process(cfg, n, idx)?;
    let buffer_hits = centers.iter().filter(|&&c| part.in_buffer(c)).count();
    let op = sample_operator(&cfg.dist, n, cfg.seed, idx)?;
    let nf = n as f64;
    let window_hi = cfg.e0 + cfg.l / nf;
    let reach = cfg.e0 + 3.0 * cfg.l / nf;
    let mut points = Vec::new();
    let mut pool = Vec::new();
    let mut discarded = 0;
    for range in &part.widened {
        let sub = op.restrict(range.clone())?;
        let tol = cfg.absolute_tol(sub.scale());
        let ev = tridiag::eigenvalues_in_interval(&sub, cfg.e0, reach, tol)?.eigenvalues;
        let inside = ev.iter().filter(|&&e| e < window_hi).count();
        if inside >= 2 {
            discarded += 1;
            continue;
        }
        if inside == 1 {
            points.push(ev[0]);
        }
        pool.extend(ev);
    }
    points.sort_by(f64::total_cmp);
    pool.sort_by(f64::total_cmp);
    let mut gaps = Vec::with_capacity(points.len());
    let mut censored = 0;
    for &e in &points {
        match pool.iter().find(|&&x| x > e) {
            Some(&next) => gaps.push(nf * (next - e)),
            None => censored += 1,
        }
    }
    let block = PointProcessSample {
        realization: idx,
        points: points.iter().map(|e| nf * (e - cfg.e0)).collect(),
        forward_gaps: gaps,
    };
    Ok(BlockRealization { full, block, buffer_hits, discarded, censored })
}

/// Local statistics of the process built from independent widened boxes,
/// keeping boxes with at most one eigenvalue in the window, compared on the
/// same realizations with the full operator.
pub fn independent_block_process(cfg: &ExperimentConfig, tracker: &Tracker) -> Result<ExperimentOutput> {
    let mut summary = EnsembleSummary::new(cfg);
    let mut data = Table::new(&["n", "count", "block_fraction", "full_fraction", "poisson_pmf"]);
    let mut gaps = Table::new(&["n", "gap", "empirical_cdf", "exponential_cdf"]);
    tracker.grow(cfg.n.len() * cfg.r);
    for &n in &cfg.n {
        let part = BlockPartition::new(n, cfg.k, cfg.k1)?;
        summary.constant(format!("box_len_n{n}"), part.box_len as f64);
        summary.constant(format!("buffer_len_n{n}"), part.buffer_len as f64);
        summary.constant(format!("boxes_n{n}"), part.boxes.len() as f64);
        let runs = per_realization(0..cfg.r as u64, tracker, |idx| block_realization(cfg, n, &part, idx))?;
        let block: Vec<PointProcessSample> = runs.iter().map(|r| r.block.clone()).collect();
        let full_counts: Vec<usize> = runs.iter().map(|r| r.full.count()).collect();
        let d = diagnose(&block, cfg.l)?;
        record(&mut summary, "block_", n, cfg.l, &d);
        gap_rows(&mut gaps, n, &d, cfg.l);

        let p_block = stats::pmf(&d.counts);
        let p_full = stats::pmf(&full_counts);
        for k in 0..p_block.len().max(p_full.len()) {
            let at = |p: &[f64]| p.get(k).copied().unwrap_or(0.0);
            data.push(vec![n as f64, k as f64, at(&p_block), at(&p_full), poisson_pmf(k, d.mean)]);
        }
        let tv = stats::total_variation(&p_block, &p_full);
        let events: usize = full_counts.iter().sum();
        let hits: usize = runs.iter().map(|r| r.buffer_hits).sum();
        let discarded: usize = runs.iter().map(|r| r.discarded).sum();
        let censored: usize = runs.iter().map(|r| r.censored).sum();
        let buffer_rate = hits as f64 / events.max(1) as f64;
        let discard_rate = discarded as f64 / (part.boxes.len() * cfg.r) as f64;
        summary.constant(format!("total_variation_n{n}"), tv);
        summary.constant(format!("buffer_hit_rate_n{n}"), buffer_rate);
        summary.constant(format!("discard_rate_n{n}"), discard_rate);
        summary.constant(format!("censored_gaps_n{n}"), censored as f64);
        summary.checks.push(Check::at_most(format!("total_variation_n{n}"), tv, 0.1));
        summary.checks.push(Check::at_most(format!("buffer_hit_rate_n{n}"), buffer_rate, 0.1));
        summary.checks.push(Check::at_most(format!("discard_rate_n{n}"), discard_rate, 0.05));
    }
    summary.notes.push(
        "buffer-hit rate: fraction of full-operator window eigenvalues whose eigenvector peaks outside every box; \
         discard rate: fraction of widened boxes with two or more eigenvalues in the window"
            .into(),
    );
    let mut out = ExperimentOutput::new(summary, data);
    out.extra.insert("gaps.csv".into(), gaps);
    Ok(out)
}
