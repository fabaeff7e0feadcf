//! Eigenvalue-count experiments on windows `[E0 - δ, E0 + δ)`: Wegner
//! probability, Minami moment, expected count and two-eigenvalue probability.

use crate::config::{DeltaMode, ExperimentConfig};
use crate::model::{sample_operator, SiteDistribution};
use crate::rng::{streams, sub_seed};
use crate::spectral::local_dos;
use crate::stats;
use crate::tridiag;
use crate::Result;

use super::{loglog_fit, per_realization, Check, EnsembleSummary, ExperimentOutput, PointEstimate, Table, Tracker};

/// Eigenvalue counts in `[e0 - δ, e0 + δ)` for each δ, one row per realization
/// `0..r`.
pub fn window_counts(
    dist: &SiteDistribution,
    n: usize,
    e0: f64,
    deltas: &[f64],
    r: usize,
    seed: u64,
    tracker: &Tracker,
) -> Result<Vec<Vec<u32>>> {
    let mut shifts = Vec::with_capacity(2 * deltas.len());
    for &d in deltas {
        shifts.push(e0 - d);
        shifts.push(e0 + d);
    }
    per_realization(0..r as u64, tracker, |idx| {
        let op = sample_operator(dist, n, seed, idx)?;
        let c = tridiag::sturm_counts(&op, &shifts);
        Ok(c.chunks(2).map(|p| (p[1] - p[0]) as u32).collect())
    })
}

struct Sweep {
    n: usize,
    deltas: Vec<f64>,
    counts: Vec<Vec<u32>>,
}

fn sweeps(cfg: &ExperimentConfig, tracker: &Tracker) -> Result<Vec<Sweep>> {
    tracker.grow(cfg.n.len() * cfg.r);
    cfg.n
        .iter()
        .map(|&n| {
            let deltas = cfg.deltas(n);
            let counts = window_counts(&cfg.dist, n, cfg.e0, &deltas, cfg.r, cfg.seed, tracker)?;
            Ok(Sweep { n, deltas, counts })
        })
        .collect()
}

fn transform(counts: &[Vec<u32>], f: impl Fn(u32) -> f64) -> Vec<Vec<f64>> {
    counts.iter().map(|row| row.iter().map(|&c| f(c)).collect()).collect()
}

/// Estimates, data rows, a δ-slope per N and an N-slope per δ (absolute δ and
/// at least two sizes) for one count statistic.
fn report(
    cfg: &ExperimentConfig,
    sweeps: &[Sweep],
    quantity: &str,
    statistic: impl Fn(u32) -> f64 + Copy,
    summary: &mut EnsembleSummary,
    data: &mut Table,
) -> Result<Vec<Option<f64>>> {
    let boot = sub_seed(cfg.seed, streams::BOOTSTRAP);
    let mut slopes = Vec::new();
    for s in sweeps {
        let values = transform(&s.counts, statistic);
        let (est, se) = stats::column_means(&values, None);
        for j in 0..s.deltas.len() {
            summary.estimates.push(PointEstimate {
                quantity: quantity.into(),
                n: s.n,
                delta: Some(s.deltas[j]),
                value: est[j],
                stderr: se[j],
                realizations: values.len(),
            });
            data.push(vec![s.n as f64, s.deltas[j], est[j], se[j], values.len() as f64]);
        }
        if s.deltas.len() < 2 {
            slopes.push(None);
            continue;
        }
        match loglog_fit(format!("{quantity}_delta_slope_n{}", s.n), &s.deltas, &values, boot) {
            Ok(fit) => {
                slopes.push(Some(fit.slope));
                summary.fits.push(fit);
            }
            Err(e) => {
                slopes.push(None);
                summary.notes.push(format!("no δ-slope for {quantity} at N = {}: {e}", s.n));
            }
        }
    }
    if cfg.delta_mode == DeltaMode::Absolute && sweeps.len() >= 2 {
        let ns: Vec<f64> = sweeps.iter().map(|s| s.n as f64).collect();
        for (j, &d) in cfg.delta.iter().enumerate() {
            let paired: Vec<Vec<f64>> = (0..cfg.r)
                .map(|r| sweeps.iter().map(|s| statistic(s.counts[r][j])).collect())
                .collect();
            match loglog_fit(format!("{quantity}_n_slope_delta{d}"), &ns, &paired, boot) {
                Ok(fit) => summary.fits.push(fit),
                Err(e) => summary.notes.push(format!("no N-slope for {quantity} at δ = {d}: {e}")),
            }
        }
    }
    Ok(slopes)
}

fn count_table() -> Table {
    Table::new(&["n", "delta", "estimate", "stderr", "realizations"])
}

/// Number of realizations and δ values where the count decreases as the
/// window grows; nested windows make this zero on every sample.
fn nesting_violations(sweeps: &[Sweep]) -> usize {
    let mut bad = 0;
    for s in sweeps {
        let mut order: Vec<usize> = (0..s.deltas.len()).collect();
        order.sort_by(|&a, &b| s.deltas[a].total_cmp(&s.deltas[b]));
        for row in &s.counts {
            bad += order.windows(2).filter(|w| row[w[0]] > row[w[1]]).count();
        }
    }
    bad
}

/// `P[Spec H_N ∩ [E0 - δ, E0 + δ) ≠ ∅]`; the δ-slope should be close to 1.
pub fn wegner_probability(cfg: &ExperimentConfig, tracker: &Tracker) -> Result<ExperimentOutput> {
    let sw = sweeps(cfg, tracker)?;
    let mut summary = EnsembleSummary::new(cfg);
    let mut data = count_table();
    let slopes = report(cfg, &sw, "wegner_probability", |c| (c > 0) as u8 as f64, &mut summary, &mut data)?;
    for (s, slope) in sw.iter().zip(slopes) {
        let name = format!("delta_slope_n{}", s.n);
        summary.checks.push(match slope {
            Some(v) => Check::within(name, v, Some(0.8), Some(1.15)),
            None => Check::missing(name),
        });
    }
    summary.checks.push(Check::at_most("nested_window_violations", nesting_violations(&sw) as f64, 0.0));
    Ok(ExperimentOutput::new(summary, data))
}

fn minami_target(cfg: &ExperimentConfig) -> f64 {
    1.0 + cfg.dist.holder_exponent().unwrap_or(0.0) - 0.2
}

/// `𝔼[T (T - 1)]` with `T` the eigenvalue count in the window.
pub fn minami_moment(cfg: &ExperimentConfig, tracker: &Tracker) -> Result<ExperimentOutput> {
    let sw = sweeps(cfg, tracker)?;
    let mut summary = EnsembleSummary::new(cfg);
    let mut data = count_table();
    let slopes = report(cfg, &sw, "minami_moment", |c| c as f64 * (c as f64 - 1.0), &mut summary, &mut data)?;
    let target = minami_target(cfg);
    summary.constant("slope_target", target);
    for (s, slope) in sw.iter().zip(slopes) {
        let name = format!("delta_slope_n{}", s.n);
        summary.checks.push(match slope {
            Some(v) => Check::at_least(name, v, target),
            None => Check::missing(name),
        });
    }
    Ok(ExperimentOutput::new(summary, data))
}

/// `𝔼[T]` compared with `N k̂(E0) 2δ`, where `k̂` comes from an independent
/// local DOS run on its own seed stream.
pub fn expected_count(cfg: &ExperimentConfig, tracker: &Tracker) -> Result<ExperimentOutput> {
    let sw = sweeps(cfg, tracker)?;
    let mut summary = EnsembleSummary::new(cfg);
    let mut data = Table::new(&["n", "delta", "estimate", "stderr", "realizations", "predicted"]);
    let dos_seed = sub_seed(cfg.seed, streams::DOS_RUN);
    let k_hat = local_dos(&cfg.dist, cfg.dos_n, cfg.e0, cfg.h, cfg.dos_r, dos_seed, cfg.tol)?;
    summary.constant("k_hat", k_hat.value);
    summary.constant("k_hat_stderr", k_hat.stderr);
    summary.estimates.push(PointEstimate {
        quantity: "k_hat".into(),
        n: cfg.dos_n,
        delta: None,
        value: k_hat.value,
        stderr: k_hat.stderr,
        realizations: cfg.dos_r,
    });
    let mut scratch = count_table();
    report(cfg, &sw, "expected_count", |c| c as f64, &mut summary, &mut scratch)?;
    for mut row in scratch.rows {
        let predicted = row[0] * k_hat.value * 2.0 * row[1];
        let (est, se) = (row[2], row[3]);
        let name = format!("count_vs_dos_n{}_delta{}", row[0], row[1]);
        summary.checks.push(Check::at_most(name, (est - predicted).abs(), 0.1 * predicted + 3.0 * se));
        summary.constant(format!("relative_deviation_n{}_delta{}", row[0], row[1]), (est - predicted) / predicted);
        row.push(predicted);
        data.push(row);
    }

    // linearity in N: the same absolute window on N and 2N
    for s in &sw {
        if !cfg.n.contains(&(2 * s.n)) {
            continue;
        }
        tracker.grow(cfg.r);
        let big = window_counts(&cfg.dist, 2 * s.n, cfg.e0, &s.deltas, cfg.r, cfg.seed, tracker)?;
        let (small_est, _) = stats::column_means(&transform(&s.counts, |c| c as f64), None);
        let (big_est, _) = stats::column_means(&transform(&big, |c| c as f64), None);
        for (j, d) in s.deltas.iter().enumerate() {
            let ratio = big_est[j] / small_est[j];
            summary.constant(format!("doubling_ratio_n{}_delta{d}", s.n), ratio);
            summary.checks.push(Check::within(format!("doubling_ratio_n{}_delta{d}", s.n), ratio, Some(1.8), Some(2.2)));
        }
    }
    Ok(ExperimentOutput::new(summary, data))
}

/// `P[T >= 2]`, with separate fits on the smaller and larger half of the δ
/// sweep.
pub fn two_eigenvalue_probability(cfg: &ExperimentConfig, tracker: &Tracker) -> Result<ExperimentOutput> {
    let sw = sweeps(cfg, tracker)?;
    let mut summary = EnsembleSummary::new(cfg);
    let mut data = count_table();
    report(cfg, &sw, "two_eigenvalue_probability", |c| (c >= 2) as u8 as f64, &mut summary, &mut data)?;
    let boot = sub_seed(cfg.seed, streams::BOOTSTRAP);
    let target = minami_target(cfg);
    summary.constant("small_delta_slope_target", target);
    let mut dominated = 0usize;
    for s in &sw {
        for row in &s.counts {
            dominated += row.iter().filter(|&&c| ((c >= 2) as u8 as f64) > c as f64 * (c as f64 - 1.0)).count();
        }
        let mut order: Vec<usize> = (0..s.deltas.len()).collect();
        order.sort_by(|&a, &b| s.deltas[a].total_cmp(&s.deltas[b]));
        let half = order.len().div_ceil(2).max(2).min(order.len());
        let regimes = [("small", &order[..half]), ("large", &order[order.len() - half..])];
        for (regime, idx) in regimes {
            let x: Vec<f64> = idx.iter().map(|&j| s.deltas[j]).collect();
            let values: Vec<Vec<f64>> =
                s.counts.iter().map(|row| idx.iter().map(|&j| (row[j] >= 2) as u8 as f64).collect()).collect();
            let label = format!("{regime}_delta_slope_n{}", s.n);
            match loglog_fit(label.clone(), &x, &values, boot) {
                Ok(fit) => {
                    if regime == "small" {
                        summary.checks.push(Check::at_least(label, fit.slope, target));
                    }
                    summary.fits.push(fit);
                }
                Err(e) => {
                    if regime == "small" {
                        summary.checks.push(Check::missing(label));
                    }
                    summary.notes.push(format!("no {regime}-δ fit at N = {}: {e}", s.n));
                }
            }
        }
    }
    summary.checks.push(Check::at_most("probability_exceeds_moment", dominated as f64, 0.0));
    Ok(ExperimentOutput::new(summary, data))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{Entry, Experiment};

    fn config(exp: Experiment, pairs: &[(&str, &str)]) -> ExperimentConfig {
        let entries: Vec<Entry> = pairs.iter().map(|(k, v)| Entry::flag(k, v)).collect();
        ExperimentConfig::from_entries(exp, &entries).unwrap()
    }

    #[test]
    fn window_outside_support_is_never_hit() {
        let cfg = config(Experiment::Wegner, &[("n", "50,100"), ("r", "100"), ("e0", "10"), ("delta", "0.5,0.01")]);
        let out = wegner_probability(&cfg, &Tracker::silent()).unwrap();
        assert!(out.summary.estimates.iter().all(|e| e.value == 0.0));
    }

    #[test]
    fn single_site_never_has_two_eigenvalues() {
        let cfg = config(Experiment::TwoEv, &[("n", "1"), ("r", "100"), ("c1", "0"), ("delta", "1,0.01")]);
        let out = two_eigenvalue_probability(&cfg, &Tracker::silent()).unwrap();
        assert!(out.summary.estimates.iter().all(|e| e.value == 0.0));
        assert!(out.summary.check("probability_exceeds_moment").unwrap().passed);
    }

    #[test]
    fn counts_match_direct_bisection() {
        let dist = SiteDistribution::uniform(0.0, 1.0).unwrap();
        let deltas = [0.3, 0.05];
        let counts = window_counts(&dist, 40, 0.5, &deltas, 5, 3, &Tracker::silent()).unwrap();
        for (idx, row) in counts.iter().enumerate() {
            let op = sample_operator(&dist, 40, 3, idx as u64).unwrap();
            for (j, d) in deltas.iter().enumerate() {
                let s = tridiag::eigenvalues_in_interval(&op, 0.5 - d, 0.5 + d, 1e-12).unwrap();
                assert_eq!(row[j] as usize, s.eigenvalues.len());
            }
        }
    }
}
