//! Eigenvalue separation for Bernoulli potentials: the minimum spacing across
//! system sizes and the geometry of near-degenerate pairs.

use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::model::{sample_operator, TridiagonalOperator};
use crate::rng::{streams, sub_seed};
use crate::stats::{self, Interval};
use crate::tridiag;
use crate::Result;

use super::{per_realization, slope_fit, Check, EnsembleSummary, ExperimentOutput, PointEstimate, Table, Tracker};

/// Pair energies are refined to this relative tolerance (or the configured one
/// if finer) so that gaps near `N^-3` are resolved to a few parts in 10⁴.
const PAIR_RELATIVE_TOL: f64 = 1e-15;

/// Sorted copy of `values` where each entry is repeated by its multiplicity.
fn weighted_sorted(values: &[f64], mult: &[u32]) -> Vec<f64> {
    let mut out: Vec<f64> = values.iter().zip(mult).flat_map(|(&v, &m)| std::iter::repeat_n(v, m as usize)).collect();
    out.sort_by(f64::total_cmp);
    out
}

/// Half-width of a 95% interval expressed as a normal standard error.
fn stderr_from(ci: Option<Interval>) -> f64 {
    ci.map_or(0.0, |c| (c.hi - c.lo) / (2.0 * 1.959_963_984_540_054))
}

/// Minimum eigenvalue spacing per realization and the exponent statistic
/// `Ĉ(N) = quantile_q(-log min spacing) / log N`.
pub fn bernoulli_min_spacing(cfg: &ExperimentConfig, tracker: &Tracker) -> Result<ExperimentOutput> {
    let mut summary = EnsembleSummary::new(cfg);
    let mut data = Table::new(&["n", "realization", "min_spacing", "exponent"]);
    let boot = sub_seed(cfg.seed, streams::BOOTSTRAP);
    tracker.grow(cfg.n.len() * cfg.r);
    let mut exponents: Vec<Vec<f64>> = Vec::new();
    let mut smallest = f64::INFINITY;
    for &n in &cfg.n {
        let spacing = per_realization(0..cfg.r as u64, tracker, |idx| {
            let op = sample_operator(&cfg.dist, n, cfg.seed, idx)?;
            tridiag::min_spacing(&op, cfg.absolute_tol(op.scale()))
        })?;
        let log_n = (n as f64).ln();
        let exps: Vec<f64> = spacing.iter().map(|s| -s.ln() / log_n).collect();
        for (idx, (&s, &c)) in spacing.iter().zip(&exps).enumerate() {
            data.push(vec![n as f64, idx as f64, s, c]);
            smallest = smallest.min(s);
        }
        let mut sorted = exps.clone();
        sorted.sort_by(f64::total_cmp);
        for &q in &cfg.quantiles {
            let value = stats::quantile_sorted(&sorted, q);
            let ci = stats::bootstrap_interval(cfg.r, 1000, boot, 0.95, |m| {
                Some(stats::quantile_sorted(&weighted_sorted(&exps, m), q))
            });
            summary.estimates.push(PointEstimate {
                quantity: format!("c_hat_q{q}"),
                n,
                delta: None,
                value,
                stderr: stderr_from(ci),
                realizations: cfg.r,
            });
            summary.constant(format!("c_hat_q{q}_n{n}"), value);
            if let Some(ci) = ci {
                summary.constant(format!("c_hat_q{q}_n{n}_ci_lo"), ci.lo);
                summary.constant(format!("c_hat_q{q}_n{n}_ci_hi"), ci.hi);
            }
        }
        exponents.push(exps);
    }
    summary.notes.push("c_hat stderr is the 95% bootstrap interval width divided by 3.92".into());

    // trend of each quantile in log N, resampling realizations jointly across N
    if cfg.n.len() >= 2 {
        let x: Vec<f64> = cfg.n.iter().map(|&n| (n as f64).ln()).collect();
        for &q in &cfg.quantiles {
            let curve = |mult: Option<&[u32]>| -> Vec<f64> {
                exponents
                    .iter()
                    .map(|e| match mult {
                        Some(m) => stats::quantile_sorted(&weighted_sorted(e, m), q),
                        None => stats::quantile(e, q),
                    })
                    .collect()
            };
            if let Ok(fit) = stats::ordinary_line(&x, &curve(None)) {
                let ci = stats::bootstrap_interval(cfg.r, 1000, boot, 0.95, |m| {
                    stats::ordinary_line(&x, &curve(Some(m))).ok().map(|f| f.slope)
                });
                summary.fits.push(slope_fit(format!("c_hat_q{q}_log_n_slope"), fit, ci, x.len()));
            }
        }
        let q = 0.99;
        let first = stats::quantile(&exponents[0], q);
        let last = stats::quantile(&exponents[exponents.len() - 1], q);
        summary.constant("c_hat_q0.99_ratio_last_first", last / first);
        summary.checks.push(Check::at_most("c_hat_q0.99_growth", last / first, 1.25));
    }
    summary.constant("smallest_spacing", smallest);
    summary.checks.push(Check::at_least("smallest_spacing_positive", (smallest > 0.0) as u8 as f64, 1.0));
    Ok(ExperimentOutput::new(summary, data))
}

/// Two eigenpairs closer than the threshold, with their localization centres.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClosePair {
    pub realization: u64,
    pub lower: f64,
    pub upper: f64,
    pub gap: f64,
    pub center_lower: usize,
    pub center_upper: usize,
}

impl ClosePair {
    pub fn distance(&self) -> usize {
        self.center_lower.abs_diff(self.center_upper)
    }
}

/// Close pairs of one operator. Pairs whose gap is not resolved by `tol`
/// (gap ≤ 2·tol) are counted separately instead of being returned.
pub fn close_pair_records(op: &TridiagonalOperator, threshold: f64, tol: f64, realization: u64) -> Result<(Vec<ClosePair>, usize)> {
    let mut out = Vec::new();
    let mut unresolved = 0;
    for (lower, upper) in tridiag::close_pairs(op, threshold, tol)? {
        if upper - lower <= 2.0 * tol {
            unresolved += 1;
            continue;
        }
        let pairs = tridiag::eigenpairs(op, &[lower, upper])?;
        out.push(ClosePair {
            realization,
            lower,
            upper,
            gap: upper - lower,
            center_lower: pairs[0].center,
            center_upper: pairs[1].center,
        });
    }
    Ok((out, unresolved))
}

/// Centre distance against `log(1/gap)` for all pairs closer than the
/// threshold (default `N^-3`), with the fitted boundary
/// `distance ≥ a log(1/gap) - b`. The realization count grows until
/// `min_pairs` pairs are found or `max_r` is reached.
pub fn repulsion_scatter(cfg: &ExperimentConfig, tracker: &Tracker) -> Result<ExperimentOutput> {
    let mut summary = EnsembleSummary::new(cfg);
    let mut data = Table::new(&["n", "realization", "lower", "upper", "gap", "log_inverse_gap", "center_lower", "center_upper", "distance"]);
    let boot = sub_seed(cfg.seed, streams::BOOTSTRAP);
    let rel_tol = cfg.tol.min(PAIR_RELATIVE_TOL);
    for &n in &cfg.n {
        let threshold = if cfg.threshold > 0.0 { cfg.threshold } else { (n as f64).powi(-3) };
        let mut pairs: Vec<ClosePair> = Vec::new();
        let mut unresolved = 0;
        let mut done = 0usize;
        let mut target = cfg.r;
        loop {
            tracker.grow(target - done);
            let batch = per_realization(done as u64..target as u64, tracker, |idx| {
                let op = sample_operator(&cfg.dist, n, cfg.seed, idx)?;
                close_pair_records(&op, threshold, rel_tol * op.scale(), idx)
            })?;
            for (p, u) in batch {
                pairs.extend(p);
                unresolved += u;
            }
            done = target;
            if pairs.len() >= cfg.min_pairs || done >= cfg.max_r {
                break;
            }
            target = (2 * target).min(cfg.max_r);
        }
        summary.metadata.realizations = summary.metadata.realizations.max(done);
        summary.constant(format!("threshold_n{n}"), threshold);
        summary.constant(format!("realizations_n{n}"), done as f64);
        summary.constant(format!("pairs_n{n}"), pairs.len() as f64);
        summary.constant(format!("unresolved_pairs_n{n}"), unresolved as f64);
        summary.estimates.push(PointEstimate {
            quantity: "close_pairs_per_realization".into(),
            n,
            delta: Some(threshold),
            value: pairs.len() as f64 / done as f64,
            stderr: (pairs.len() as f64).sqrt() / done as f64,
            realizations: done,
        });
        for p in &pairs {
            data.push(vec![
                n as f64,
                p.realization as f64,
                p.lower,
                p.upper,
                p.gap,
                -p.gap.ln(),
                p.center_lower as f64,
                p.center_upper as f64,
                p.distance() as f64,
            ]);
        }
        fit_boundary(&mut summary, n, &pairs, cfg.min_pairs, boot);
    }
    Ok(ExperimentOutput::new(summary, data))
}

fn fit_boundary(summary: &mut EnsembleSummary, n: usize, pairs: &[ClosePair], min_pairs: usize, boot: u64) {
    let slope_name = format!("slope_ci_lower_n{n}");
    let frac_name = format!("boundary_fraction_n{n}");
    if pairs.len() < min_pairs.max(3) {
        summary.notes.push(format!(
            "only {} close pairs at N = {n}; raise max_r or the threshold for a boundary fit",
            pairs.len()
        ));
        summary.checks.push(Check::missing(slope_name));
        summary.checks.push(Check::missing(frac_name));
        return;
    }
    let x: Vec<f64> = pairs.iter().map(|p| -p.gap.ln()).collect();
    let y: Vec<f64> = pairs.iter().map(|p| p.distance() as f64).collect();
    let Ok(fit) = stats::ordinary_line(&x, &y) else {
        summary.notes.push(format!("gaps at N = {n} do not vary; no boundary fit"));
        summary.checks.push(Check::missing(slope_name));
        summary.checks.push(Check::missing(frac_name));
        return;
    };
    let ci = stats::bootstrap_interval(pairs.len(), 1000, boot, 0.95, |m| {
        let w: Vec<f64> = m.iter().map(|&k| k as f64).collect();
        stats::weighted_line(&x, &y, &w).ok().map(|f| f.slope)
    });
    let b = -fit.intercept + 2.0 * fit.residual_sd;
    let inside = x.iter().zip(&y).filter(|(xi, yi)| **yi >= fit.slope * **xi - b).count();
    let fraction = inside as f64 / pairs.len() as f64;
    summary.fits.push(slope_fit(format!("distance_vs_log_inverse_gap_n{n}"), fit, ci, pairs.len()));
    summary.constant(format!("a_n{n}"), fit.slope);
    summary.constant(format!("b_n{n}"), b);
    summary.constant(format!("boundary_fraction_n{n}"), fraction);
    summary.checks.push(match ci {
        Some(ci) => Check::at_least(slope_name, ci.lo, f64::MIN_POSITIVE),
        None => Check::missing(slope_name),
    });
    summary.checks.push(Check::at_least(frac_name, fraction, 0.95));
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weighted_sorted_repeats() {
        assert_eq!(weighted_sorted(&[3.0, 1.0, 2.0], &[2, 0, 1]), vec![2.0, 3.0, 3.0]);
    }

    /// Two single-site wells far apart behind high walls, detuned by 1e-10: their
    /// ground states are nearly degenerate and peak one well offset apart.
    #[test]
    fn mirrored_wells_form_a_distant_close_pair() {
        let n = 120;
        let offset = 70;
        let mut d = vec![6.0; n];
        for (s, shift) in [(20, 0.0), (20 + offset, 1e-10)] {
            d[s] = -3.0 + shift;
        }
        let op = TridiagonalOperator::new(d).unwrap();
        let (pairs, unresolved) = close_pair_records(&op, 1e-8, 1e-15 * op.scale(), 0).unwrap();
        assert_eq!(unresolved, 0);
        assert_eq!(pairs.len(), 1);
        assert_eq!(pairs[0].distance(), offset);
        assert!(pairs[0].gap < 1e-8);
    }

    #[test]
    fn gaps_above_threshold_are_excluded() {
        let op = TridiagonalOperator::free(10).unwrap();
        let (pairs, _) = close_pair_records(&op, 1e-3, 1e-13, 0).unwrap();
        assert!(pairs.is_empty());
    }
}
