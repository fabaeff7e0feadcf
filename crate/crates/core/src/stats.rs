//! Estimators and goodness-of-fit tests used by the ensemble experiments.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::rng::{streams, CounterRng};
use crate::{Error, Result};

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Sample variance (`n - 1` denominator); `0` for fewer than two values.
pub fn variance(x: &[f64]) -> f64 {
    if x.len() < 2 {
        return 0.0;
    }
    let m = mean(x);
    x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() - 1) as f64
}

/// Standard error of the mean.
pub fn stderr(x: &[f64]) -> f64 {
    (variance(x) / x.len() as f64).sqrt()
}

/// Linear-interpolation quantile of sorted data (`q ∈ [0, 1]`).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty());
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    if i + 1 < sorted.len() {
        sorted[i] + frac * (sorted[i + 1] - sorted[i])
    } else {
        sorted[i]
    }
}

pub fn quantile(x: &[f64], q: f64) -> f64 {
    let mut s = x.to_vec();
    s.sort_by(f64::total_cmp);
    quantile_sorted(&s, q)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Residual standard deviation.
    pub residual_sd: f64,
}

/// Weighted least squares `y ≈ intercept + slope·x`.
pub fn weighted_line(x: &[f64], y: &[f64], w: &[f64]) -> Result<LineFit> {
    if x.len() != y.len() || x.len() != w.len() {
        return Err(Error::InvalidInput("fit inputs differ in length".into()));
    }
    if x.len() < 2 {
        return Err(Error::DegenerateFit(format!("need at least 2 points, got {}", x.len())));
    }
    let sw: f64 = w.iter().sum();
    let mx = x.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let my = y.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for ((xi, yi), wi) in x.iter().zip(y).zip(w) {
        sxx += wi * (xi - mx) * (xi - mx);
        sxy += wi * (xi - mx) * (yi - my);
    }
    if !(sxx > 0.0) || !sxy.is_finite() {
        return Err(Error::DegenerateFit("abscissae do not vary".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss: f64 = x.iter().zip(y).map(|(xi, yi)| (yi - intercept - slope * xi).powi(2)).sum();
    let dof = (x.len() as f64 - 2.0).max(1.0);
    Ok(LineFit { slope, intercept, residual_sd: (ss / dof).sqrt() })
}

pub fn ordinary_line(x: &[f64], y: &[f64]) -> Result<LineFit> {
    weighted_line(x, y, &vec![1.0; x.len()])
}

/// Slope of `log estimate` against `log x`, weighting each point by
/// `(estimate / stderr)²`. Points with a nonpositive estimate are dropped;
/// stderr is floored at `estimate / realizations`.
pub fn loglog_slope(x: &[f64], estimate: &[f64], se: &[f64], realizations: usize) -> Result<LineFit> {
    let mut lx = Vec::new();
    let mut ly = Vec::new();
    let mut w = Vec::new();
    for i in 0..x.len() {
        if estimate[i] > 0.0 && x[i] > 0.0 {
            let floor = estimate[i] / realizations.max(1) as f64;
            let rel = se[i].max(floor) / estimate[i];
            lx.push(x[i].ln());
            ly.push(estimate[i].ln());
            w.push(1.0 / (rel * rel));
        }
    }
    if lx.len() < 2 {
        return Err(Error::DegenerateFit(format!(
            "only {} of {} points have a positive estimate; increase the realization count",
            lx.len(),
            x.len()
        )));
    }
    weighted_line(&lx, &ly, &w)
}

/// Per-realization contributions `values[r][j]` at abscissae `x[j]`; the
/// estimate at `x[j]` is the mean over realizations.
pub fn loglog_slope_of_means(x: &[f64], values: &[Vec<f64>]) -> Result<LineFit> {
    let (est, se) = column_means(values, None);
    loglog_slope(x, &est, &se, values.len())
}

/// Column means and standard errors, optionally under bootstrap multiplicities.
pub fn column_means(values: &[Vec<f64>], multiplicity: Option<&[u32]>) -> (Vec<f64>, Vec<f64>) {
    let cols = values.first().map_or(0, |r| r.len());
    let mut sum = vec![0.0; cols];
    let mut sum2 = vec![0.0; cols];
    let mut total = 0.0;
    for (r, row) in values.iter().enumerate() {
        let m = multiplicity.map_or(1.0, |m| m[r] as f64);
        if m == 0.0 {
            continue;
        }
        total += m;
        for (j, v) in row.iter().enumerate() {
            sum[j] += m * v;
            sum2[j] += m * v * v;
        }
    }
    let mut est = vec![0.0; cols];
    let mut se = vec![0.0; cols];
    for j in 0..cols {
        est[j] = sum[j] / total;
        let var = if total > 1.0 { ((sum2[j] - total * est[j] * est[j]) / (total - 1.0)).max(0.0) } else { 0.0 };
        se[j] = (var / total).sqrt();
    }
    (est, se)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

/// Percentile bootstrap over realizations. `statistic` receives a multiplicity
/// per realization and may return `None` for a degenerate resample; the interval
/// is `None` when more than half of the resamples are degenerate.
pub fn bootstrap_interval<F>(realizations: usize, resamples: usize, seed: u64, level: f64, statistic: F) -> Option<Interval>
where
    F: Fn(&[u32]) -> Option<f64> + Sync,
{
    use rayon::prelude::*;
    if realizations == 0 || resamples == 0 {
        return None;
    }
    let mut stats: Vec<f64> = (0..resamples as u64)
        .into_par_iter()
        .map(|b| {
            let mut rng = CounterRng::new(seed, streams::BOOTSTRAP, b);
            let mut mult = vec![0u32; realizations];
            for _ in 0..realizations {
                mult[rng.below(realizations as u64) as usize] += 1;
            }
            statistic(&mult)
        })
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .filter(|v| v.is_finite())
        .collect();
    if stats.len() * 2 < resamples {
        return None;
    }
    stats.sort_by(f64::total_cmp);
    let alpha = (1.0 - level) / 2.0;
    Some(Interval { lo: quantile_sorted(&stats, alpha), hi: quantile_sorted(&stats, 1.0 - alpha) })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChiSquareTest {
    pub statistic: f64,
    pub degrees_of_freedom: usize,
    pub p_value: f64,
    /// Pooled bins as `(first count, last count or None for the open tail, observed, expected)`.
    pub bins: Vec<(usize, Option<usize>, usize, f64)>,
}

fn poisson_pmf(k: usize, mean: f64) -> f64 {
    if mean == 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    let mut log = -mean + k as f64 * mean.ln();
    for i in 2..=k {
        log -= (i as f64).ln();
    }
    log.exp()
}

/// Chi-square goodness of fit of integer counts against Poisson(`mean`).
///
/// Adjacent bins are pooled until each expects at least 5 observations; the
/// upper tail is one open bin. One parameter is taken as estimated, so the
/// test has `bins - 2` degrees of freedom.
pub fn poisson_chi_square(counts: &[usize], mean: f64) -> Result<ChiSquareTest> {
    let total = counts.len();
    if total == 0 {
        return Err(Error::InsufficientData("no counts".into()));
    }
    let max = counts.iter().copied().max().unwrap_or(0);
    let mut observed = vec![0usize; max + 1];
    for &c in counts {
        observed[c] += 1;
    }
    let n = total as f64;
    // individual cells 0..=max, with the last cell absorbing the tail
    let mut cells: Vec<(usize, usize, f64)> = Vec::new();
    let mut cum = 0.0;
    for (k, &obs) in observed.iter().enumerate() {
        let p = poisson_pmf(k, mean);
        cum += p;
        cells.push((k, obs, n * p));
    }
    if let Some(last) = cells.last_mut() {
        last.2 += n * (1.0 - cum).max(0.0);
    }
    // pool left to right, then merge an undersized remainder into its neighbour
    let mut bins: Vec<(usize, usize, usize, f64)> = Vec::new();
    let mut acc: Option<(usize, usize, usize, f64)> = None;
    for (k, obs, exp) in cells {
        let cur = match acc {
            Some((lo, _, o, e)) => (lo, k, o + obs, e + exp),
            None => (k, k, obs, exp),
        };
        if cur.3 >= 5.0 {
            bins.push(cur);
            acc = None;
        } else {
            acc = Some(cur);
        }
    }
    if let Some(rest) = acc {
        match bins.last_mut() {
            Some(last) => {
                last.1 = rest.1;
                last.2 += rest.2;
                last.3 += rest.3;
            }
            None => bins.push(rest),
        }
    }
    let statistic: f64 = bins.iter().map(|&(_, _, o, e)| if e > 0.0 { (o as f64 - e).powi(2) / e } else { 0.0 }).sum();
    let nbins = bins.len();
    let last = nbins - 1;
    let labelled = bins.into_iter().enumerate().map(|(i, (lo, hi, o, e))| (lo, (i != last).then_some(hi), o, e)).collect();
    if nbins < 3 {
        // a degenerate count distribution cannot be Poisson with positive mean
        let p_value = if statistic > 0.0 || mean > 0.0 && nbins < 2 { 0.0 } else { 1.0 };
        return Ok(ChiSquareTest { statistic, degrees_of_freedom: 0, p_value, bins: labelled });
    }
    let df = nbins - 2;
    let chi = ChiSquared::new(df as f64).map_err(|e| Error::InvalidInput(e.to_string()))?;
    Ok(ChiSquareTest { statistic, degrees_of_freedom: df, p_value: chi.sf(statistic), bins: labelled })
}

/// Kolmogorov distance `sup |F_n - F|` of a sample against a continuous CDF.
pub fn ks_distance(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in s.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    d
}

pub fn ks_exponential(samples: &[f64], rate: f64) -> f64 {
    ks_distance(samples, |x| if x <= 0.0 { 0.0 } else { 1.0 - (-rate * x).exp() })
}

/// Empirical pmf of integer counts over `0..=max`.
pub fn pmf(counts: &[usize]) -> Vec<f64> {
    let max = counts.iter().copied().max().unwrap_or(0);
    let mut p = vec![0.0; max + 1];
    for &c in counts {
        p[c] += 1.0;
    }
    let n = counts.len().max(1) as f64;
    p.iter_mut().for_each(|v| *v /= n);
    p
}

/// `½ Σ |p_k - q_k|`
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    let len = p.len().max(q.len());
    0.5 * (0..len).map(|k| (p.get(k).copied().unwrap_or(0.0) - q.get(k).copied().unwrap_or(0.0)).abs()).sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn quantiles() {
        let x = [4.0, 1.0, 3.0, 2.0];
        assert_eq!(quantile(&x, 0.0), 1.0);
        assert_eq!(quantile(&x, 1.0), 4.0);
        assert_eq!(quantile(&x, 0.5), 2.5);
    }

    #[test]
    fn exact_line() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y = [1.0, 3.0, 5.0, 7.0];
        let f = ordinary_line(&x, &y).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-14 && (f.intercept - 1.0).abs() < 1e-14);
        assert!(ordinary_line(&[1.0, 1.0], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn loglog_power_law() {
        let x: Vec<f64> = (1..8).map(|k| 2f64.powi(-k)).collect();
        let est: Vec<f64> = x.iter().map(|d| 3.0 * d * d).collect();
        let se: Vec<f64> = est.iter().map(|e| 0.1 * e).collect();
        let f = loglog_slope(&x, &est, &se, 100).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-12);
        assert!(loglog_slope(&x, &[0.0; 7], &se, 100).is_err());
    }

    #[test]
    fn bootstrap_covers_mean() {
        let mut rng = CounterRng::new(1, 1, 1);
        let data: Vec<f64> = (0..400).map(|_| rng.random::<f64>()).collect();
        let ci = bootstrap_interval(data.len(), 1000, 3, 0.95, |m| {
            let tot: f64 = m.iter().map(|&c| c as f64).sum();
            Some(data.iter().zip(m).map(|(v, &c)| v * c as f64).sum::<f64>() / tot)
        })
        .unwrap();
        let se = stderr(&data);
        assert!(ci.lo < mean(&data) && mean(&data) < ci.hi);
        assert!(((ci.hi - ci.lo) / (2.0 * 1.96 * se) - 1.0).abs() < 0.15);
    }

    fn poisson_draw(rng: &mut CounterRng, mean: f64) -> usize {
        let mut k = 0;
        let mut p = (-mean).exp();
        let mut cum = p;
        let u = rng.next_unit();
        while u > cum {
            k += 1;
            p *= mean / k as f64;
            cum += p;
        }
        k
    }

    #[test]
    fn chi_square_accepts_poisson_rejects_constant() {
        let mut rng = CounterRng::new(2, 2, 2);
        let counts: Vec<usize> = (0..2000).map(|_| poisson_draw(&mut rng, 3.2)).collect();
        let mean = counts.iter().sum::<usize>() as f64 / counts.len() as f64;
        let t = poisson_chi_square(&counts, mean).unwrap();
        assert!(t.p_value > 0.01, "{t:?}");
        let total: usize = t.bins.iter().map(|b| b.2).sum();
        assert_eq!(total, 2000);
        assert!(t.bins.iter().all(|b| b.3 >= 5.0));

        let fixed = vec![3usize; 2000];
        let t = poisson_chi_square(&fixed, 3.0).unwrap();
        assert!(t.p_value < 0.01);
    }

    #[test]
    fn ks_against_exponential() {
        let mut rng = CounterRng::new(3, 3, 3);
        let s: Vec<f64> = (0..5000).map(|_| -(1.0 - rng.next_unit()).ln() / 2.0).collect();
        assert!(ks_exponential(&s, 2.0) < 0.03);
        assert!(ks_exponential(&s, 1.0) > 0.2);
    }

    #[test]
    fn tv_distance() {
        assert_eq!(total_variation(&[0.5, 0.5], &[0.5, 0.5]), 0.0);
        assert_eq!(total_variation(&[1.0], &[0.0, 1.0]), 1.0);
        assert_eq!(pmf(&[0, 1, 1, 3]), vec![0.25, 0.5, 0.0, 0.25]);
    }
}
