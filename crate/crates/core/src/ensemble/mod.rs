//! Seeded Monte Carlo experiments.
//!
//! Each experiment maps an [`ExperimentConfig`] to an [`ExperimentOutput`]: a
//! JSON-ready [`EnsembleSummary`] plus numeric tables for CSV export. Work is
//! split by realization index and merged in index order, so a given config and
//! seed gives bit-identical output on any number of workers.

mod counts;
mod local;
mod pairs;
mod properties;

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{Experiment, ExperimentConfig};
use crate::stats::{self, Interval, LineFit};
use crate::{Error, Result};

pub use counts::{expected_count, minami_moment, two_eigenvalue_probability, wegner_probability, window_counts};
pub use local::{independent_block_process, poisson_local_statistics, BlockPartition, PointProcessSample};
pub use pairs::{bernoulli_min_spacing, close_pair_records, repulsion_scatter, ClosePair};
pub use properties::{density_of_states, holder_regularity, interlacing_property_run, lyapunov_statistics, Counterexample};

/// One Monte Carlo estimate at a system size and (optionally) a half-width.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointEstimate {
    pub quantity: String,
    pub n: usize,
    pub delta: Option<f64>,
    pub value: f64,
    pub stderr: f64,
    pub realizations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub label: String,
    pub slope: f64,
    pub intercept: f64,
    /// 95% bootstrap interval; `None` when too many resamples were degenerate.
    pub ci: Option<Interval>,
    pub points: usize,
}

/// A pass/fail threshold evaluated on the run; `--check` turns failures into a
/// nonzero exit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: Option<f64>,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub passed: bool,
}

impl Check {
    pub fn within(name: impl Into<String>, value: f64, lower: Option<f64>, upper: Option<f64>) -> Self {
        let passed = value.is_finite() && lower.is_none_or(|l| value >= l) && upper.is_none_or(|u| value <= u);
        Self { name: name.into(), value: value.is_finite().then_some(value), lower, upper, passed }
    }

    pub fn at_least(name: impl Into<String>, value: f64, lower: f64) -> Self {
        Self::within(name, value, Some(lower), None)
    }

    pub fn at_most(name: impl Into<String>, value: f64, upper: f64) -> Self {
        Self::within(name, value, None, Some(upper))
    }

    /// A check that could not be evaluated.
    pub fn missing(name: impl Into<String>) -> Self {
        Self { name: name.into(), value: None, lower: None, upper: None, passed: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub experiment: Experiment,
    pub master_seed: u64,
    pub config_hash: String,
    /// Realizations per system size actually used.
    pub realizations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSummary {
    pub metadata: RunMetadata,
    pub estimates: Vec<PointEstimate>,
    pub fits: Vec<SlopeFit>,
    /// Named scalar results; non-finite values are never stored.
    pub constants: BTreeMap<String, f64>,
    pub checks: Vec<Check>,
    pub notes: Vec<String>,
}

impl EnsembleSummary {
    pub fn new(cfg: &ExperimentConfig) -> Self {
        Self {
            metadata: RunMetadata {
                experiment: cfg.experiment,
                master_seed: cfg.seed,
                config_hash: cfg.content_hash(),
                realizations: cfg.r,
            },
            estimates: Vec::new(),
            fits: Vec::new(),
            constants: BTreeMap::new(),
            checks: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn constant(&mut self, name: impl Into<String>, value: f64) {
        if value.is_finite() {
            self.constants.insert(name.into(), value);
        }
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn fit(&self, label: &str) -> Option<&SlopeFit> {
        self.fits.iter().find(|f| f.label == label)
    }
}

/// Numeric table with stable column names.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self { columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub summary: EnsembleSummary,
    /// Written as `data.csv`.
    pub data: Table,
    /// Additional CSV files keyed by file name.
    pub extra: BTreeMap<String, Table>,
}

impl ExperimentOutput {
    fn new(summary: EnsembleSummary, data: Table) -> Self {
        Self { summary, data, extra: BTreeMap::new() }
    }
}

/// Receives `done / total` realization counts as work completes.
pub trait Progress: Sync {
    fn update(&self, done: usize, total: usize);
}

pub struct Silent;

impl Progress for Silent {
    fn update(&self, _: usize, _: usize) {}
}

/// Shared per-run counter feeding a [`Progress`] sink.
pub struct Tracker<'a> {
    sink: &'a dyn Progress,
    done: AtomicUsize,
    total: AtomicUsize,
}

impl<'a> Tracker<'a> {
    pub fn new(sink: &'a dyn Progress, total: usize) -> Self {
        Self { sink, done: AtomicUsize::new(0), total: AtomicUsize::new(total) }
    }

    pub fn silent() -> Tracker<'static> {
        Tracker::new(&Silent, 0)
    }

    pub fn grow(&self, extra: usize) {
        self.total.fetch_add(extra, Ordering::Relaxed);
    }

    pub fn tick(&self) {
        let done = self.done.fetch_add(1, Ordering::Relaxed) + 1;
        self.sink.update(done, self.total.load(Ordering::Relaxed).max(done));
    }
}

/// Evaluates `f` on realization indices `range` in parallel, returning results
/// in index order.
pub(crate) fn per_realization<T, F>(range: std::ops::Range<u64>, tracker: &Tracker, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync,
{
    range
        .into_par_iter()
        .map(|idx| {
            let out = f(idx);
            tracker.tick();
            out
        })
        .collect()
}

/// Log-log slope with a bootstrap interval over realizations. `values[r][j]`
/// holds realization `r`'s contribution at abscissa `x[j]`.
pub(crate) fn loglog_fit(label: impl Into<String>, x: &[f64], values: &[Vec<f64>], seed: u64) -> Result<SlopeFit> {
    let r = values.len();
    let (est, se) = stats::column_means(values, None);
    let fit = stats::loglog_slope(x, &est, &se, r)?;
    let ci = stats::bootstrap_interval(r, 1000, seed, 0.95, |m| {
        let (e, s) = stats::column_means(values, Some(m));
        stats::loglog_slope(x, &e, &s, r).ok().map(|f| f.slope)
    });
    let points = est.iter().filter(|v| **v > 0.0).count();
    Ok(slope_fit(label, fit, ci, points))
}

pub(crate) fn slope_fit(label: impl Into<String>, fit: LineFit, ci: Option<Interval>, points: usize) -> SlopeFit {
    SlopeFit { label: label.into(), slope: fit.slope, intercept: fit.intercept, ci, points }
}

fn worker_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidInput(format!("cannot start {workers} workers: {e}")))
}

/// Validates `cfg` and runs its experiment on `cfg.workers` threads.
pub fn run(cfg: &ExperimentConfig, progress: &dyn Progress) -> Result<ExperimentOutput> {
    let issues = cfg.check();
    if !issues.is_empty() {
        return Err(Error::Config(issues));
    }
    let pool = worker_pool(cfg.workers)?;
    pool.install(|| {
        let tracker = Tracker::new(progress, 0);
        match cfg.experiment {
            Experiment::Wegner => wegner_probability(cfg, &tracker),
            Experiment::Minami => minami_moment(cfg, &tracker),
            Experiment::Count => expected_count(cfg, &tracker),
            Experiment::TwoEv => two_eigenvalue_probability(cfg, &tracker),
            Experiment::Poisson => poisson_local_statistics(cfg, &tracker),
            Experiment::Blocks => independent_block_process(cfg, &tracker),
            Experiment::Dos => density_of_states(cfg, &tracker),
            Experiment::Lyapunov => lyapunov_statistics(cfg, &tracker),
            Experiment::Separation => bernoulli_min_spacing(cfg, &tracker),
            Experiment::Repulsion => repulsion_scatter(cfg, &tracker),
            Experiment::Interlace => interlacing_property_run(cfg, &tracker),
            Experiment::Holder => holder_regularity(cfg, &tracker),
        }
    })
}
