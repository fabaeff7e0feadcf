//! Flat `key = value` experiment configuration.
//!
//! A file holds one assignment per line; `#` starts a comment. Command-line
//! overrides use the same keys and win over the file. Every problem found is
//! collected with its line and column instead of stopping at the first.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::model::{ParseError, SiteDistribution};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfigIssue {
    /// 1-based line and column in the config file; `None` for command-line values.
    pub line: Option<usize>,
    pub column: Option<usize>,
    pub key: Option<String>,
    pub message: String,
}

impl ConfigIssue {
    fn at(entry: &Entry, column_offset: usize, message: impl Into<String>) -> Self {
        Self {
            line: entry.line,
            column: entry.line.map(|_| entry.value_column + column_offset),
            key: Some(entry.key.clone()),
            message: message.into(),
        }
    }

    fn global(key: &str, message: impl Into<String>) -> Self {
        Self { line: None, column: None, key: Some(key.to_string()), message: message.into() }
    }
}

impl fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.line, self.column) {
            (Some(l), Some(c)) => write!(f, "line {l}, column {c}: ")?,
            (Some(l), None) => write!(f, "line {l}: ")?,
            _ => {}
        }
        if let Some(key) = &self.key {
            write!(f, "`{key}`: ")?;
        }
        f.write_str(&self.message)
    }
}

/// One `key = value` assignment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entry {
    pub key: String,
    pub value: String,
    pub line: Option<usize>,
    /// 1-based column of the first character of `value`.
    pub value_column: usize,
}

impl Entry {
    pub fn flag(key: &str, value: &str) -> Self {
        Self { key: key.to_string(), value: value.to_string(), line: None, value_column: 1 }
    }
}

/// Splits config text into assignments. Syntax problems are returned together.
pub fn parse_entries(text: &str) -> std::result::Result<Vec<Entry>, Vec<ConfigIssue>> {
    let mut entries = Vec::new();
    let mut issues = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let content = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        };
        if content.trim().is_empty() {
            continue;
        }
        let Some(eq) = content.find('=') else {
            let col = content.len() - content.trim_start().len() + 1;
            issues.push(ConfigIssue {
                line: Some(line_no),
                column: Some(col),
                key: None,
                message: "expected `key = value`".into(),
            });
            continue;
        };
        let key = content[..eq].trim();
        let key_col = content.len() - content.trim_start().len() + 1;
        if key.is_empty() || !key.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
            issues.push(ConfigIssue {
                line: Some(line_no),
                column: Some(key_col),
                key: None,
                message: format!("invalid key {key:?}"),
            });
            continue;
        }
        let after = &content[eq + 1..];
        let value = after.trim();
        let value_column = eq + 2 + (after.len() - after.trim_start().len());
        entries.push(Entry { key: key.replace('-', "_"), value: value.to_string(), line: Some(line_no), value_column });
    }
    if issues.is_empty() {
        Ok(entries)
    } else {
        Err(issues)
    }
}

/// Evenly spaced energies `lo, …, hi` (inclusive), written `lo:hi:count`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

impl Grid {
    pub fn new(lo: f64, hi: f64, count: usize) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::InvalidInput(format!("grid bounds must be finite with lo < hi, got {lo}:{hi}")));
        }
        if count < 2 {
            return Err(Error::InvalidInput("grid needs at least 2 points".into()));
        }
        Ok(Self { lo, hi, count })
    }

    pub fn spacing(&self) -> f64 {
        (self.hi - self.lo) / (self.count - 1) as f64
    }

    pub fn points(&self) -> Vec<f64> {
        let step = self.spacing();
        (0..self.count)
            .map(|i| if i + 1 == self.count { self.hi } else { self.lo + step * i as f64 })
            .collect()
    }
}

impl fmt::Display for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.lo, self.hi, self.count)
    }
}

pub fn parse_grid(input: &str) -> std::result::Result<Grid, ParseError> {
    let parts: Vec<&str> = input.split(':').collect();
    if parts.len() != 3 {
        return Err(ParseError::new(input.len(), "expected `lo:hi:count`"));
    }
    let lo_start = 0;
    let hi_start = parts[0].len() + 1;
    let count_start = hi_start + parts[1].len() + 1;
    let lo = parse_number::<f64>(parts[0], lo_start)?;
    let hi = parse_number::<f64>(parts[1], hi_start)?;
    let count = parse_number::<usize>(parts[2], count_start)?;
    if !(lo.is_finite() && hi.is_finite()) {
        return Err(ParseError::new(lo_start, "grid bounds must be finite"));
    }
    if lo >= hi {
        return Err(ParseError::new(hi_start, format!("grid upper bound {hi} must exceed lower bound {lo}")));
    }
    if count < 2 {
        return Err(ParseError::new(count_start, "grid needs at least 2 points"));
    }
    Ok(Grid { lo, hi, count })
}

impl FromStr for Grid {
    type Err = ParseError;

    fn from_str(s: &str) -> std::result::Result<Self, ParseError> {
        parse_grid(s)
    }
}

fn parse_number<T: FromStr>(s: &str, offset: usize) -> std::result::Result<T, ParseError> {
    if s.is_empty() {
        return Err(ParseError::new(offset, "expected a number"));
    }
    if let Some(bad) = s.find(|c: char| !(c.is_ascii_digit() || matches!(c, '+' | '-' | '.' | 'e' | 'E'))) {
        return Err(ParseError::new(offset + bad, format!("unexpected character {:?}", s[bad..].chars().next().unwrap())));
    }
    s.parse::<T>().map_err(|_| ParseError::new(offset, format!("invalid number {s:?}")))
}

/// Comma-separated list; positions in errors are relative to the start of `s`.
fn parse_list<T: FromStr>(s: &str) -> std::result::Result<Vec<T>, ParseError> {
    let mut out = Vec::new();
    let mut offset = 0;
    for part in s.split(',') {
        let trimmed = part.trim();
        let lead = part.len() - part.trim_start().len();
        out.push(parse_number::<T>(trimmed, offset + lead)?);
        offset += part.len() + 1;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Wegner,
    Minami,
    Count,
    TwoEv,
    Poisson,
    Blocks,
    Dos,
    Lyapunov,
    Separation,
    Repulsion,
    Interlace,
    Holder,
}

impl Experiment {
    pub const ALL: [Experiment; 12] = [
        Self::Wegner,
        Self::Minami,
        Self::Count,
        Self::TwoEv,
        Self::Poisson,
        Self::Blocks,
        Self::Dos,
        Self::Lyapunov,
        Self::Separation,
        Self::Repulsion,
        Self::Interlace,
        Self::Holder,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Wegner => "wegner",
            Self::Minami => "minami",
            Self::Count => "count",
            Self::TwoEv => "two-ev",
            Self::Poisson => "poisson",
            Self::Blocks => "blocks",
            Self::Dos => "dos",
            Self::Lyapunov => "lyapunov",
            Self::Separation => "separation",
            Self::Repulsion => "repulsion",
            Self::Interlace => "interlace",
            Self::Holder => "holder",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown experiment {s:?}")))
    }
}

/// How entries of `delta` are read: as half-widths, or as `δ·N` (half-width `value / N`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeltaMode {
    Absolute,
    PerN,
}

impl fmt::Display for DeltaMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Absolute => "absolute",
            Self::PerN => "per_n",
        })
    }
}

/// Fully resolved experiment settings. Every field has a default, which may
/// depend on the experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub dist: SiteDistribution,
    /// System sizes.
    pub n: Vec<usize>,
    /// Interval half-widths: the window is `[E0 - δ, E0 + δ)`.
    pub delta: Vec<f64>,
    pub delta_mode: DeltaMode,
    pub e0: f64,
    /// Rescaled window length for local statistics.
    pub l: f64,
    pub r: usize,
    pub seed: u64,
    pub k: f64,
    pub k1: f64,
    pub workers: usize,
    pub grid: Grid,
    /// DOS smoothing bandwidth.
    pub h: f64,
    /// Realizations and size of the independent DOS run used for `k̂(E0)`.
    pub dos_r: usize,
    pub dos_n: usize,
    /// Bisection tolerance relative to `‖diag‖_∞ + 2`.
    pub tol: f64,
    /// Close-pair threshold; `0` selects `N^-3`.
    pub threshold: f64,
    /// Close-pair runs extend the realization count until this many pairs are
    /// found or `max_r` realizations have been used.
    pub min_pairs: usize,
    pub max_r: usize,
    pub quantiles: Vec<f64>,
    /// Transfer-matrix steps per Lyapunov replica.
    pub steps: usize,
    pub theta: f64,
    /// Inner draws of `v_j` per outer realization in spectral averaging.
    pub inner: usize,
    /// Energy window `[lo, hi]` scanned by the IDS Hölder fit.
    pub window: [f64; 2],
    pub window_points: usize,
    /// Minimum `N / log(2 + 1/δ)` for Minami-type runs.
    pub c1: f64,
    /// Localization onset radius in units of `log N`.
    pub onset: f64,
    pub out: Option<PathBuf>,
}

const KEYS: &[&str] = &[
    "dist",
    "lambda",
    "n",
    "delta",
    "delta_mode",
    "e0",
    "l",
    "r",
    "seed",
    "k",
    "k1",
    "workers",
    "grid",
    "h",
    "dos_r",
    "dos_n",
    "tol",
    "threshold",
    "min_pairs",
    "max_r",
    "quantiles",
    "steps",
    "theta",
    "inner",
    "window",
    "window_points",
    "c1",
    "onset",
    "out",
];

fn dyadic(from: i32, to: i32) -> Vec<f64> {
    (from..=to).map(|k| 2f64.powi(-k)).collect()
}

impl ExperimentConfig {
    pub fn defaults(experiment: Experiment) -> Self {
        use Experiment::*;
        let dist = match experiment {
            Separation | Repulsion => SiteDistribution::bernoulli(0.5).expect("valid"),
            _ => SiteDistribution::uniform(0.0, 1.0).expect("valid"),
        };
        let n = match experiment {
            Wegner => vec![100],
            Minami | TwoEv => vec![200],
            Holder => vec![500],
            Lyapunov => vec![100, 200, 400],
            Separation => vec![100, 200, 400],
            Repulsion => vec![2000],
            Interlace => vec![50],
            _ => vec![1000],
        };
        let (delta, delta_mode) = match experiment {
            Wegner => (dyadic(9, 14), DeltaMode::Absolute),
            Minami => (dyadic(2, 8), DeltaMode::Absolute),
            TwoEv => (dyadic(4, 9), DeltaMode::Absolute),
            Holder => (dyadic(3, 9), DeltaMode::Absolute),
            _ => (vec![5.0], DeltaMode::PerN),
        };
        let mut cfg = Self {
            experiment,
            e0: dist.default_energy(),
            grid: Grid { lo: -3.0, hi: 3.0, count: 601 },
            window: [0.0, 0.0],
            dist,
            n,
            delta,
            delta_mode,
            l: 20.0,
            r: 1000,
            seed: 0,
            k: 16.0,
            k1: 1.0,
            workers: 1,
            h: 0.05,
            dos_r: 500,
            dos_n: 1000,
            tol: crate::tridiag::DEFAULT_RELATIVE_TOL,
            threshold: 0.0,
            min_pairs: 20,
            max_r: 1_000_000,
            quantiles: vec![0.5, 0.9, 0.99],
            steps: 10_000,
            theta: 0.5,
            inner: 64,
            window_points: 200,
            c1: 10.0,
            onset: 3.0,
            out: None,
        };
        cfg.refresh_dist_defaults();
        cfg
    }

    fn refresh_dist_defaults(&mut self) {
        self.e0 = self.dist.default_energy();
        let (lo, hi) = self.dist.spectral_support();
        self.grid = Grid { lo: lo - 0.5, hi: hi + 0.5, count: 601 };
        self.window = [self.e0 - 0.5, self.e0 + 0.5];
    }

    /// Builds a config from optional file text plus overrides (overrides win).
    pub fn from_sources(experiment: Experiment, file: Option<&str>, overrides: &[Entry]) -> Result<Self> {
        let mut entries = match file {
            Some(text) => parse_entries(text).map_err(Error::Config)?,
            None => Vec::new(),
        };
        entries.extend(overrides.iter().cloned());
        Self::from_entries(experiment, &entries)
    }

    pub fn from_entries(experiment: Experiment, entries: &[Entry]) -> Result<Self> {
        let mut issues = Vec::new();
        // last assignment wins
        let mut effective: BTreeMap<&str, &Entry> = BTreeMap::new();
        for e in entries {
            if !KEYS.contains(&e.key.as_str()) {
                issues.push(ConfigIssue { column: e.line.map(|_| 1), ..ConfigIssue::at(e, 0, "unknown key") });
                continue;
            }
            effective.insert(e.key.as_str(), e);
        }

        let mut cfg = Self::defaults(experiment);
        let e0_explicit = effective.contains_key("e0");
        let grid_explicit = effective.contains_key("grid");
        let window_explicit = effective.contains_key("window");

        if let Some(e) = effective.get("dist") {
            match e.value.parse::<SiteDistribution>() {
                Ok(d) => {
                    cfg.dist = d;
                    cfg.refresh_dist_defaults();
                }
                Err(err) => issues.push(ConfigIssue::at(e, err.position, err.message)),
            }
        }
        if let Some(e) = effective.get("lambda") {
            match parse_number::<f64>(&e.value, 0) {
                Ok(v) => match cfg.dist.with_coupling(v) {
                    Ok(d) => {
                        cfg.dist = d;
                        cfg.refresh_dist_defaults();
                    }
                    Err(err) => issues.push(ConfigIssue::at(e, 0, err.to_string())),
                },
                Err(err) => issues.push(ConfigIssue::at(e, err.position, err.message)),
            }
        }

        fn set<T: FromStr>(effective: &BTreeMap<&str, &Entry>, issues: &mut Vec<ConfigIssue>, key: &str, slot: &mut T) {
            if let Some(e) = effective.get(key) {
                match parse_number::<T>(&e.value, 0) {
                    Ok(v) => *slot = v,
                    Err(err) => issues.push(ConfigIssue::at(e, err.position, err.message)),
                }
            }
        }
        fn set_list<T: FromStr>(effective: &BTreeMap<&str, &Entry>, issues: &mut Vec<ConfigIssue>, key: &str, slot: &mut Vec<T>) {
            if let Some(e) = effective.get(key) {
                match parse_list::<T>(&e.value) {
                    Ok(v) => *slot = v,
                    Err(err) => issues.push(ConfigIssue::at(e, err.position, err.message)),
                }
            }
        }

        set_list(&effective, &mut issues, "n", &mut cfg.n);
        set_list(&effective, &mut issues, "delta", &mut cfg.delta);
        set_list(&effective, &mut issues, "quantiles", &mut cfg.quantiles);
        set(&effective, &mut issues, "e0", &mut cfg.e0);
        set(&effective, &mut issues, "l", &mut cfg.l);
        set(&effective, &mut issues, "r", &mut cfg.r);
        set(&effective, &mut issues, "seed", &mut cfg.seed);
        set(&effective, &mut issues, "k", &mut cfg.k);
        set(&effective, &mut issues, "k1", &mut cfg.k1);
        set(&effective, &mut issues, "workers", &mut cfg.workers);
        set(&effective, &mut issues, "h", &mut cfg.h);
        set(&effective, &mut issues, "dos_r", &mut cfg.dos_r);
        set(&effective, &mut issues, "dos_n", &mut cfg.dos_n);
        set(&effective, &mut issues, "tol", &mut cfg.tol);
        set(&effective, &mut issues, "threshold", &mut cfg.threshold);
        set(&effective, &mut issues, "min_pairs", &mut cfg.min_pairs);
        set(&effective, &mut issues, "max_r", &mut cfg.max_r);
        set(&effective, &mut issues, "steps", &mut cfg.steps);
        set(&effective, &mut issues, "theta", &mut cfg.theta);
        set(&effective, &mut issues, "inner", &mut cfg.inner);
        set(&effective, &mut issues, "window_points", &mut cfg.window_points);
        set(&effective, &mut issues, "c1", &mut cfg.c1);
        set(&effective, &mut issues, "onset", &mut cfg.onset);

        if let Some(e) = effective.get("delta_mode") {
            match e.value.as_str() {
                "absolute" => cfg.delta_mode = DeltaMode::Absolute,
                "per_n" => cfg.delta_mode = DeltaMode::PerN,
                other => issues.push(ConfigIssue::at(e, 0, format!("expected `absolute` or `per_n`, got {other:?}"))),
            }
        }
        if let Some(e) = effective.get("grid") {
            match parse_grid(&e.value) {
                Ok(g) => cfg.grid = g,
                Err(err) => issues.push(ConfigIssue::at(e, err.position, err.message)),
            }
        }
        if let Some(e) = effective.get("window") {
            match parse_list::<f64>(&e.value) {
                Ok(v) if v.len() == 2 => cfg.window = [v[0], v[1]],
                Ok(_) => issues.push(ConfigIssue::at(e, 0, "expected two energies `lo,hi`")),
                Err(err) => issues.push(ConfigIssue::at(e, err.position, err.message)),
            }
        }
        if let Some(e) = effective.get("out") {
            cfg.out = (!e.value.is_empty()).then(|| PathBuf::from(&e.value));
        }
        if e0_explicit && !window_explicit {
            cfg.window = [cfg.e0 - 0.5, cfg.e0 + 0.5];
        }
        let _ = grid_explicit;

        issues.extend(cfg.check());
        if issues.is_empty() {
            Ok(cfg)
        } else {
            Err(Error::Config(issues))
        }
    }

    /// Semantic validation against the experiment's preconditions.
    pub fn check(&self) -> Vec<ConfigIssue> {
        use Experiment::*;
        let mut issues = Vec::new();
        let mut bad = |key: &str, msg: String| issues.push(ConfigIssue::global(key, msg));

        if self.n.is_empty() || self.n.contains(&0) {
            bad("n", "system sizes must be positive".into());
        }
        if self.delta.is_empty() || self.delta.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
            bad("delta", "interval half-widths must be positive".into());
        }
        if self.r == 0 {
            bad("r", "need at least one realization".into());
        }
        if self.workers == 0 {
            bad("workers", "need at least one worker".into());
        }
        if !self.e0.is_finite() {
            bad("e0", "energy must be finite".into());
        }
        if !(self.tol > 0.0 && self.tol < 1e-3) {
            bad("tol", format!("relative tolerance must lie in (0, 1e-3), got {}", self.tol));
        }
        if !(self.h > 0.0) {
            bad("h", "bandwidth must be positive".into());
        }
        if self.quantiles.iter().any(|q| !(0.0..=1.0).contains(q)) {
            bad("quantiles", "quantiles must lie in [0, 1]".into());
        }
        if self.threshold < 0.0 {
            bad("threshold", "threshold must be nonnegative".into());
        }
        if self.max_r < self.r {
            bad("max_r", format!("max_r = {} is below r = {}", self.max_r, self.r));
        }
        if !(self.window[0] < self.window[1]) {
            bad("window", "window must satisfy lo < hi".into());
        }

        let needs_holder = matches!(self.experiment, Wegner | Minami | TwoEv);
        if needs_holder && !self.dist.is_holder() {
            bad("dist", format!("{} requires a Hölder-regular distribution (uniform or Cantor)", self.experiment));
        }
        if matches!(self.experiment, Separation | Repulsion) && !matches!(self.dist.kind(), crate::DistKind::Bernoulli { .. }) {
            bad("dist", format!("{} requires a Bernoulli distribution", self.experiment));
        }
        if matches!(self.experiment, Wegner | Minami | TwoEv | Holder) {
            let (lo, hi) = self.delta.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &d| (lo.min(d), hi.max(d)));
            if self.delta.len() < 2 || hi / lo < 10f64.powf(1.5) * (1.0 - 1e-12) {
                bad("delta", "scaling fits need a δ sweep spanning at least 1.5 decades".into());
            }
            if self.r < 100 {
                bad("r", "slope fits need at least 100 realizations".into());
            }
        }
        if matches!(self.experiment, Minami | TwoEv) {
            for &n in &self.n {
                for d in self.deltas(n) {
                    if (n as f64) < self.c1 * (2.0 + 1.0 / d).ln() {
                        bad("n", format!("N = {n} is below c1·log(2 + 1/δ) = {:.1} for δ = {d}", self.c1 * (2.0 + 1.0 / d).ln()));
                    }
                }
            }
        }
        if matches!(self.experiment, Poisson | Blocks) {
            if !(5.0..=50.0).contains(&self.l) {
                bad("l", format!("window length must lie in [5, 50], got {}", self.l));
            }
            if self.n.iter().any(|&n| n < 500) {
                bad("n", "local statistics need N >= 500".into());
            }
        }
        if self.experiment == Blocks {
            if !(self.k1 >= 1.0) {
                bad("k1", "buffer multiplier K1 must be at least 1".into());
            }
            if self.k < 8.0 * self.k1 {
                bad("k", format!("block partition needs K >= 8·K1, got K = {} and K1 = {}", self.k, self.k1));
            }
        }
        if self.experiment == Lyapunov && self.steps < 1000 {
            bad("steps", "Lyapunov estimates need at least 1000 steps".into());
        }
        if self.experiment == Lyapunov && !(self.theta > 0.0 && self.theta < 1.0) {
            bad("theta", "threshold fraction must lie in (0, 1)".into());
        }
        if self.experiment == Dos && self.h < 2.0 * self.grid.spacing() {
            bad("h", format!("bandwidth {} is below twice the grid spacing {}", self.h, self.grid.spacing()));
        }
        issues
    }

    /// Half-widths for system size `n`.
    pub fn deltas(&self, n: usize) -> Vec<f64> {
        match self.delta_mode {
            DeltaMode::Absolute => self.delta.clone(),
            DeltaMode::PerN => self.delta.iter().map(|d| d / n as f64).collect(),
        }
    }

    /// Bisection tolerance for an operator of the given scale.
    pub fn absolute_tol(&self, scale: f64) -> f64 {
        self.tol * scale
    }

    /// Canonical text form with every default filled in; it parses back to `self`.
    pub fn normalized(&self) -> String {
        fn join<T: fmt::Display>(v: &[T]) -> String {
            v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
        }
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            s.push_str(k);
            s.push_str(" = ");
            s.push_str(&v);
            s.push('\n');
        };
        put("# experiment", self.experiment.to_string());
        put("dist", self.dist.to_string());
        put("n", join(&self.n));
        put("delta", join(&self.delta));
        put("delta_mode", self.delta_mode.to_string());
        put("e0", self.e0.to_string());
        put("l", self.l.to_string());
        put("r", self.r.to_string());
        put("seed", self.seed.to_string());
        put("k", self.k.to_string());
        put("k1", self.k1.to_string());
        put("grid", self.grid.to_string());
        put("h", self.h.to_string());
        put("dos_r", self.dos_r.to_string());
        put("dos_n", self.dos_n.to_string());
        put("tol", self.tol.to_string());
        put("threshold", self.threshold.to_string());
        put("min_pairs", self.min_pairs.to_string());
        put("max_r", self.max_r.to_string());
        put("quantiles", join(&self.quantiles));
        put("steps", self.steps.to_string());
        put("theta", self.theta.to_string());
        put("inner", self.inner.to_string());
        put("window", join(&self.window));
        put("window_points", self.window_points.to_string());
        put("c1", self.c1.to_string());
        put("onset", self.onset.to_string());
        s
    }

    /// Git-style content hash (`sha256("blob <len>\0" + text)`) of [`Self::normalized`].
    /// Worker count and output location do not enter the hash.
    pub fn content_hash(&self) -> String {
        let text = self.normalized();
        let mut hasher = Sha256::new();
        hasher.update(format!("blob {}\0", text.len()).as_bytes());
        hasher.update(text.as_bytes());
        hex::encode(hasher.finalize())
    }
}
