//! Site distributions, reproducible potentials and the Dirichlet operator `H_N`.

mod grammar;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::rng::{counter_u64, streams, unit_f64};
use crate::{Error, Result};

pub use grammar::{parse_distribution, ParseError};

/// Default number of ternary digits drawn by the Cantor sampler.
pub const DEFAULT_CANTOR_DEPTH: u32 = 40;

/// Family of the single-site law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DistKind {
    /// Uniform on `[a, b]`; `a == b` is the zero-disorder point mass.
    Uniform { a: f64, b: f64 },
    /// Cantor measure on `[0, 1]`, sampled with `depth` ternary digits.
    Cantor { depth: u32 },
    /// `P[v = 1] = p`, `P[v = 0] = 1 - p`.
    Bernoulli { p: f64 },
}

/// Single-site law `μ` together with the coupling `λ` multiplying the potential.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SiteDistribution {
    kind: DistKind,
    coupling: f64,
}

impl SiteDistribution {
    pub fn new(kind: DistKind, coupling: f64) -> Result<Self> {
        if !coupling.is_finite() {
            return Err(Error::InvalidDistribution(format!("coupling must be finite, got {coupling}")));
        }
        match kind {
            DistKind::Uniform { a, b } => {
                if !a.is_finite() || !b.is_finite() {
                    return Err(Error::InvalidDistribution("interval bounds must be finite".into()));
                }
                if a > b {
                    return Err(Error::InvalidDistribution(format!("interval bounds out of order: {a} > {b}")));
                }
            }
            DistKind::Cantor { depth } => {
                if depth == 0 {
                    return Err(Error::InvalidDistribution("cantor depth must be positive".into()));
                }
            }
            DistKind::Bernoulli { p } => {
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::InvalidDistribution(format!("probability out of range: {p}")));
                }
            }
        }
        Ok(Self { kind, coupling })
    }

    pub fn uniform(a: f64, b: f64) -> Result<Self> {
        Self::new(DistKind::Uniform { a, b }, 1.0)
    }

    pub fn cantor(depth: u32) -> Result<Self> {
        Self::new(DistKind::Cantor { depth }, 1.0)
    }

    pub fn bernoulli(p: f64) -> Result<Self> {
        Self::new(DistKind::Bernoulli { p }, 1.0)
    }

    pub fn with_coupling(self, coupling: f64) -> Result<Self> {
        Self::new(self.kind, coupling)
    }

    pub fn kind(&self) -> DistKind {
        self.kind
    }

    pub fn coupling(&self) -> f64 {
        self.coupling
    }

    /// Declared Hölder exponent of `μ`; `None` for laws that are not Hölder
    /// regular (Bernoulli, and the degenerate uniform point mass).
    pub fn holder_exponent(&self) -> Option<f64> {
        match self.kind {
            DistKind::Uniform { a, b } if a < b => Some(1.0),
            DistKind::Uniform { .. } => None,
            DistKind::Cantor { .. } => Some(std::f64::consts::LN_2 / 3f64.ln()),
            DistKind::Bernoulli { .. } => None,
        }
    }

    pub fn is_holder(&self) -> bool {
        self.holder_exponent().is_some()
    }

    /// Closed interval containing every sample (pre-coupling).
    pub fn support(&self) -> (f64, f64) {
        match self.kind {
            DistKind::Uniform { a, b } => (a, b),
            DistKind::Cantor { .. } | DistKind::Bernoulli { .. } => (0.0, 1.0),
        }
    }

    /// Range of the diagonal `λ v`.
    pub fn diagonal_range(&self) -> (f64, f64) {
        let (lo, hi) = self.support();
        let (x, y) = (self.coupling * lo, self.coupling * hi);
        (x.min(y), x.max(y))
    }

    /// Centre of the diagonal's range; the default reference energy.
    pub fn default_energy(&self) -> f64 {
        let (lo, hi) = self.diagonal_range();
        0.5 * (lo + hi)
    }

    /// Interval certainly containing the spectrum of every `H_N`.
    pub fn spectral_support(&self) -> (f64, f64) {
        let (lo, hi) = self.diagonal_range();
        (lo - 2.0, hi + 2.0)
    }

    /// Draw for `site` of realization `realization`; a pure function of its arguments.
    pub fn sample_site(&self, master_seed: u64, realization: u64, site: u64) -> f64 {
        let bits = counter_u64(master_seed, streams::POTENTIAL, realization, site);
        match self.kind {
            DistKind::Uniform { a, b } => {
                if a == b {
                    a
                } else {
                    let x = a + (b - a) * unit_f64(bits);
                    x.min(b)
                }
            }
            DistKind::Bernoulli { p } => {
                if unit_f64(bits) < p {
                    1.0
                } else {
                    0.0
                }
            }
            DistKind::Cantor { depth } => {
                cantor_from_bits(depth, |word| {
                    if word == 0 {
                        bits
                    } else {
                        counter_u64(master_seed, streams::POTENTIAL ^ word, realization, site)
                    }
                })
            }
        }
    }

    /// Cumulative distribution `μ((-∞, x])` of the (pre-coupling) site law.
    pub fn cdf(&self, x: f64) -> f64 {
        match self.kind {
            DistKind::Uniform { a, b } => {
                if x < a {
                    0.0
                } else if x >= b {
                    1.0
                } else {
                    (x - a) / (b - a)
                }
            }
            DistKind::Bernoulli { p } => {
                if x < 0.0 {
                    0.0
                } else if x < 1.0 {
                    1.0 - p
                } else {
                    1.0
                }
            }
            DistKind::Cantor { depth } => cantor_cdf(depth, x),
        }
    }

    /// `μ([lo, hi])` for `lo <= hi`, ignoring atoms at `lo` (none for the Hölder laws).
    pub fn interval_mass(&self, lo: f64, hi: f64) -> f64 {
        (self.cdf(hi) - self.cdf(lo)).max(0.0)
    }
}

/// Maps `depth` fair bits (most significant first, 64 per word) to `Σ 2 b_k 3^{-k}`.
fn cantor_from_bits(depth: u32, mut word: impl FnMut(u64) -> u64) -> f64 {
    let depth = depth as u64;
    let words = depth.div_ceil(64);
    let mut x = 0.0;
    // Horner from the deepest digit keeps the sum exact to rounding at each step.
    for w in (0..words).rev() {
        let bits = word(w);
        let in_word = if w == words - 1 { depth - 64 * w } else { 64 };
        for k in (0..in_word).rev() {
            let b = (bits >> (63 - k)) & 1;
            x = (x + 2.0 * b as f64) / 3.0;
        }
    }
    x
}

/// Cantor function truncated to `depth` levels: the law of `Σ_{k<=depth} 2 b_k 3^{-k}`.
fn cantor_cdf(depth: u32, x: f64) -> f64 {
    if x < 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let mut y = x;
    let mut acc = 0.0;
    let mut weight = 1.0;
    // Beyond ~60 levels the ternary digits of a double are rounding noise.
    for _ in 0..depth.min(60) {
        y *= 3.0;
        weight *= 0.5;
        if y >= 2.0 {
            acc += weight;
            y -= 2.0;
        } else if y >= 1.0 {
            return acc + weight;
        }
    }
    // remaining atom sits at the left end of the current cell
    acc + weight
}

impl fmt::Display for SiteDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            DistKind::Uniform { a, b } => write!(f, "uniform:{a},{b}")?,
            DistKind::Cantor { depth } => write!(f, "cantor:{depth}")?,
            DistKind::Bernoulli { p } => write!(f, "bernoulli:{p}")?,
        }
        if self.coupling != 1.0 {
            write!(f, "@lambda={}", self.coupling)?;
        }
        Ok(())
    }
}

impl FromStr for SiteDistribution {
    type Err = ParseError;

    fn from_str(s: &str) -> std::result::Result<Self, ParseError> {
        parse_distribution(s)
    }
}

impl Serialize for SiteDistribution {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for SiteDistribution {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// IID potential values `v_0 .. v_{N-1}` (pre-coupling).
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialSample {
    pub values: Vec<f64>,
    pub master_seed: u64,
    pub realization_index: u64,
}

impl PotentialSample {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

pub fn sample_potential(dist: &SiteDistribution, n: usize, master_seed: u64, realization_index: u64) -> Result<PotentialSample> {
    if n == 0 {
        return Err(Error::InvalidInput("potential length must be at least 1".into()));
    }
    let values = (0..n as u64)
        .map(|site| dist.sample_site(master_seed, realization_index, site))
        .collect();
    Ok(PotentialSample { values, master_seed, realization_index })
}

/// Symmetric tridiagonal `H_N` with diagonal `λ v_n` and unit off-diagonals.
#[derive(Debug, Clone, PartialEq)]
pub struct TridiagonalOperator {
    diagonal: Vec<f64>,
}

impl TridiagonalOperator {
    pub fn new(diagonal: Vec<f64>) -> Result<Self> {
        if diagonal.is_empty() {
            return Err(Error::InvalidInput("operator needs at least one site".into()));
        }
        if let Some(bad) = diagonal.iter().find(|d| !d.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite diagonal entry {bad}")));
        }
        Ok(Self { diagonal })
    }

    /// Free Laplacian on `n` sites.
    pub fn free(n: usize) -> Result<Self> {
        Self::new(vec![0.0; n])
    }

    pub fn n(&self) -> usize {
        self.diagonal.len()
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diagonal
    }

    pub fn max_abs_diagonal(&self) -> f64 {
        self.diagonal.iter().fold(0.0f64, |m, d| m.max(d.abs()))
    }

    /// `‖diag‖_∞ + 2`, an upper bound for the operator norm.
    pub fn scale(&self) -> f64 {
        self.max_abs_diagonal() + 2.0
    }

    /// Gershgorin interval `[min d - 2, max d + 2]`.
    pub fn spectral_bounds(&self) -> (f64, f64) {
        let (lo, hi) = self
            .diagonal
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &d| (lo.min(d), hi.max(d)));
        (lo - 2.0, hi + 2.0)
    }

    pub fn trace(&self) -> f64 {
        self.diagonal.iter().sum()
    }

    /// Copy with diagonal entry `site` replaced.
    pub fn with_site(&self, site: usize, value: f64) -> Self {
        let mut diagonal = self.diagonal.clone();
        diagonal[site] = value;
        Self { diagonal }
    }

    /// Dirichlet restriction to the sites `range`.
    pub fn restrict(&self, range: std::ops::Range<usize>) -> Result<Self> {
        if range.start >= range.end || range.end > self.n() {
            return Err(Error::InvalidInput(format!("box {range:?} is not inside [0, {})", self.n())));
        }
        Self::new(self.diagonal[range].to_vec())
    }

    /// `y = H x`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.n();
        assert_eq!(x.len(), n);
        (0..n)
            .map(|i| {
                let mut y = self.diagonal[i] * x[i];
                if i > 0 {
                    y += x[i - 1];
                }
                if i + 1 < n {
                    y += x[i + 1];
                }
                y
            })
            .collect()
    }

    /// `‖(H - E) x‖₂`.
    pub fn residual_norm(&self, energy: f64, x: &[f64]) -> f64 {
        self.apply(x)
            .iter()
            .zip(x)
            .map(|(hx, xi)| {
                let r = hx - energy * xi;
                r * r
            })
            .sum::<f64>()
            .sqrt()
    }
}

pub fn assemble_operator(potential: &PotentialSample, coupling: f64) -> TridiagonalOperator {
    let diagonal = potential.values.iter().map(|v| coupling * v).collect();
    TridiagonalOperator::new(diagonal).expect("potential samples are non-empty and finite")
}

/// Samples the potential for `realization` and assembles `H_N` with the distribution's coupling.
pub fn sample_operator(dist: &SiteDistribution, n: usize, master_seed: u64, realization: u64) -> Result<TridiagonalOperator> {
    let potential = sample_potential(dist, n, master_seed, realization)?;
    Ok(assemble_operator(&potential, dist.coupling()))
}

/// Empirical Hölder exponent and constant from a scan of dyadic/triadic intervals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HolderCertificate {
    /// `min log μ(I) / log |I|` over the natural grid of the law.
    pub beta_hat: f64,
    /// `max μ(I) / |I|^β` (declared β) over every scanned interval.
    pub worst_constant: f64,
    pub intervals_scanned: usize,
}

/// Scans intervals down to `levels` refinement levels.
///
/// Uniform laws use the dyadic subdivision of their support, Cantor laws the
/// triadic one; the constant is also probed on dyadic intervals for Cantor.
pub fn holder_certificate(dist: &SiteDistribution, levels: u32) -> Result<HolderCertificate> {
    let beta = dist
        .holder_exponent()
        .ok_or_else(|| Error::NotHolder(format!("{dist} is not Hölder regular")))?;
    if levels == 0 {
        return Err(Error::InvalidInput("need at least one refinement level".into()));
    }
    const MAX_PER_LEVEL: u64 = 1 << 14;
    let mut beta_hat = f64::INFINITY;
    let mut worst = 0.0f64;
    let mut scanned = 0usize;
    let mut visit = |lo: f64, hi: f64, exponent_grid: bool| {
        let len = hi - lo;
        let mass = dist.interval_mass(lo, hi);
        if mass <= 0.0 {
            return;
        }
        scanned += 1;
        worst = worst.max(mass / len.powf(beta));
        if exponent_grid && len < 1.0 {
            beta_hat = beta_hat.min(mass.ln() / len.ln());
        }
    };
    let (a, b) = dist.support();
    match dist.kind() {
        DistKind::Uniform { .. } => {
            for k in 1..=levels.min(40) {
                let cells = 1u64 << k;
                let stride = (cells / MAX_PER_LEVEL).max(1);
                let width = (b - a) / cells as f64;
                for j in (0..cells).step_by(stride as usize) {
                    let lo = a + j as f64 * width;
                    visit(lo, lo + width, true);
                }
            }
        }
        DistKind::Cantor { depth } => {
            // The triadic cells that meet the Cantor set are the 2^k stage-k intervals.
            for k in 1..=levels.min(depth).min(30) {
                let width = 3f64.powi(-(k as i32));
                let cells = 1u64 << k;
                let stride = (cells / MAX_PER_LEVEL).max(1);
                for j in (0..cells).step_by(stride as usize) {
                    let mut lo = 0.0;
                    for bit in 0..k {
                        if (j >> (k - 1 - bit)) & 1 == 1 {
                            lo += 2.0 * 3f64.powi(-(bit as i32 + 1));
                        }
                    }
                    visit(lo, lo + width, true);
                }
            }
            let dyadic_levels = ((levels as f64) * 3f64.log2()).ceil() as u32;
            for m in 1..=dyadic_levels.min(40) {
                let cells = 1u64 << m;
                let stride = (cells / MAX_PER_LEVEL).max(1);
                let width = 1.0 / cells as f64;
                for j in (0..cells).step_by(stride as usize) {
                    let lo = j as f64 * width;
                    visit(lo, lo + width, false);
                }
            }
        }
        DistKind::Bernoulli { .. } => unreachable!("rejected above"),
    }
    Ok(HolderCertificate { beta_hat, worst_constant: worst, intervals_scanned: scanned })
}
