use thiserror::Error;

use crate::config::ConfigIssue;
use crate::model::ParseError;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error(transparent)]
    Parse(#[from] ParseError),

    #[error("distribution is not Hölder regular: {0}")]
    NotHolder(String),

    #[error("inverse iteration did not converge at E = {energy}: best residual {best_residual:e}")]
    NoConvergence { energy: f64, best_residual: f64 },

    #[error("internal consistency: expected {expected} eigenvalues, found {found}")]
    CountMismatch { expected: usize, found: usize },

    #[error("tolerance {tol:e} is too coarse for an observed gap of {gap:e}; refine the tolerance")]
    ToleranceTooCoarse { tol: f64, gap: f64 },

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("configuration has {} problem(s):\n{}", .0.len(), format_issues(.0))]
    Config(Vec<ConfigIssue>),
}

fn format_issues(issues: &[ConfigIssue]) -> String {
    issues
        .iter()
        .map(|i| format!("  {i}"))
        .collect::<Vec<_>>()
        .join("\n")
}
