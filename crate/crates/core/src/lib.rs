//! Spectral analysis and Monte Carlo eigenvalue statistics for one-dimensional
//! Anderson models `H = λV + Δ` restricted to `[0, N)` with Dirichlet boundary.
//!
//! The crate is organised bottom-up:
//!
//! * [`model`] — site distributions, reproducible potential sampling, operator assembly;
//! * [`tridiag`] — Sturm counting, bisection eigenvalues, inverse-iteration eigenvectors;
//! * [`transfer`] — the `SL(2, ℝ)` transfer-matrix cocycle and Lyapunov estimates;
//! * [`spectral`] — IDS/DOS estimation, localization profiles, spectral averaging;
//! * [`ensemble`] — seeded Monte Carlo experiments producing [`ensemble::EnsembleSummary`];
//! * [`config`] — the flat `key = value` experiment configuration format.
//!
//! Sites are indexed from 0 throughout the API.

pub mod config;
pub mod ensemble;
mod error;
pub mod model;
pub mod rng;
pub mod spectral;
pub mod stats;
pub mod transfer;
pub mod tridiag;

pub use error::{Error, Result};
pub use model::{assemble_operator, sample_potential, DistKind, PotentialSample, SiteDistribution, TridiagonalOperator};
pub use tridiag::{EigenPair, SpectrumSlice};
