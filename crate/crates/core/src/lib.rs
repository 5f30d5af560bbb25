//! Sparse deep network estimation for semiparametric spatial regression.
//!
//! The library covers the full pipeline used in the empirical study:
//!
//! * [`grf`] — covariance models (exponential, half-integer Matérn), Gaussian
//!   random field simulation via Cholesky factorisation, and trace utilities.
//! * [`netcore`] — the sparse ReLU network class with shifted activations,
//!   mini-batch Adam training with an L1 proximal step, and restart selection.
//! * [`baselines`] — Nadaraya–Watson kernel regression and a penalised
//!   B-spline additive model (backfitting), both with cross-validated tuning.
//! * [`theory`] — composition-structure descriptions, intrinsic
//!   dimension/smoothness reduction, and the covering/oracle/rate calculators.
//! * [`simbench`] — the two simulation designs, benchmark harness, error
//!   metrics, and simulation envelope bands.
//! * [`housing`] — the California housing ingestion, preprocessing, and
//!   k-fold comparison pipeline.
//!
//! Replicate-level work is data-parallel via rayon when the default
//! `parallel` feature is enabled; disabling it yields a dependency-free
//! sequential fallback with identical outputs.

pub mod baselines;
pub mod csvio;
pub mod error;
pub mod grf;
pub mod housing;
pub mod linalg;
pub mod netcore;
pub mod parallel;
pub mod simbench;
pub mod theory;
pub mod util;

pub use error::{Error, Result};
