//! Baseline estimators: Nadaraya–Watson kernel regression and a penalised
//! B-spline additive model.

pub mod gam;
pub mod nw;
pub mod spline;

pub use gam::{default_lambda_grid, gam_fit, gam_fit_cv, GamConfig, GamModel};
pub use nw::{bandwidth_select, BandwidthRule, KernelKind, KernelSpec, NwModel};
pub use spline::SplineBasis;
