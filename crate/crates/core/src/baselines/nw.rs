//! Nadaraya–Watson kernel regression with product kernels and
//! cross-validated or rule-of-thumb bandwidth selection.

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::util::{kfold_indices, sample_sd};

/// Univariate kernel shapes combined into a product kernel over covariates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum KernelKind {
    /// Standard normal density (default).
    Gaussian,
    /// 0.75·(1 − u²) on |u| ≤ 1, zero outside.
    Epanechnikov,
}

impl KernelKind {
    #[inline]
    pub fn eval(self, u: f64) -> f64 {
        match self {
            KernelKind::Gaussian => (-0.5 * u * u).exp() / (2.0 * std::f64::consts::PI).sqrt(),
            KernelKind::Epanechnikov => {
                if u.abs() <= 1.0 {
                    0.75 * (1.0 - u * u)
                } else {
                    0.0
                }
            }
        }
    }
}

/// Kernel shape plus a single bandwidth shared by all covariates.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct KernelSpec {
    pub kind: KernelKind,
    pub bandwidth: f64,
}

impl KernelSpec {
    pub fn new(kind: KernelKind, bandwidth: f64) -> Result<Self> {
        if !(bandwidth > 0.0) || !bandwidth.is_finite() {
            return Err(Error::invalid(format!(
                "bandwidth must be positive and finite, got {bandwidth}"
            )));
        }
        Ok(KernelSpec { kind, bandwidth })
    }
}

/// A fitted (memorised-sample) Nadaraya–Watson regressor.
#[derive(Debug, Clone)]
pub struct NwModel {
    x: Mat,
    y: Vec<f64>,
    kernel: KernelSpec,
}

impl NwModel {
    /// Stores the training sample; errors on empty or mismatched data.
    pub fn fit(x: Mat, y: Vec<f64>, kernel: KernelSpec) -> Result<Self> {
        if x.n_rows() == 0 || x.n_cols() == 0 {
            return Err(Error::invalid("kernel regression needs nonempty training data"));
        }
        if x.n_rows() != y.len() {
            return Err(Error::invalid(format!(
                "covariate rows {} do not match responses {}",
                x.n_rows(),
                y.len()
            )));
        }
        Ok(NwModel { x, y, kernel })
    }

    pub fn kernel(&self) -> KernelSpec {
        self.kernel
    }

    pub fn n_train(&self) -> usize {
        self.y.len()
    }

    /// Local average ν̂(x)/ĝ(x). If every kernel weight vanishes (compact
    /// kernel far from the data, or total underflow), falls back to the
    /// response of the nearest training point (ties: smallest index).
    pub fn predict(&self, query: &[f64]) -> f64 {
        debug_assert_eq!(query.len(), self.x.n_cols());
        let h = self.kernel.bandwidth;
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..self.x.n_rows() {
            let mut k = 1.0;
            for (a, b) in self.x.row(i).iter().zip(query) {
                k *= self.kernel.kind.eval((b - a) / h);
                if k == 0.0 {
                    break;
                }
            }
            num += self.y[i] * k;
            den += k;
        }
        if den > 0.0 {
            num / den
        } else {
            self.y[self.nearest(query)]
        }
    }

    pub fn predict_all(&self, queries: &Mat) -> Vec<f64> {
        (0..queries.n_rows()).map(|i| self.predict(queries.row(i))).collect()
    }

    fn nearest(&self, query: &[f64]) -> usize {
        let mut best = 0usize;
        let mut best_d = f64::INFINITY;
        for i in 0..self.x.n_rows() {
            let d: f64 = self
                .x
                .row(i)
                .iter()
                .zip(query)
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }
}

/// Bandwidth selection rules.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum BandwidthRule {
    /// h = n^{−1/(4+d)} · (mean per-covariate sample sd).
    RuleOfThumb,
    /// 5-fold CV over a 10-point log grid on [h_rot/4, 4·h_rot].
    CrossValidation,
}

/// The CV grid around a rule-of-thumb centre: 10 log-spaced points spanning
/// a factor of 4 on either side.
pub fn bandwidth_grid(h_rot: f64) -> Vec<f64> {
    (0..10)
        .map(|i| h_rot * 4.0f64.powf(2.0 * i as f64 / 9.0 - 1.0))
        .collect()
}

fn rule_of_thumb(x: &Mat) -> Result<f64> {
    let n = x.n_rows();
    let d = x.n_cols();
    let mean_sd = (0..d)
        .map(|j| sample_sd(&x.column(j)))
        .sum::<f64>()
        / d as f64;
    let h = (n as f64).powf(-1.0 / (4.0 + d as f64)) * mean_sd;
    if !(h > 0.0) {
        return Err(Error::Degenerate(
            "rule-of-thumb bandwidth is zero: all covariates are constant".into(),
        ));
    }
    Ok(h)
}

/// Selects a bandwidth for the given kernel shape.
///
/// `seed` drives the CV fold shuffle; it is unused by the rule of thumb.
pub fn bandwidth_select(
    x: &Mat,
    y: &[f64],
    kind: KernelKind,
    rule: BandwidthRule,
    seed: u64,
) -> Result<f64> {
    if x.n_rows() != y.len() || y.is_empty() {
        return Err(Error::invalid("bandwidth selection needs matching nonempty data"));
    }
    let h_rot = rule_of_thumb(x)?;
    match rule {
        BandwidthRule::RuleOfThumb => Ok(h_rot),
        BandwidthRule::CrossValidation => {
            let n = y.len();
            if n < 10 {
                return Err(Error::invalid(format!(
                    "cross-validated bandwidth needs at least 10 observations, got {n}"
                )));
            }
            let folds = kfold_indices(n, 5, seed);
            let mut best = (f64::INFINITY, f64::INFINITY);
            for h in bandwidth_grid(h_rot) {
                let kernel = KernelSpec::new(kind, h)?;
                let mut sq = 0.0;
                let mut count = 0usize;
                for fold in &folds {
                    let hold: std::collections::HashSet<usize> = fold.iter().copied().collect();
                    let train_rows: Vec<Vec<f64>> = (0..n)
                        .filter(|i| !hold.contains(i))
                        .map(|i| x.row(i).to_vec())
                        .collect();
                    let train_y: Vec<f64> = (0..n)
                        .filter(|i| !hold.contains(i))
                        .map(|i| y[i])
                        .collect();
                    let model = NwModel::fit(Mat::from_rows(&train_rows)?, train_y, kernel)?;
                    for &i in fold {
                        let p = model.predict(x.row(i));
                        sq += (p - y[i]) * (p - y[i]);
                        count += 1;
                    }
                }
                let score = sq / count as f64;
                // ties resolve to the smaller bandwidth: strict improvement
                // only, and the grid is scanned in increasing order
                if score < best.0 {
                    best = (score, h);
                }
            }
            Ok(best.1)
        }
    }
}
