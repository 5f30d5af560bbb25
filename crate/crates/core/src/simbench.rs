//! Spatial simulation designs, evaluation metrics, pointwise simulation
//! bands, cross-validated hyperparameter selection for the network estimator,
//! and the replication harness that aggregates results into summary tables.
//!
//! Replicates are paired: every method inside one replicate sees exactly the
//! same generated data because all randomness is derived from a per-replicate
//! seed by tagged hashing. Replicates are independent tasks executed through
//! [`crate::parallel::par_map`], which preserves input order, so all outputs
//! are byte-identical regardless of execution mode.

use crate::baselines::{
    bandwidth_select, gam_fit_cv, default_lambda_grid, BandwidthRule, GamConfig, KernelKind,
    KernelSpec, NwModel,
};
use crate::csvio::fmt_f64;
use crate::error::{Error, Result};
use crate::grf::{build_cov, chol, sample_field, CovarianceModel, LocationSet};
use crate::linalg::Mat;
use crate::netcore::{fit, FitResult, NetworkShape, TrainConfig};
use crate::parallel::par_map;
use crate::util::{derive_seed, kfold_indices, mean, rng_from_seed, sample_sd};
use rand::Rng;
use rand_distr::StandardNormal;

// Tags for the per-dataset random sub-streams. Each component draws from its
// own stream, so disabling one (e.g. the nugget) never shifts another.
const TAG_COVARIATES: u64 = 1;
const TAG_COEFFICIENTS: u64 = 2;
const TAG_TEST_LOCATIONS: u64 = 3;
const TAG_FIELD: u64 = 4;
const TAG_NUGGET: u64 = 5;

/// Whether the domain stays at [0, 1] or grows with the sample size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum DomainMode {
    Fixed,
    Expanding,
}

impl DomainMode {
    pub fn as_str(self) -> &'static str {
        match self {
            DomainMode::Fixed => "fixed",
            DomainMode::Expanding => "expanding",
        }
    }
}

/// Full description of one simulation scenario.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DesignSpec {
    /// 1 = scalar locations with deterministic covariates; 2 = planar grid
    /// with random correlated covariates.
    pub design: u8,
    pub domain_mode: DomainMode,
    pub n: usize,
    /// Domain size D; the fixed mode requires D = 1.
    pub domain: f64,
    /// Range parameter of the exponential field covariance.
    pub rho: f64,
    pub seed: u64,
    /// Nugget standard deviation (0 disables the measurement error).
    pub noise_sd: f64,
    /// Field variance (0 disables the spatially correlated error).
    pub field_variance: f64,
    /// When set, the second design draws its coefficients from this seed
    /// instead of the dataset seed, pinning them across replicates.
    pub beta_seed: Option<u64>,
}

impl DesignSpec {
    pub fn new(
        design: u8,
        domain_mode: DomainMode,
        n: usize,
        domain: f64,
        rho: f64,
        seed: u64,
    ) -> Result<Self> {
        let spec = DesignSpec {
            design,
            domain_mode,
            n,
            domain,
            rho,
            seed,
            noise_sd: 1.0,
            field_variance: 1.0,
            beta_seed: None,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.design != 1 && self.design != 2 {
            return Err(Error::invalid(format!(
                "design must be 1 or 2, got {}",
                self.design
            )));
        }
        if self.n < 10 {
            return Err(Error::invalid(format!(
                "need n >= 10 so the held-out split n/10 is nonempty, got {}",
                self.n
            )));
        }
        match self.domain_mode {
            DomainMode::Fixed => {
                if self.domain != 1.0 {
                    return Err(Error::invalid(format!(
                        "fixed domain requires size 1, got {}",
                        self.domain
                    )));
                }
            }
            DomainMode::Expanding => {
                if !(self.domain > 0.0) || !self.domain.is_finite() {
                    return Err(Error::invalid(format!(
                        "expanding domain needs a positive size, got {}",
                        self.domain
                    )));
                }
            }
        }
        if !(self.rho > 0.0) || !self.rho.is_finite() {
            return Err(Error::invalid(format!(
                "range parameter must be positive, got {}",
                self.rho
            )));
        }
        for (name, v) in [("noise_sd", self.noise_sd), ("field_variance", self.field_variance)]
        {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::invalid(format!(
                    "{name} must be non-negative and finite, got {v}"
                )));
            }
        }
        Ok(())
    }

    fn stream(&self, tag: u64) -> u64 {
        derive_seed(self.seed, &[tag])
    }
}

/// One split (training or held-out) of a generated dataset.
#[derive(Debug, Clone)]
pub struct SplitData {
    pub locations: LocationSet,
    pub covariates: Mat,
    pub responses: Vec<f64>,
    /// Noise-free mean values, available for simulated data.
    pub truth: Option<Vec<f64>>,
}

impl SplitData {
    pub fn len(&self) -> usize {
        self.responses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.responses.is_empty()
    }
}

/// A generated dataset: training split plus m = n/10 held-out observations at
/// new locations, both carrying the same replicate's spatial field.
#[derive(Debug, Clone)]
pub struct SpatialDataset {
    pub train: SplitData,
    pub test: SplitData,
    /// Coefficients of the second design's mean function, when applicable.
    pub beta: Option<Vec<f64>>,
    /// How many covariate rows were redrawn by the near-singularity guard.
    pub regenerated: usize,
}

/// Covariates of the first design as deterministic functions of location.
pub fn design1_covariates(s: f64, domain: f64) -> [f64; 5] {
    let t = s / domain;
    [
        t,
        (10.0 * t).sin(),
        t * t,
        (3.0 * t).exp(),
        1.0 / (t + 1.0),
    ]
}

/// Mean function of the second design. `sign(0)` is taken as 1 so the
/// denominator of the fourth term is always well defined away from the
/// guarded region.
pub fn design2_mean(x: &[f64], beta: &[f64]) -> f64 {
    assert_eq!(x.len(), 5, "second design uses five covariates");
    assert_eq!(beta.len(), 5, "second design uses five coefficients");
    let sign = if x[3] >= 0.0 { 1.0 } else { -1.0 };
    beta[0] * x[0] * x[1]
        + beta[1] * x[1] * x[1] * x[2].sin()
        + beta[2] * x[3].exp() * x[4].max(0.0)
        + beta[3] / (sign * (10.0 + x[4]))
        + beta[4] * x[0].tanh()
}

/// Adds the spatial field (sampled jointly over training and test locations)
/// and the independent nugget to the mean values.
fn add_errors(
    spec: &DesignSpec,
    train_locs: &LocationSet,
    test_locs: &LocationSet,
    f0_train: &[f64],
    f0_test: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = f0_train.len();
    let m = f0_test.len();
    let mut y_train = f0_train.to_vec();
    let mut y_test = f0_test.to_vec();

    if spec.field_variance > 0.0 {
        let model = CovarianceModel::exponential(spec.rho, spec.field_variance)?;
        let joint = train_locs.concat(test_locs)?;
        let cov = build_cov(&model, &joint)?;
        let factor = chol(&cov)?;
        let field = sample_field(&factor, spec.stream(TAG_FIELD));
        for i in 0..n {
            y_train[i] += field.values[i];
        }
        for j in 0..m {
            y_test[j] += field.values[n + j];
        }
    }

    if spec.noise_sd > 0.0 {
        let mut rng = rng_from_seed(spec.stream(TAG_NUGGET));
        for v in y_train.iter_mut().chain(y_test.iter_mut()) {
            let z: f64 = rng.sample(StandardNormal);
            *v += spec.noise_sd * z;
        }
    }
    Ok((y_train, y_test))
}

/// Generates the first design: equispaced scalar locations on [0, D]
/// (endpoints included), deterministic covariates, additive mean.
pub fn gen_design1(spec: &DesignSpec) -> Result<SpatialDataset> {
    spec.validate()?;
    if spec.design != 1 {
        return Err(Error::invalid(format!(
            "generator for design 1 called with design {}",
            spec.design
        )));
    }
    let n = spec.n;
    let m = n / 10;
    let train_locs = LocationSet::line_equispaced(n, spec.domain)?;

    let mut rng_t = rng_from_seed(spec.stream(TAG_TEST_LOCATIONS));
    let test_points: Vec<f64> = (0..m).map(|_| rng_t.random::<f64>() * spec.domain).collect();
    let test_locs = LocationSet::from_points_1d(test_points, spec.domain)?;

    let cov_rows = |locs: &LocationSet| -> (Mat, Vec<f64>) {
        let rows: Vec<Vec<f64>> = (0..locs.len())
            .map(|i| design1_covariates(locs.coords(i)[0], spec.domain).to_vec())
            .collect();
        let f0: Vec<f64> = rows.iter().map(|r| r.iter().sum()).collect();
        (Mat::from_rows(&rows).expect("rectangular covariate rows"), f0)
    };
    let (x_train, f0_train) = cov_rows(&train_locs);
    let (x_test, f0_test) = cov_rows(&test_locs);

    let (y_train, y_test) = add_errors(spec, &train_locs, &test_locs, &f0_train, &f0_test)?;
    Ok(SpatialDataset {
        train: SplitData {
            locations: train_locs,
            covariates: x_train,
            responses: y_train,
            truth: Some(f0_train),
        },
        test: SplitData {
            locations: test_locs,
            covariates: x_test,
            responses: y_test,
            truth: Some(f0_test),
        },
        beta: None,
        regenerated: 0,
    })
}

/// Draws one row of the correlated covariates: standard normal marginals with
/// cross-covariate correlation 1/2 via a shared component.
fn correlated_row(rng: &mut rand_chacha::ChaCha8Rng) -> [f64; 5] {
    let shared: f64 = rng.sample(StandardNormal);
    let half = 0.5f64.sqrt();
    let mut row = [0.0; 5];
    for slot in &mut row {
        let own: f64 = rng.sample(StandardNormal);
        *slot = half * (shared + own);
    }
    row
}

/// Generates the second design: a √n × √n grid over [0, D]², correlated
/// random covariates standardized jointly over training and test rows,
/// uniform coefficients, and the nonlinear interaction mean.
pub fn gen_design2(spec: &DesignSpec) -> Result<SpatialDataset> {
    spec.validate()?;
    if spec.design != 2 {
        return Err(Error::invalid(format!(
            "generator for design 2 called with design {}",
            spec.design
        )));
    }
    let n = spec.n;
    let side = (n as f64).sqrt().round() as usize;
    if side * side != n {
        return Err(Error::invalid(format!(
            "grid layout needs a perfect-square sample size, got {n}"
        )));
    }
    let m = n / 10;
    let train_locs = LocationSet::grid_equispaced(side, spec.domain)?;

    let mut rng_t = rng_from_seed(spec.stream(TAG_TEST_LOCATIONS));
    let test_points: Vec<[f64; 2]> = (0..m)
        .map(|_| {
            [
                rng_t.random::<f64>() * spec.domain,
                rng_t.random::<f64>() * spec.domain,
            ]
        })
        .collect();
    let test_locs = LocationSet::from_points_2d(test_points, spec.domain)?;

    let total = n + m;
    let mut rng_x = rng_from_seed(spec.stream(TAG_COVARIATES));
    let mut raw: Vec<[f64; 5]> = (0..total).map(|_| correlated_row(&mut rng_x)).collect();

    // Standardize each covariate over all rows, then redraw any row whose
    // standardized fifth covariate lands near the singular denominator
    // x₅ = −10 of the mean function. Redrawing shifts the empirical moments,
    // so re-standardize and re-check until clean.
    let mut regenerated = 0usize;
    let standardized = loop {
        let mut std_rows = vec![[0.0f64; 5]; total];
        for j in 0..5 {
            let col: Vec<f64> = raw.iter().map(|r| r[j]).collect();
            let mu = mean(&col);
            let sd = sample_sd(&col);
            if sd <= 0.0 {
                return Err(Error::Degenerate(format!(
                    "covariate {j} is constant; cannot standardize"
                )));
            }
            for (i, r) in raw.iter().enumerate() {
                std_rows[i][j] = (r[j] - mu) / sd;
            }
        }
        let violators: Vec<usize> = (0..total)
            .filter(|&i| (10.0 + std_rows[i][4]).abs() < 0.1)
            .collect();
        if violators.is_empty() {
            break std_rows;
        }
        regenerated += violators.len();
        if regenerated > 1000 {
            return Err(Error::Degenerate(
                "covariate regeneration did not terminate".into(),
            ));
        }
        for i in violators {
            raw[i] = correlated_row(&mut rng_x);
        }
    };

    let beta_stream = spec.beta_seed.unwrap_or_else(|| spec.stream(TAG_COEFFICIENTS));
    let mut rng_b = rng_from_seed(beta_stream);
    let beta: Vec<f64> = (0..5).map(|_| 1.0 + rng_b.random::<f64>()).collect();

    let f0_all: Vec<f64> = standardized.iter().map(|r| design2_mean(r, &beta)).collect();
    let rows_train: Vec<Vec<f64>> = standardized[..n].iter().map(|r| r.to_vec()).collect();
    let rows_test: Vec<Vec<f64>> = standardized[n..].iter().map(|r| r.to_vec()).collect();
    let f0_train = f0_all[..n].to_vec();
    let f0_test = f0_all[n..].to_vec();

    let (y_train, y_test) = add_errors(spec, &train_locs, &test_locs, &f0_train, &f0_test)?;
    Ok(SpatialDataset {
        train: SplitData {
            locations: train_locs,
            covariates: Mat::from_rows(&rows_train)?,
            responses: y_train,
            truth: Some(f0_train),
        },
        test: SplitData {
            locations: test_locs,
            covariates: Mat::from_rows(&rows_test)?,
            responses: y_test,
            truth: Some(f0_test),
        },
        beta: Some(beta),
        regenerated,
    })
}

/// Dispatches to the matching generator.
pub fn generate(spec: &DesignSpec) -> Result<SpatialDataset> {
    match spec.design {
        1 => gen_design1(spec),
        2 => gen_design2(spec),
        other => Err(Error::invalid(format!("unknown design {other}"))),
    }
}

fn mean_sq_diff(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::invalid(format!(
            "metric needs equal nonempty lengths, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    Ok(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64)
}

/// Mean squared estimation error against the noise-free mean values.
pub fn msee(pred: &[f64], truth: &[f64]) -> Result<f64> {
    mean_sq_diff(pred, truth)
}

/// Mean squared prediction error against the observed responses.
pub fn mspe(pred: &[f64], observed: &[f64]) -> Result<f64> {
    mean_sq_diff(pred, observed)
}

/// Pointwise 95% simulation band.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct IntervalBand {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

/// Band from 100 replicate predictions per point: midpoints of the 2nd/3rd
/// and 97th/98th order statistics. The construction is specific to 100
/// replicates and refuses any other count.
pub fn sim_interval(replicate_preds: &[Vec<f64>]) -> Result<IntervalBand> {
    if replicate_preds.len() != 100 {
        return Err(Error::UnsupportedReplicateCount {
            got: replicate_preds.len(),
        });
    }
    let m = replicate_preds[0].len();
    if m == 0 || replicate_preds.iter().any(|r| r.len() != m) {
        return Err(Error::invalid(
            "replicate predictions must be nonempty with equal lengths",
        ));
    }
    let mut lower = Vec::with_capacity(m);
    let mut upper = Vec::with_capacity(m);
    for j in 0..m {
        let mut vals: Vec<f64> = replicate_preds.iter().map(|r| r[j]).collect();
        vals.sort_by(|a, b| a.total_cmp(b));
        lower.push(0.5 * (vals[1] + vals[2]));
        upper.push(0.5 * (vals[96] + vals[97]));
    }
    debug_assert!(lower.iter().zip(&upper).all(|(l, u)| l <= u));
    Ok(IntervalBand { lower, upper })
}

/// Network estimator wrapping the sparse trainer with the data scalings the
/// simulations need: covariates mapped to [0, 1] per column and responses
/// centred/scaled, both using training statistics only.
#[derive(Debug, Clone)]
pub struct DnnEstimator {
    result: FitResult,
    depth: usize,
    width: usize,
    x_min: Vec<f64>,
    x_scale: Vec<f64>,
    y_mean: f64,
    y_sd: f64,
}

impl DnnEstimator {
    pub fn fit(
        x: &Mat,
        y: &[f64],
        depth: usize,
        width: usize,
        config: &TrainConfig,
    ) -> Result<Self> {
        let n = y.len();
        if x.n_rows() != n || n == 0 {
            return Err(Error::invalid("estimator needs matching nonempty data"));
        }
        let d = x.n_cols();
        let mut x_min = vec![f64::INFINITY; d];
        let mut x_max = vec![f64::NEG_INFINITY; d];
        for i in 0..n {
            for (j, &v) in x.row(i).iter().enumerate() {
                x_min[j] = x_min[j].min(v);
                x_max[j] = x_max[j].max(v);
            }
        }
        let x_scale: Vec<f64> = x_min
            .iter()
            .zip(&x_max)
            .map(|(lo, hi)| {
                let range = hi - lo;
                if range > 1e-12 {
                    1.0 / range
                } else {
                    1.0
                }
            })
            .collect();
        let y_mean = mean(y);
        let sd = sample_sd(y);
        let y_sd = if sd > 1e-12 { sd } else { 1.0 };

        let mut x_std = Mat::zeros(n, d);
        for i in 0..n {
            for j in 0..d {
                x_std.set(i, j, (x.get(i, j) - x_min[j]) * x_scale[j]);
            }
        }
        let y_std: Vec<f64> = y.iter().map(|v| (v - y_mean) / y_sd).collect();

        let shape = NetworkShape::rectangular(d, depth, width)?;
        let mut cfg = config.clone();
        cfg.batch_size = cfg.batch_size.min(n);
        let result = fit(&x_std, &y_std, &shape, &cfg)?;
        Ok(DnnEstimator {
            result,
            depth,
            width,
            x_min,
            x_scale,
            y_mean,
            y_sd,
        })
    }

    pub fn predict(&self, query: &[f64]) -> f64 {
        let std: Vec<f64> = query
            .iter()
            .enumerate()
            .map(|(j, &v)| (v - self.x_min[j]) * self.x_scale[j])
            .collect();
        let raw = crate::netcore::forward(
            &self.result.params,
            &std,
            Some(self.result.config.clamp),
        );
        raw * self.y_sd + self.y_mean
    }

    pub fn predict_all(&self, queries: &Mat) -> Vec<f64> {
        (0..queries.n_rows()).map(|i| self.predict(queries.row(i))).collect()
    }

    pub fn fit_result(&self) -> &FitResult {
        &self.result
    }

    pub fn architecture(&self) -> (usize, usize) {
        (self.depth, self.width)
    }
}

/// Candidate grid for the network tuning parameters, plus the training budget
/// used inside cross-validation fits.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct HyperGrid {
    pub depths: Vec<usize>,
    pub widths: Vec<usize>,
    pub l1_lambdas: Vec<f64>,
    pub learning_rates: Vec<f64>,
    pub cv_epochs: usize,
    pub cv_restarts: usize,
}

impl Default for HyperGrid {
    fn default() -> Self {
        HyperGrid {
            depths: vec![2, 3],
            widths: vec![16, 32, 64],
            l1_lambdas: vec![1e-5, 1e-4, 1e-3],
            learning_rates: vec![1e-3, 1e-2],
            cv_epochs: 150,
            cv_restarts: 1,
        }
    }
}

impl HyperGrid {
    /// Smaller grid used by the replication harness to keep runs at desk
    /// scale; covers both depths and the two most influential axes.
    pub fn reduced() -> Self {
        HyperGrid {
            depths: vec![2, 3],
            widths: vec![16, 32],
            l1_lambdas: vec![1e-4],
            learning_rates: vec![1e-3, 1e-2],
            cv_epochs: 100,
            cv_restarts: 1,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.depths.is_empty()
            || self.widths.is_empty()
            || self.l1_lambdas.is_empty()
            || self.learning_rates.is_empty()
        {
            return Err(Error::invalid("hyperparameter grid must be nonempty"));
        }
        if self.cv_epochs == 0 || self.cv_restarts == 0 {
            return Err(Error::invalid("cross-validation budget must be positive"));
        }
        Ok(())
    }
}

/// One scored grid point.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct HyperScore {
    pub depth: usize,
    pub width: usize,
    pub l1_lambda: f64,
    pub learning_rate: f64,
    pub cv_mspe: f64,
}

/// The selected architecture and optimizer settings.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectedHyperparams {
    pub depth: usize,
    pub width: usize,
    /// Final-fit configuration (full training budget) carrying the selected
    /// learning rate and sparsity penalty.
    pub config: TrainConfig,
    pub cv_mspe: f64,
    pub scores: Vec<HyperScore>,
}

/// 5-fold cross-validated selection over the grid. Ties go to the smaller
/// width, then the smaller depth.
pub fn select_hyperparams(
    x: &Mat,
    y: &[f64],
    grid: &HyperGrid,
    seed: u64,
) -> Result<SelectedHyperparams> {
    grid.validate()?;
    let n = y.len();
    if x.n_rows() != n || n < 25 {
        return Err(Error::invalid(format!(
            "selection needs at least 25 matching observations, got {n}"
        )));
    }
    let folds = kfold_indices(n, 5, derive_seed(seed, &[1]));

    let mut points = Vec::new();
    for &lr in &grid.learning_rates {
        for &l1 in &grid.l1_lambdas {
            for &depth in &grid.depths {
                for &width in &grid.widths {
                    points.push((depth, width, l1, lr));
                }
            }
        }
    }

    let scores: Vec<HyperScore> = par_map(points, |(depth, width, l1, lr)| {
        let mut total = 0.0f64;
        let mut count = 0usize;
        for (fi, fold) in folds.iter().enumerate() {
            let hold: std::collections::HashSet<usize> = fold.iter().copied().collect();
            let train_idx: Vec<usize> = (0..n).filter(|i| !hold.contains(i)).collect();
            let train_rows: Vec<Vec<f64>> =
                train_idx.iter().map(|&i| x.row(i).to_vec()).collect();
            let train_y: Vec<f64> = train_idx.iter().map(|&i| y[i]).collect();
            let xm = Mat::from_rows(&train_rows).expect("rectangular rows");
            let cfg = TrainConfig {
                learning_rate: lr,
                l1_lambda: l1,
                epochs: grid.cv_epochs,
                restarts: grid.cv_restarts,
                seed: derive_seed(seed, &[2, depth as u64, width as u64, fi as u64]),
                ..TrainConfig::default()
            };
            match DnnEstimator::fit(&xm, &train_y, depth, width, &cfg) {
                Ok(model) => {
                    let sq: f64 = fold
                        .iter()
                        .map(|&i| {
                            let p = model.predict(x.row(i));
                            (p - y[i]) * (p - y[i])
                        })
                        .sum();
                    total += sq;
                    count += fold.len();
                }
                Err(_) => {
                    // A diverged fold marks the grid point as unusable.
                    total = f64::INFINITY;
                    count = count.max(1);
                }
            }
        }
        HyperScore {
            depth,
            width,
            l1_lambda: l1,
            learning_rate: lr,
            cv_mspe: total / count.max(1) as f64,
        }
    });

    let mut best = scores[0];
    for s in &scores[1..] {
        let better = s.cv_mspe < best.cv_mspe
            || (s.cv_mspe == best.cv_mspe
                && (s.width < best.width || (s.width == best.width && s.depth < best.depth)));
        if better {
            best = *s;
        }
    }
    if !best.cv_mspe.is_finite() {
        return Err(Error::Degenerate(
            "every grid point failed cross-validation".into(),
        ));
    }
    Ok(SelectedHyperparams {
        depth: best.depth,
        width: best.width,
        config: TrainConfig {
            learning_rate: best.learning_rate,
            l1_lambda: best.l1_lambda,
            ..TrainConfig::default()
        },
        cv_mspe: best.cv_mspe,
        scores,
    })
}

/// Estimators the harness can run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Method {
    Dnn,
    Nw,
    Gam,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Dnn => "dnn",
            Method::Nw => "nw",
            Method::Gam => "gam",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "dnn" => Ok(Method::Dnn),
            "nw" => Ok(Method::Nw),
            "gam" => Ok(Method::Gam),
            other => Err(Error::invalid(format!("unknown method '{other}'"))),
        }
    }
}

/// Harness settings. Defaults run cross-validated tuning for every method at
/// a desk-scale budget.
#[derive(Debug, Clone)]
pub struct BenchmarkOptions {
    /// Grid for the per-design network tuning (run once on the first
    /// replicate's training data, then reused across replicates).
    pub dnn_grid: HyperGrid,
    /// Disable tuning and use `fallback_depth`/`fallback_width` directly.
    pub dnn_select: bool,
    pub fallback_depth: usize,
    pub fallback_width: usize,
    /// Base configuration for final per-replicate fits; tuning overrides the
    /// learning rate and sparsity penalty.
    pub dnn_config: TrainConfig,
    pub nw_rule: BandwidthRule,
    pub gam_lambdas: Vec<f64>,
    /// When false every replicate reuses the first replicate's seed
    /// (diagnostic switch; makes all spreads exactly zero).
    pub vary_replicates: bool,
}

impl Default for BenchmarkOptions {
    fn default() -> Self {
        // The final fits run a deliberately short epoch budget: with a
        // spatially correlated error the early stop acts as regularisation,
        // keeping the network from absorbing the field realisation into its
        // mean estimate the way an exhaustively trained fit does.
        let dnn_config = TrainConfig {
            epochs: 300,
            ..TrainConfig::default()
        };
        BenchmarkOptions {
            dnn_grid: HyperGrid::reduced(),
            dnn_select: true,
            fallback_depth: 3,
            fallback_width: 32,
            dnn_config,
            nw_rule: BandwidthRule::CrossValidation,
            gam_lambdas: default_lambda_grid(),
            vary_replicates: true,
        }
    }
}

/// Result of one method on one replicate.
#[derive(Debug, Clone)]
pub struct ReplicateRecord {
    /// 1-based position of the scenario in the run's design list.
    pub design_index: usize,
    pub replicate: usize,
    pub method: Method,
    pub msee: Option<f64>,
    pub mspe: Option<f64>,
    pub error: Option<String>,
}

/// Aggregated row for one scenario × method.
#[derive(Debug, Clone)]
pub struct SummaryRow {
    pub design_index: usize,
    pub spec: DesignSpec,
    pub method: Method,
    pub replicates_total: usize,
    pub replicates_ok: usize,
    pub mean_msee: f64,
    pub sd_msee: f64,
    pub mean_mspe: f64,
    pub sd_mspe: f64,
}

/// Simulation band for one scenario × method, evaluated at the (replicate-
/// invariant) training locations of the first design.
#[derive(Debug, Clone)]
pub struct BandTable {
    pub design_index: usize,
    pub method: Method,
    pub locations: Vec<f64>,
    pub band: IntervalBand,
}

#[derive(Debug, Clone)]
pub struct SummaryTable {
    pub rows: Vec<SummaryRow>,
}

#[derive(Debug, Clone)]
pub struct BenchmarkResult {
    pub summary: SummaryTable,
    pub replicates: Vec<ReplicateRecord>,
    pub bands: Vec<BandTable>,
}

struct MethodOutcome {
    method: Method,
    metrics: std::result::Result<(f64, f64), String>,
    /// Predictions at the training locations, kept for band construction.
    train_preds: Option<Vec<f64>>,
}

#[derive(Clone)]
struct DnnChoice {
    depth: usize,
    width: usize,
    config: TrainConfig,
}

fn replicate_data_seed(master: u64, design_index: usize, replicate: usize) -> u64 {
    derive_seed(master, &[design_index as u64, replicate as u64])
}

fn fit_one_method(
    method: Method,
    data: &SpatialDataset,
    data_seed: u64,
    options: &BenchmarkOptions,
    dnn: Option<&DnnChoice>,
    want_train_preds: bool,
) -> MethodOutcome {
    let run = || -> Result<((f64, f64), Option<Vec<f64>>)> {
        let x = &data.train.covariates;
        let y = &data.train.responses;
        let (test_pred, train_pred): (Vec<f64>, Option<Vec<f64>>) = match method {
            Method::Dnn => {
                let choice = dnn.ok_or_else(|| {
                    Error::invalid("network method requested without a resolved architecture")
                })?;
                let mut cfg = choice.config.clone();
                cfg.seed = derive_seed(data_seed, &[100]);
                let model = DnnEstimator::fit(x, y, choice.depth, choice.width, &cfg)?;
                (
                    model.predict_all(&data.test.covariates),
                    want_train_preds.then(|| model.predict_all(x)),
                )
            }
            Method::Nw => {
                let h = bandwidth_select(
                    x,
                    y,
                    KernelKind::Gaussian,
                    options.nw_rule,
                    derive_seed(data_seed, &[101]),
                )?;
                let model = NwModel::fit(
                    x.clone(),
                    y.clone(),
                    KernelSpec::new(KernelKind::Gaussian, h)?,
                )?;
                (
                    model.predict_all(&data.test.covariates),
                    want_train_preds.then(|| model.predict_all(x)),
                )
            }
            Method::Gam => {
                let cfg = GamConfig::for_data(y.len(), y);
                let model = gam_fit_cv(
                    x,
                    y,
                    &cfg,
                    &options.gam_lambdas,
                    derive_seed(data_seed, &[102]),
                )?;
                (
                    model.predict_all(&data.test.covariates),
                    want_train_preds.then(|| model.predict_all(x)),
                )
            }
        };
        let truth = data
            .test
            .truth
            .as_ref()
            .ok_or_else(|| Error::invalid("simulated data must carry truth values"))?;
        let e = msee(&test_pred, truth)?;
        let p = mspe(&test_pred, &data.test.responses)?;
        Ok(((e, p), train_pred))
    };
    match run() {
        Ok((metrics, train_preds)) => MethodOutcome {
            method,
            metrics: Ok(metrics),
            train_preds,
        },
        Err(e) => MethodOutcome {
            method,
            metrics: Err(e.to_string()),
            train_preds: None,
        },
    }
}

/// Runs R seeded replicates of every scenario × method, pairing methods on
/// identical data within a replicate, and aggregates means and spreads.
pub fn run_benchmark(
    designs: &[DesignSpec],
    methods: &[Method],
    r: usize,
    seed: u64,
    options: &BenchmarkOptions,
) -> Result<BenchmarkResult> {
    if designs.is_empty() {
        return Err(Error::invalid("at least one scenario is required"));
    }
    if r < 2 {
        return Err(Error::invalid(format!(
            "at least 2 replicates are required, got {r}"
        )));
    }
    let mut method_list: Vec<Method> = Vec::new();
    for &m in methods {
        if !method_list.contains(&m) {
            method_list.push(m);
        }
    }
    if method_list.is_empty() {
        return Err(Error::invalid("at least one method is required"));
    }

    let mut replicates = Vec::new();
    let mut rows = Vec::new();
    let mut bands = Vec::new();

    for (di, spec) in designs.iter().enumerate() {
        spec.validate()?;
        let design_index = di + 1;

        let dnn_choice = if method_list.contains(&Method::Dnn) {
            let mut choice = DnnChoice {
                depth: options.fallback_depth,
                width: options.fallback_width,
                config: options.dnn_config.clone(),
            };
            if options.dnn_select {
                let mut probe = *spec;
                probe.seed = replicate_data_seed(seed, design_index, 0);
                let data = generate(&probe)?;
                let sel = select_hyperparams(
                    &data.train.covariates,
                    &data.train.responses,
                    &options.dnn_grid,
                    derive_seed(seed, &[u64::MAX, design_index as u64]),
                )?;
                choice.depth = sel.depth;
                choice.width = sel.width;
                choice.config.learning_rate = sel.config.learning_rate;
                choice.config.l1_lambda = sel.config.l1_lambda;
            }
            Some(choice)
        } else {
            None
        };

        // Bands need predictions at replicate-invariant evaluation points;
        // only the first design's training locations qualify.
        let collect_bands = spec.design == 1;

        let rep_ids: Vec<usize> = (0..r).collect();
        let per_rep: Vec<(usize, Vec<MethodOutcome>)> = par_map(rep_ids, |rep| {
            let effective = if options.vary_replicates { rep } else { 0 };
            let data_seed = replicate_data_seed(seed, design_index, effective);
            let mut rep_spec = *spec;
            rep_spec.seed = data_seed;
            let outcomes = match generate(&rep_spec) {
                Ok(data) => method_list
                    .iter()
                    .map(|&m| {
                        fit_one_method(
                            m,
                            &data,
                            data_seed,
                            options,
                            dnn_choice.as_ref(),
                            collect_bands,
                        )
                    })
                    .collect(),
                Err(e) => method_list
                    .iter()
                    .map(|&m| MethodOutcome {
                        method: m,
                        metrics: Err(format!("data generation failed: {e}")),
                        train_preds: None,
                    })
                    .collect::<Vec<_>>(),
            };
            (rep, outcomes)
        });

        // Single-owner reduction over the ordered replicate results.
        let mut band_preds: std::collections::BTreeMap<usize, Vec<Vec<f64>>> = Default::default();
        for (rep, outcomes) in &per_rep {
            for (mi, outcome) in outcomes.iter().enumerate() {
                let (msee_v, mspe_v, err) = match &outcome.metrics {
                    Ok((e, p)) => (Some(*e), Some(*p), None),
                    Err(msg) => (None, None, Some(msg.clone())),
                };
                replicates.push(ReplicateRecord {
                    design_index,
                    replicate: *rep,
                    method: outcome.method,
                    msee: msee_v,
                    mspe: mspe_v,
                    error: err,
                });
                if let Some(p) = &outcome.train_preds {
                    band_preds.entry(mi).or_default().push(p.clone());
                }
            }
        }

        for (mi, &method) in method_list.iter().enumerate() {
            let ok: Vec<(f64, f64)> = per_rep
                .iter()
                .flat_map(|(_, outcomes)| outcomes[mi].metrics.iter().copied())
                .collect();
            let msees: Vec<f64> = ok.iter().map(|t| t.0).collect();
            let mspes: Vec<f64> = ok.iter().map(|t| t.1).collect();
            rows.push(SummaryRow {
                design_index,
                spec: *spec,
                method,
                replicates_total: r,
                replicates_ok: ok.len(),
                mean_msee: mean(&msees),
                sd_msee: sample_sd(&msees),
                mean_mspe: mean(&mspes),
                sd_mspe: sample_sd(&mspes),
            });
            if collect_bands && r == 100 {
                if let Some(preds) = band_preds.get(&mi) {
                    if preds.len() == 100 {
                        let band = sim_interval(preds)?;
                        let locs = LocationSet::line_equispaced(spec.n, spec.domain)?;
                        bands.push(BandTable {
                            design_index,
                            method,
                            locations: (0..spec.n).map(|i| locs.coords(i)[0]).collect(),
                            band,
                        });
                    }
                }
            }
        }
    }

    Ok(BenchmarkResult {
        summary: SummaryTable { rows },
        replicates,
        bands,
    })
}

/// Renders the per-scenario aggregate table.
pub fn summary_csv(result: &BenchmarkResult) -> String {
    let mut out = String::from(
        "design,method,domain,n,rho,replicates,successes,mean_msee,sd_msee,mean_mspe,sd_mspe\n",
    );
    for row in &result.summary.rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{}\n",
            row.design_index,
            row.method.as_str(),
            row.spec.domain_mode.as_str(),
            row.spec.n,
            fmt_f64(row.spec.rho),
            row.replicates_total,
            row.replicates_ok,
            fmt_f64(row.mean_msee),
            fmt_f64(row.sd_msee),
            fmt_f64(row.mean_mspe),
            fmt_f64(row.sd_mspe),
        ));
    }
    out
}

/// Renders the per-replicate records (failures keep NA metric cells).
pub fn replicates_csv(result: &BenchmarkResult) -> String {
    let mut out = String::from("design,replicate,method,msee,mspe\n");
    for rec in &result.replicates {
        let fmt_opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_else(|| "NA".into());
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            rec.design_index,
            rec.replicate,
            rec.method.as_str(),
            fmt_opt(rec.msee),
            fmt_opt(rec.mspe),
        ));
    }
    out
}

/// Renders the pointwise simulation bands.
pub fn bands_csv(result: &BenchmarkResult) -> String {
    let mut out = String::from("design,method,s,lower,upper\n");
    for table in &result.bands {
        for (i, &s) in table.locations.iter().enumerate() {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                table.design_index,
                table.method.as_str(),
                fmt_f64(s),
                fmt_f64(table.band.lower[i]),
                fmt_f64(table.band.upper[i]),
            ));
        }
    }
    out
}
