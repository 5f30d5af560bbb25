//! California-housing real-data pipeline: CSV ingestion with cleaning,
//! log + min-max preprocessing with reusable transform metadata, and
//! k-fold cross-validated prediction-error comparison across estimators.
//!
//! Transforms are always refit on each training fold and applied unchanged
//! to the held-out fold, so no information leaks across the split; held-out
//! values mapped outside [0, 1] are deliberately left unclipped.

use crate::baselines::{
    bandwidth_select, default_lambda_grid, gam_fit, gam_fit_cv, BandwidthRule, GamConfig,
    KernelKind, KernelSpec, NwModel,
};
use crate::csvio::fmt_f64;
use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::netcore::TrainConfig;
use crate::parallel::par_map;
use crate::simbench::{select_hyperparams, DnnEstimator, HyperGrid, Method};
use crate::util::{derive_seed, kfold_indices, mean, rng_from_seed};
use std::path::Path;

/// One cleaned block-group observation.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct HousingRecord {
    pub longitude: f64,
    pub latitude: f64,
    pub median_age: f64,
    pub total_rooms: f64,
    pub total_bedrooms: f64,
    pub population: f64,
    pub households: f64,
    pub median_income: f64,
    pub median_house_value: f64,
}

/// Model covariates in pipeline order; the first passes through without the
/// log transform, the remaining five are log-transformed.
pub const COVARIATE_NAMES: [&str; 6] = [
    "median_age",
    "total_rooms",
    "total_bedrooms",
    "population",
    "households",
    "median_income",
];

const LOG_FLAGS: [bool; 6] = [false, true, true, true, true, true];

const ALL_COLUMNS: [&str; 9] = [
    "longitude",
    "latitude",
    "median_age",
    "total_rooms",
    "total_bedrooms",
    "population",
    "households",
    "median_income",
    "median_house_value",
];

/// Accepted alternative header spellings (the public distribution of the
/// dataset names the age column `housing_median_age`).
fn header_matches(required: &str, seen: &str) -> bool {
    let s = seen.trim();
    s.eq_ignore_ascii_case(required)
        || (required == "median_age" && s.eq_ignore_ascii_case("housing_median_age"))
}

/// Ingestion result: cleaned records plus the number of dropped rows.
#[derive(Debug, Clone)]
pub struct LoadReport {
    pub records: Vec<HousingRecord>,
    pub dropped: usize,
}

/// Reads the nine-column CSV (any column order), dropping any row with a
/// missing, unparseable, or non-finite field.
pub fn load_csv(path: &Path) -> Result<LoadReport> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_path(path)?;
    let headers = reader.headers()?.clone();
    if headers.iter().all(|h| h.trim().is_empty()) {
        return Err(Error::invalid("housing file has no header row"));
    }
    let mut positions = [usize::MAX; 9];
    for (ci, required) in ALL_COLUMNS.iter().enumerate() {
        match headers.iter().position(|h| header_matches(required, h)) {
            Some(p) => positions[ci] = p,
            None => {
                return Err(Error::MissingColumn {
                    column: (*required).into(),
                })
            }
        }
    }

    let mut records = Vec::new();
    let mut dropped = 0usize;
    for row in reader.records() {
        let row = row?;
        let mut values = [0.0f64; 9];
        let mut ok = true;
        for (ci, &pos) in positions.iter().enumerate() {
            match row.get(pos).map(str::trim) {
                Some(field) if !field.is_empty() => match field.parse::<f64>() {
                    Ok(v) if v.is_finite() => values[ci] = v,
                    _ => {
                        ok = false;
                        break;
                    }
                },
                _ => {
                    ok = false;
                    break;
                }
            }
        }
        if ok {
            records.push(HousingRecord {
                longitude: values[0],
                latitude: values[1],
                median_age: values[2],
                total_rooms: values[3],
                total_bedrooms: values[4],
                population: values[5],
                households: values[6],
                median_income: values[7],
                median_house_value: values[8],
            });
        } else {
            dropped += 1;
        }
    }
    if records.is_empty() && dropped == 0 {
        return Err(Error::invalid("housing file contains no data rows"));
    }
    Ok(LoadReport { records, dropped })
}

fn raw_covariates(r: &HousingRecord) -> [f64; 6] {
    [
        r.median_age,
        r.total_rooms,
        r.total_bedrooms,
        r.population,
        r.households,
        r.median_income,
    ]
}

/// Natural log with a log(1+x) guard at zero: the raw data has strictly
/// positive counts, so the guard only matters for malformed inputs.
fn guarded_log(x: f64) -> f64 {
    if x > 0.0 {
        x.ln()
    } else {
        (1.0 + x.max(0.0)).ln()
    }
}

/// Per-covariate transform state fitted on a training split: log flags plus
/// post-log min/max for the [0, 1] rescaling.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TransformMeta {
    pub log_flags: [bool; 6],
    pub mins: [f64; 6],
    pub maxs: [f64; 6],
}

impl TransformMeta {
    /// Applies the stored transform. Values outside the training range map
    /// outside [0, 1] and are not clipped.
    pub fn apply(&self, records: &[HousingRecord]) -> Result<Mat> {
        if records.is_empty() {
            return Err(Error::invalid("no records to transform"));
        }
        let mut out = Mat::zeros(records.len(), 6);
        for (i, r) in records.iter().enumerate() {
            let raw = raw_covariates(r);
            for j in 0..6 {
                let v = if self.log_flags[j] {
                    guarded_log(raw[j])
                } else {
                    raw[j]
                };
                out.set(i, j, (v - self.mins[j]) / (self.maxs[j] - self.mins[j]));
            }
        }
        Ok(out)
    }
}

/// Model-ready data: spatial coordinates, unit-interval covariates, raw
/// response, and the transform used (for leak-free reuse on held-out folds).
#[derive(Debug, Clone)]
pub struct ProcessedDataset {
    pub locations: Vec<[f64; 2]>,
    pub covariates: Mat,
    pub response: Vec<f64>,
    pub meta: TransformMeta,
}

/// Fits the log + min-max transform on the given records and applies it.
pub fn preprocess(records: &[HousingRecord]) -> Result<ProcessedDataset> {
    if records.is_empty() {
        return Err(Error::invalid("cannot preprocess an empty record set"));
    }
    let mut mins = [f64::INFINITY; 6];
    let mut maxs = [f64::NEG_INFINITY; 6];
    let mut logged = Mat::zeros(records.len(), 6);
    for (i, r) in records.iter().enumerate() {
        let raw = raw_covariates(r);
        for j in 0..6 {
            let v = if LOG_FLAGS[j] { guarded_log(raw[j]) } else { raw[j] };
            logged.set(i, j, v);
            mins[j] = mins[j].min(v);
            maxs[j] = maxs[j].max(v);
        }
    }
    for j in 0..6 {
        if !(maxs[j] - mins[j] > 0.0) {
            return Err(Error::Degenerate(format!(
                "covariate {} is constant; min-max rescaling is undefined",
                COVARIATE_NAMES[j]
            )));
        }
    }
    let meta = TransformMeta {
        log_flags: LOG_FLAGS,
        mins,
        maxs,
    };
    let covariates = meta.apply(records)?;
    Ok(ProcessedDataset {
        locations: records.iter().map(|r| [r.longitude, r.latitude]).collect(),
        covariates,
        response: records.iter().map(|r| r.median_house_value).collect(),
        meta,
    })
}

/// Budget knobs for the fold-level tuning searches.
#[derive(Debug, Clone)]
pub struct HousingOptions {
    /// Tune the network architecture per fold (otherwise use the fallback).
    pub select: bool,
    pub grid: HyperGrid,
    /// Upper bound on training rows used inside tuning searches; the final
    /// fit always uses the full training fold.
    pub tune_cap: usize,
    pub dnn_config: TrainConfig,
    pub fallback_depth: usize,
    pub fallback_width: usize,
    pub nw_rule: BandwidthRule,
    pub gam_lambdas: Vec<f64>,
}

impl Default for HousingOptions {
    fn default() -> Self {
        HousingOptions {
            select: true,
            grid: HyperGrid::reduced(),
            tune_cap: 1000,
            dnn_config: TrainConfig::default(),
            fallback_depth: 3,
            fallback_width: 32,
            nw_rule: BandwidthRule::CrossValidation,
            gam_lambdas: default_lambda_grid(),
        }
    }
}

/// Cross-validation outcome for one method.
#[derive(Debug, Clone)]
pub struct CvReport {
    pub method: Method,
    pub k: usize,
    /// Per-fold prediction error; `None` marks a failed fold.
    pub fold_mspe: Vec<Option<f64>>,
    pub failures: usize,
    /// Mean over the successful folds.
    pub mean_mspe: f64,
    /// Out-of-fold prediction for every record (by the model that held that
    /// record out); `None` where the owning fold failed.
    pub predictions: Vec<Option<f64>>,
}

fn subsample_indices(pool: &[usize], cap: usize, seed: u64) -> Vec<usize> {
    use rand::seq::SliceRandom;
    if pool.len() <= cap {
        return pool.to_vec();
    }
    let mut shuffled = pool.to_vec();
    shuffled.shuffle(&mut rng_from_seed(seed));
    shuffled.truncate(cap);
    shuffled
}

fn rows_of(x: &Mat, idx: &[usize]) -> Mat {
    let rows: Vec<Vec<f64>> = idx.iter().map(|&i| x.row(i).to_vec()).collect();
    Mat::from_rows(&rows).expect("rectangular subset")
}

fn fit_and_predict_fold(
    method: Method,
    train: &ProcessedDataset,
    x_test: &Mat,
    fold_seed: u64,
    options: &HousingOptions,
) -> Result<Vec<f64>> {
    let x = &train.covariates;
    let y = &train.response;
    let n = y.len();
    let all: Vec<usize> = (0..n).collect();
    let tune_idx = subsample_indices(&all, options.tune_cap, derive_seed(fold_seed, &[1]));
    let x_tune = rows_of(x, &tune_idx);
    let y_tune: Vec<f64> = tune_idx.iter().map(|&i| y[i]).collect();

    match method {
        Method::Dnn => {
            let (depth, width, mut cfg) = if options.select && y_tune.len() >= 25 {
                let sel = select_hyperparams(
                    &x_tune,
                    &y_tune,
                    &options.grid,
                    derive_seed(fold_seed, &[2]),
                )?;
                let mut cfg = options.dnn_config.clone();
                cfg.learning_rate = sel.config.learning_rate;
                cfg.l1_lambda = sel.config.l1_lambda;
                (sel.depth, sel.width, cfg)
            } else {
                (
                    options.fallback_depth,
                    options.fallback_width,
                    options.dnn_config.clone(),
                )
            };
            cfg.seed = derive_seed(fold_seed, &[3]);
            let model = DnnEstimator::fit(x, y, depth, width, &cfg)?;
            Ok(model.predict_all(x_test))
        }
        Method::Nw => {
            let h = bandwidth_select(
                &x_tune,
                &y_tune,
                KernelKind::Gaussian,
                options.nw_rule,
                derive_seed(fold_seed, &[4]),
            )?;
            let model = NwModel::fit(x.clone(), y.clone(), KernelSpec::new(KernelKind::Gaussian, h)?)?;
            Ok(model.predict_all(x_test))
        }
        Method::Gam => {
            let tune_cfg = GamConfig::for_data(y_tune.len(), &y_tune);
            let tuned = gam_fit_cv(
                &x_tune,
                &y_tune,
                &tune_cfg,
                &options.gam_lambdas,
                derive_seed(fold_seed, &[5]),
            )?;
            let mut cfg = GamConfig::for_data(n, y);
            cfg.lambda = tuned.lambda();
            let model = gam_fit(x, y, &cfg)?;
            Ok(model.predict_all(x_test))
        }
    }
}

/// Seeded k-fold cross-validation of one method: transforms and tuning are
/// refit on every training fold, predictions are scored on the held-out fold
/// in raw response units.
pub fn kfold_mspe(
    records: &[HousingRecord],
    method: Method,
    k: usize,
    seed: u64,
    options: &HousingOptions,
) -> Result<CvReport> {
    let n = records.len();
    if k < 2 {
        return Err(Error::invalid(format!("need at least 2 folds, got {k}")));
    }
    if n < k {
        return Err(Error::invalid(format!(
            "need at least as many records ({n}) as folds ({k})"
        )));
    }
    let folds = kfold_indices(n, k, derive_seed(seed, &[10]));

    let tasks: Vec<(usize, Vec<usize>)> = folds.into_iter().enumerate().collect();
    let outcomes: Vec<(usize, Vec<usize>, std::result::Result<(f64, Vec<f64>), String>)> =
        par_map(tasks, |(fi, fold)| {
            let run = || -> Result<(f64, Vec<f64>)> {
                let hold: std::collections::HashSet<usize> = fold.iter().copied().collect();
                let train_records: Vec<HousingRecord> = (0..n)
                    .filter(|i| !hold.contains(i))
                    .map(|i| records[i])
                    .collect();
                let test_records: Vec<HousingRecord> =
                    fold.iter().map(|&i| records[i]).collect();
                let train = preprocess(&train_records)?;
                let x_test = train.meta.apply(&test_records)?;
                let fold_seed = derive_seed(seed, &[20, fi as u64]);
                let preds = fit_and_predict_fold(method, &train, &x_test, fold_seed, options)?;
                let y_test: Vec<f64> =
                    test_records.iter().map(|r| r.median_house_value).collect();
                let mspe = crate::simbench::mspe(&preds, &y_test)?;
                Ok((mspe, preds))
            };
            let outcome = run().map_err(|e| e.to_string());
            (fi, fold, outcome)
        });

    let mut fold_mspe = vec![None; k];
    let mut predictions = vec![None; n];
    let mut failures = 0usize;
    let mut successes = Vec::new();
    for (fi, fold, outcome) in outcomes {
        match outcome {
            Ok((mspe, preds)) => {
                fold_mspe[fi] = Some(mspe);
                successes.push(mspe);
                for (slot, &record_idx) in fold.iter().enumerate() {
                    predictions[record_idx] = Some(preds[slot]);
                }
            }
            Err(_) => failures += 1,
        }
    }
    if successes.is_empty() {
        return Err(Error::Degenerate(format!(
            "all {k} folds failed for method {}",
            method.as_str()
        )));
    }
    Ok(CvReport {
        method,
        k,
        fold_mspe,
        failures,
        mean_mspe: mean(&successes),
        predictions,
    })
}

/// Renders per-fold scores for one or more methods.
pub fn folds_csv(reports: &[CvReport]) -> String {
    let mut out = String::from("fold,method,mspe\n");
    for report in reports {
        for (fi, score) in report.fold_mspe.iter().enumerate() {
            let cell = score.map(fmt_f64).unwrap_or_else(|| "NA".into());
            out.push_str(&format!("{},{},{}\n", fi, report.method.as_str(), cell));
        }
    }
    out
}

/// Renders the aggregate comparison table.
pub fn housing_summary_csv(reports: &[CvReport]) -> String {
    let mut out = String::from("method,folds,failures,mean_mspe\n");
    for report in reports {
        out.push_str(&format!(
            "{},{},{},{}\n",
            report.method.as_str(),
            report.k,
            report.failures,
            fmt_f64(report.mean_mspe),
        ));
    }
    out
}

/// Renders out-of-fold predictions with coordinates for external mapping.
pub fn predictions_csv(records: &[HousingRecord], report: &CvReport) -> String {
    let mut out = String::from("lon,lat,observed,predicted\n");
    for (r, pred) in records.iter().zip(&report.predictions) {
        let cell = pred.map(fmt_f64).unwrap_or_else(|| "NA".into());
        out.push_str(&format!(
            "{},{},{},{}\n",
            fmt_f64(r.longitude),
            fmt_f64(r.latitude),
            fmt_f64(r.median_house_value),
            cell,
        ));
    }
    out
}
