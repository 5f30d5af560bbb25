//! Sparse ReLU network estimator.
//!
//! Networks use shifted ReLU activations σ_v(z) = max(0, z − v) on hidden
//! layers and a linear scalar output with no shift. Training is mini-batch
//! Adam on mean squared error followed, after every step, by an L1 proximal
//! soft-threshold on weight entries (shifts are exempt), which drives exact
//! zeros into the weight matrices. Several random restarts are fitted and the
//! one with the lowest final training MSE is kept.

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::util::{derive_seed, rng_from_seed};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

/// Layer widths `p_0, …, p_{L+1}` of a network with `L` hidden layers.
///
/// The output width `p_{L+1}` must be 1 (scalar regression).
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct NetworkShape {
    widths: Vec<usize>,
}

impl NetworkShape {
    pub fn new(widths: Vec<usize>) -> Result<Self> {
        if widths.len() < 2 {
            return Err(Error::invalid("network shape needs at least input and output widths"));
        }
        if widths.iter().any(|&w| w == 0) {
            return Err(Error::invalid("network widths must all be positive"));
        }
        if *widths.last().unwrap() != 1 {
            return Err(Error::invalid("output width must be 1"));
        }
        Ok(NetworkShape { widths })
    }

    /// Input width followed by `depth` copies of `width`, then the scalar output.
    pub fn rectangular(input_dim: usize, depth: usize, width: usize) -> Result<Self> {
        let mut widths = vec![input_dim];
        widths.extend(std::iter::repeat(width).take(depth));
        widths.push(1);
        Self::new(widths)
    }

    /// Number of hidden layers `L`.
    pub fn depth(&self) -> usize {
        self.widths.len() - 2
    }

    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }
}

/// Weights and shifts of a network.
///
/// `weights[l]` is the `widths[l+1] × widths[l]` matrix `W_l` stored row-major
/// (`l = 0..=L`); `shifts[l]` is the shift vector of hidden layer `l+1`
/// (`l = 0..L`). The input has no shift and the output layer has neither
/// shift nor activation.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams {
    shape: NetworkShape,
    weights: Vec<Vec<f64>>,
    shifts: Vec<Vec<f64>>,
}

impl NetworkParams {
    pub fn shape(&self) -> &NetworkShape {
        &self.shape
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    pub fn shifts(&self) -> &[Vec<f64>] {
        &self.shifts
    }

    pub fn weights_mut(&mut self) -> &mut [Vec<f64>] {
        &mut self.weights
    }

    pub fn shifts_mut(&mut self) -> &mut [Vec<f64>] {
        &mut self.shifts
    }

    /// Builds from explicit tensors, validating all dimensions.
    pub fn from_parts(
        shape: NetworkShape,
        weights: Vec<Vec<f64>>,
        shifts: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let l = shape.depth();
        if weights.len() != l + 1 {
            return Err(Error::invalid(format!(
                "expected {} weight matrices, got {}",
                l + 1,
                weights.len()
            )));
        }
        if shifts.len() != l {
            return Err(Error::invalid(format!(
                "expected {} shift vectors, got {}",
                l,
                shifts.len()
            )));
        }
        for (i, w) in weights.iter().enumerate() {
            let want = shape.widths[i + 1] * shape.widths[i];
            if w.len() != want {
                return Err(Error::invalid(format!(
                    "weight matrix {i} has {} entries, expected {want}",
                    w.len()
                )));
            }
        }
        for (i, v) in shifts.iter().enumerate() {
            if v.len() != shape.widths[i + 1] {
                return Err(Error::invalid(format!(
                    "shift vector {i} has length {}, expected {}",
                    v.len(),
                    shape.widths[i + 1]
                )));
            }
        }
        if weights
            .iter()
            .flatten()
            .chain(shifts.iter().flatten())
            .any(|v| !v.is_finite())
        {
            return Err(Error::invalid("network parameters must be finite"));
        }
        Ok(NetworkParams {
            shape,
            weights,
            shifts,
        })
    }
}

/// Draws initial parameters: weights from a zero-mean normal scaled by
/// fan-in (sd √(2/p_l) for `W_l`), shifts identically zero.
pub fn init_params(shape: &NetworkShape, seed: u64) -> NetworkParams {
    let mut rng = rng_from_seed(seed);
    let l = shape.depth();
    let mut weights = Vec::with_capacity(l + 1);
    for i in 0..=l {
        let fan_in = shape.widths[i];
        let sd = (2.0 / fan_in as f64).sqrt();
        let n = shape.widths[i + 1] * fan_in;
        weights.push(
            (0..n)
                .map(|_| sd * rng.sample::<f64, _>(StandardNormal))
                .collect(),
        );
    }
    let shifts = (0..l).map(|i| vec![0.0; shape.widths[i + 1]]).collect();
    NetworkParams {
        shape: shape.clone(),
        weights,
        shifts,
    }
}

#[inline]
fn layer_forward(w: &[f64], input: &[f64], out: &mut [f64]) {
    let in_dim = input.len();
    for (j, o) in out.iter_mut().enumerate() {
        *o = crate::linalg::dot(&w[j * in_dim..(j + 1) * in_dim], input);
    }
}

/// Evaluates the network at `x`; `clamp = Some(F)` truncates the output to
/// `[−F, F]` (applied at prediction only, never during training).
pub fn forward(params: &NetworkParams, x: &[f64], clamp: Option<f64>) -> f64 {
    let shape = &params.shape;
    debug_assert_eq!(x.len(), shape.input_dim());
    let l = shape.depth();
    let mut a: Vec<f64> = x.to_vec();
    let mut z: Vec<f64> = Vec::new();
    for i in 0..l {
        z.resize(shape.widths[i + 1], 0.0);
        layer_forward(&params.weights[i], &a, &mut z);
        for (zj, vj) in z.iter_mut().zip(&params.shifts[i]) {
            *zj = (*zj - *vj).max(0.0);
        }
        std::mem::swap(&mut a, &mut z);
    }
    let out = crate::linalg::dot(&params.weights[l], &a);
    match clamp {
        Some(f) => out.clamp(-f, f),
        None => out,
    }
}

/// Predictions over the rows of `x`.
pub fn predict(params: &NetworkParams, x: &Mat, clamp: Option<f64>) -> Vec<f64> {
    (0..x.n_rows()).map(|i| forward(params, x.row(i), clamp)).collect()
}

/// Gradient (or Adam-moment) buffers with the same layout as the parameters.
#[derive(Debug, Clone)]
pub struct ParamBuffers {
    pub weights: Vec<Vec<f64>>,
    pub shifts: Vec<Vec<f64>>,
}

impl ParamBuffers {
    pub fn zeros_like(params: &NetworkParams) -> Self {
        ParamBuffers {
            weights: params.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            shifts: params.shifts.iter().map(|v| vec![0.0; v.len()]).collect(),
        }
    }

    fn reset(&mut self) {
        for w in &mut self.weights {
            w.iter_mut().for_each(|x| *x = 0.0);
        }
        for v in &mut self.shifts {
            v.iter_mut().for_each(|x| *x = 0.0);
        }
    }
}

/// Reusable forward/backward scratch space.
struct Scratch {
    acts: Vec<Vec<f64>>,
    delta: Vec<f64>,
    delta_next: Vec<f64>,
}

impl Scratch {
    fn new(shape: &NetworkShape) -> Self {
        let l = shape.depth();
        Scratch {
            acts: (0..=l).map(|i| vec![0.0; shape.widths[i]]).collect(),
            delta: Vec::new(),
            delta_next: Vec::new(),
        }
    }
}

/// Mean squared error over the indexed samples and its exact gradient.
///
/// The ReLU subgradient at exactly zero pre-activation is taken to be zero.
pub fn loss_and_grads(
    params: &NetworkParams,
    x: &Mat,
    y: &[f64],
    idx: &[usize],
    grads: &mut ParamBuffers,
) -> f64 {
    let mut scratch = Scratch::new(&params.shape);
    loss_and_grads_with(params, x, y, idx, grads, &mut scratch)
}

fn loss_and_grads_with(
    params: &NetworkParams,
    x: &Mat,
    y: &[f64],
    idx: &[usize],
    grads: &mut ParamBuffers,
    scratch: &mut Scratch,
) -> f64 {
    let l = params.shape.depth();
    let b = idx.len();
    debug_assert!(b > 0);
    grads.reset();
    let mut loss = 0.0;
    for &i in idx {
        // forward pass, keeping post-activation values per layer
        scratch.acts[0].copy_from_slice(x.row(i));
        for li in 0..l {
            let (lower, upper) = scratch.acts.split_at_mut(li + 1);
            layer_forward(&params.weights[li], &lower[li], &mut upper[0]);
            for (zj, vj) in upper[0].iter_mut().zip(&params.shifts[li]) {
                *zj = (*zj - *vj).max(0.0);
            }
        }
        let out = crate::linalg::dot(&params.weights[l], &scratch.acts[l]);
        let err = out - y[i];
        loss += err * err;
        let g = 2.0 * err / b as f64;

        // output layer gradient and initial delta
        let top = &scratch.acts[l];
        for (gw, &a) in grads.weights[l].iter_mut().zip(top) {
            *gw += g * a;
        }
        if l == 0 {
            continue;
        }
        scratch.delta.clear();
        scratch
            .delta
            .extend(top.iter().zip(&params.weights[l]).map(|(&a, &w)| {
                if a > 0.0 {
                    g * w
                } else {
                    0.0
                }
            }));

        // hidden layers, top down: delta is dLoss/d(pre-shift activation)
        for li in (0..l).rev() {
            let in_dim = params.shape.widths[li];
            let a_in = &scratch.acts[li];
            let delta = &scratch.delta;
            for (j, &dj) in delta.iter().enumerate() {
                if dj == 0.0 {
                    continue;
                }
                grads.shifts[li][j] -= dj;
                let row = &mut grads.weights[li][j * in_dim..(j + 1) * in_dim];
                for (gw, &a) in row.iter_mut().zip(a_in) {
                    *gw += dj * a;
                }
            }
            if li == 0 {
                break;
            }
            scratch.delta_next.clear();
            scratch.delta_next.resize(in_dim, 0.0);
            for (j, &dj) in delta.iter().enumerate() {
                if dj == 0.0 {
                    continue;
                }
                let row = &params.weights[li][j * in_dim..(j + 1) * in_dim];
                for (dn, &w) in scratch.delta_next.iter_mut().zip(row) {
                    *dn += dj * w;
                }
            }
            for (dn, &a) in scratch.delta_next.iter_mut().zip(a_in) {
                if a <= 0.0 {
                    *dn = 0.0;
                }
            }
            std::mem::swap(&mut scratch.delta, &mut scratch.delta_next);
        }
    }
    loss / b as f64
}

/// Training configuration for [`fit`].
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// L1 penalty weight; the proximal threshold is `learning_rate · l1_lambda`.
    pub l1_lambda: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub restarts: usize,
    /// Prediction-time output bound `F` (must be ≥ 1).
    pub clamp: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            l1_lambda: 0.0,
            epochs: 500,
            batch_size: 32,
            restarts: 3,
            clamp: 1000.0,
            seed: 0,
        }
    }
}

impl TrainConfig {
    fn validate(&self, n: usize, input_dim: usize, shape: &NetworkShape) -> Result<()> {
        if n == 0 {
            return Err(Error::invalid("training data is empty"));
        }
        if shape.input_dim() != input_dim {
            return Err(Error::invalid(format!(
                "network input width {} does not match covariate dimension {input_dim}",
                shape.input_dim()
            )));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::invalid("learning_rate must be positive"));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::invalid("Adam betas must lie in [0, 1)"));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::invalid("epsilon must be positive"));
        }
        if self.l1_lambda < 0.0 {
            return Err(Error::invalid("l1_lambda must be nonnegative"));
        }
        if self.epochs == 0 || self.restarts == 0 {
            return Err(Error::invalid("epochs and restarts must be at least 1"));
        }
        if self.batch_size == 0 || self.batch_size > n {
            return Err(Error::invalid(format!(
                "batch_size must lie in 1..={n}, got {}",
                self.batch_size
            )));
        }
        if !(self.clamp >= 1.0) {
            return Err(Error::invalid("clamp bound F must be at least 1"));
        }
        Ok(())
    }
}

/// Adam optimiser state (first/second moments plus the step counter).
#[derive(Debug, Clone)]
pub struct AdamState {
    pub m: ParamBuffers,
    pub v: ParamBuffers,
    pub t: u64,
}

impl AdamState {
    pub fn new(params: &NetworkParams) -> Self {
        AdamState {
            m: ParamBuffers::zeros_like(params),
            v: ParamBuffers::zeros_like(params),
            t: 0,
        }
    }
}

#[inline]
fn adam_update_tensor(
    theta: &mut [f64],
    m: &mut [f64],
    v: &mut [f64],
    g: &[f64],
    cfg: &TrainConfig,
    bc1: f64,
    bc2: f64,
) {
    for i in 0..theta.len() {
        m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
        v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
        let m_hat = m[i] / bc1;
        let v_hat = v[i] / bc2;
        theta[i] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
    }
}

/// One bias-corrected Adam step over all parameters.
pub fn adam_step(
    params: &mut NetworkParams,
    state: &mut AdamState,
    grads: &ParamBuffers,
    cfg: &TrainConfig,
) {
    state.t += 1;
    let bc1 = 1.0 - cfg.beta1.powi(state.t as i32);
    let bc2 = 1.0 - cfg.beta2.powi(state.t as i32);
    for i in 0..params.weights.len() {
        adam_update_tensor(
            &mut params.weights[i],
            &mut state.m.weights[i],
            &mut state.v.weights[i],
            &grads.weights[i],
            cfg,
            bc1,
            bc2,
        );
    }
    for i in 0..params.shifts.len() {
        adam_update_tensor(
            &mut params.shifts[i],
            &mut state.m.shifts[i],
            &mut state.v.shifts[i],
            &grads.shifts[i],
            cfg,
            bc1,
            bc2,
        );
    }
}

/// Soft-thresholds every weight entry by `threshold`; shifts are untouched.
pub fn prox_l1(params: &mut NetworkParams, threshold: f64) {
    debug_assert!(threshold >= 0.0);
    for w in &mut params.weights {
        for x in w.iter_mut() {
            let a = x.abs() - threshold;
            *x = if a <= 0.0 { 0.0 } else { a * x.signum() };
        }
    }
}

/// Number of entries with absolute value above `tol`, over weights and shifts.
pub fn sparsity(params: &NetworkParams, tol: f64) -> usize {
    params
        .weights
        .iter()
        .flatten()
        .chain(params.shifts.iter().flatten())
        .filter(|v| v.abs() > tol)
        .count()
}

/// Membership report for the constrained network class.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassReport {
    /// max over layers of ‖W_j‖_∞ + |v_j|_∞ (v_0 ≡ 0).
    pub sup_layer_norm: f64,
    pub max_norm_ok: bool,
    pub nonzero_count: usize,
    pub sparsity_ok: bool,
    pub clamp_enabled: bool,
}

/// Checks the class constraints: layerwise sup-norm at most 1, at most `tau`
/// nonzero entries (at tolerance `tol`), output clamp configured.
pub fn class_check(
    params: &NetworkParams,
    tau: usize,
    clamp: Option<f64>,
    tol: f64,
) -> ClassReport {
    let sup = |xs: &[f64]| xs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut sup_layer_norm = 0.0f64;
    for (j, w) in params.weights.iter().enumerate() {
        let shift_part = if j == 0 {
            0.0
        } else {
            sup(&params.shifts[j - 1])
        };
        sup_layer_norm = sup_layer_norm.max(sup(w) + shift_part);
    }
    let nonzero_count = sparsity(params, tol);
    ClassReport {
        sup_layer_norm,
        max_norm_ok: sup_layer_norm <= 1.0,
        nonzero_count,
        sparsity_ok: nonzero_count <= tau,
        clamp_enabled: clamp.is_some(),
    }
}

/// Outcome of [`fit`]: selected parameters plus training diagnostics.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub params: NetworkParams,
    /// Per-epoch training MSE (mini-batch average) of the selected restart.
    pub loss_trace: Vec<f64>,
    /// Full-data training MSE of the selected restart after the last epoch.
    pub final_mse: f64,
    /// Nonzero parameter count of the selected network (exact zeros only).
    pub tau_hat: usize,
    /// Final-MSE gap between the selected restart and the best restart.
    /// Selection picks the minimiser, so this is zero by construction; it is
    /// still computed as a difference and reported for auditability.
    pub delta_hat: f64,
    pub selected_restart: usize,
    pub config: TrainConfig,
}

struct RestartOutcome {
    params: NetworkParams,
    loss_trace: Vec<f64>,
    final_mse: f64,
}

fn fit_one_restart(
    x: &Mat,
    y: &[f64],
    shape: &NetworkShape,
    cfg: &TrainConfig,
    restart: usize,
) -> Result<RestartOutcome> {
    let n = y.len();
    let init_seed = derive_seed(cfg.seed, &[1, restart as u64]);
    let shuffle_seed = derive_seed(cfg.seed, &[2, restart as u64]);
    let mut params = init_params(shape, init_seed);
    let mut state = AdamState::new(&params);
    let mut grads = ParamBuffers::zeros_like(&params);
    let mut scratch = Scratch::new(shape);
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = rng_from_seed(shuffle_seed);
    let threshold = cfg.learning_rate * cfg.l1_lambda;
    let mut loss_trace = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_sq_sum = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let batch_mse = loss_and_grads_with(&params, x, y, batch, &mut grads, &mut scratch);
            epoch_sq_sum += batch_mse * batch.len() as f64;
            adam_step(&mut params, &mut state, &grads, cfg);
            if threshold > 0.0 {
                prox_l1(&mut params, threshold);
            }
        }
        let epoch_mse = epoch_sq_sum / n as f64;
        if !epoch_mse.is_finite() {
            return Err(Error::TrainingDiverged { epoch });
        }
        loss_trace.push(epoch_mse);
    }

    let final_mse = {
        let preds = predict(&params, x, None);
        preds
            .iter()
            .zip(y)
            .map(|(p, t)| (p - t) * (p - t))
            .sum::<f64>()
            / n as f64
    };
    if !final_mse.is_finite() {
        return Err(Error::TrainingDiverged { epoch: cfg.epochs });
    }
    Ok(RestartOutcome {
        params,
        loss_trace,
        final_mse,
    })
}

/// Trains the network with `restarts` independent initialisations and keeps
/// the restart with the lowest final training MSE.
pub fn fit(x: &Mat, y: &[f64], shape: &NetworkShape, cfg: &TrainConfig) -> Result<FitResult> {
    if x.n_rows() != y.len() {
        return Err(Error::invalid(format!(
            "covariate rows {} do not match responses {}",
            x.n_rows(),
            y.len()
        )));
    }
    cfg.validate(y.len(), x.n_cols(), shape)?;

    let mut outcomes = Vec::with_capacity(cfg.restarts);
    for r in 0..cfg.restarts {
        outcomes.push(fit_one_restart(x, y, shape, cfg, r)?);
    }
    let min_final = outcomes
        .iter()
        .map(|o| o.final_mse)
        .fold(f64::INFINITY, f64::min);
    let selected_restart = outcomes
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.final_mse.total_cmp(&b.1.final_mse))
        .map(|(i, _)| i)
        .unwrap();
    let chosen = outcomes.swap_remove(selected_restart);
    let tau_hat = sparsity(&chosen.params, 0.0);
    Ok(FitResult {
        delta_hat: chosen.final_mse - min_final,
        final_mse: chosen.final_mse,
        tau_hat,
        params: chosen.params,
        loss_trace: chosen.loss_trace,
        selected_restart,
        config: cfg.clone(),
    })
}

/// Serialised network document version tag.
pub const PARAMS_FORMAT: &str = "sparse-relu-net/v1";

#[derive(serde::Serialize, serde::Deserialize)]
struct ParamsDoc {
    format: String,
    widths: Vec<usize>,
    weights: Vec<Vec<f64>>,
    shifts: Vec<Vec<f64>>,
}

/// Serialises parameters to a versioned JSON document (row-major weights).
pub fn params_to_json(params: &NetworkParams) -> Result<String> {
    let doc = ParamsDoc {
        format: PARAMS_FORMAT.to_string(),
        widths: params.shape.widths.clone(),
        weights: params.weights.clone(),
        shifts: params.shifts.clone(),
    };
    Ok(serde_json::to_string_pretty(&doc)?)
}

/// Parses a JSON document produced by [`params_to_json`], validating the
/// version tag and all tensor dimensions.
pub fn params_from_json(json: &str) -> Result<NetworkParams> {
    let doc: ParamsDoc = serde_json::from_str(json)?;
    if doc.format != PARAMS_FORMAT {
        return Err(Error::invalid(format!(
            "unsupported network document format `{}` (expected `{PARAMS_FORMAT}`)",
            doc.format
        )));
    }
    let shape = NetworkShape::new(doc.widths)?;
    NetworkParams::from_parts(shape, doc.weights, doc.shifts)
}
