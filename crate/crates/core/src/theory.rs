//! Calculators for the closed-form theoretical quantities: compositional
//! smoothness bookkeeping, intrinsic smoothness/dimension reduction, the
//! covering-number bound, the oracle-inequality remainder, the convergence
//! rate with its prescribed network schedule, and the approximation bound
//! with explicit architecture sizing.
//!
//! Every scale-level quantity is reported with suppressed universal constants
//! set to 1; outputs are order statements (scale, not value). All logarithms
//! are natural. Bounds are assembled in log space so extreme-but-legal inputs
//! (sparsity up to 1e6, depth up to 1e3) stay finite.

use crate::error::{Error, Result};
use std::sync::Arc;

/// A Hölder smoothness level: finite positive order or the infinite marker
/// (used for layers that are infinitely smooth, e.g. exact sums).
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum Smoothness {
    Finite(f64),
    Infinite,
}

impl Smoothness {
    /// β ∧ 1 as used inside smoothness products (infinite counts as 1).
    pub fn min_one(self) -> f64 {
        match self {
            Smoothness::Finite(b) => b.min(1.0),
            Smoothness::Infinite => 1.0,
        }
    }

    pub fn finite_value(self) -> Option<f64> {
        match self {
            Smoothness::Finite(b) => Some(b),
            Smoothness::Infinite => None,
        }
    }

    fn validate(self) -> Result<()> {
        if let Smoothness::Finite(b) = self {
            if !(b > 0.0) || !b.is_finite() {
                return Err(Error::invalid(format!(
                    "finite smoothness must be positive, got {b}"
                )));
            }
        }
        Ok(())
    }
}

/// Layer evaluator: a vector function applied at one composition level.
pub type LayerEval = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// Description of a compositional regression function
/// f₀ = g_{L*} ∘ … ∘ g_1 ∘ g_0 with per-layer dimensions, active
/// dimensions, smoothness orders, domains, and Hölder constants.
#[derive(Clone)]
pub struct CsSpec {
    /// Ambient input dimensions r_0..r_{L*+1} (r_{L*+1} = 1).
    r: Vec<usize>,
    /// Active (intrinsic) dimensions r̃_0..r̃_{L*}, r̃_i ≤ r_i.
    r_tilde: Vec<usize>,
    /// Smoothness orders β_0..β_{L*}.
    beta: Vec<Smoothness>,
    /// Layer input domains [a_i, b_i] for i = 0..L*+1.
    a: Vec<f64>,
    b: Vec<f64>,
    /// Hölder constants C_0..C_{L*}, each > 1.
    c: Vec<f64>,
    evaluators: Option<Vec<LayerEval>>,
}

impl std::fmt::Debug for CsSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CsSpec")
            .field("depth", &self.depth())
            .field("r", &self.r)
            .field("r_tilde", &self.r_tilde)
            .field("beta", &self.beta)
            .field("a", &self.a)
            .field("b", &self.b)
            .field("c", &self.c)
            .field("has_evaluators", &self.evaluators.is_some())
            .finish()
    }
}

impl CsSpec {
    pub fn new(
        r: Vec<usize>,
        r_tilde: Vec<usize>,
        beta: Vec<Smoothness>,
        a: Vec<f64>,
        b: Vec<f64>,
        c: Vec<f64>,
    ) -> Result<Self> {
        if r.len() < 2 {
            return Err(Error::invalid(
                "composition needs at least one layer (r has length L*+2)",
            ));
        }
        let depth = r.len() - 2; // L*
        if r_tilde.len() != depth + 1 || beta.len() != depth + 1 || c.len() != depth + 1 {
            return Err(Error::invalid(
                "active dimensions, smoothness orders, and Hölder constants must all have length L*+1",
            ));
        }
        if a.len() != depth + 2 || b.len() != depth + 2 {
            return Err(Error::invalid("domain endpoint lists must have length L*+2"));
        }
        if *r.last().unwrap() != 1 {
            return Err(Error::invalid("output dimension r_{L*+1} must be 1"));
        }
        if r.iter().any(|&v| v == 0) || r_tilde.iter().any(|&v| v == 0) {
            return Err(Error::invalid("all dimensions must be positive"));
        }
        for i in 0..=depth {
            if r_tilde[i] > r[i] {
                return Err(Error::invalid(format!(
                    "active dimension {} at layer {i} exceeds ambient dimension {}",
                    r_tilde[i], r[i]
                )));
            }
            if !(c[i] > 1.0) || !c[i].is_finite() {
                return Err(Error::invalid(format!(
                    "Hölder constant at layer {i} must exceed 1, got {}",
                    c[i]
                )));
            }
            beta[i].validate()?;
        }
        for i in 0..=depth + 1 {
            if !(a[i] < b[i]) || !a[i].is_finite() || !b[i].is_finite() {
                return Err(Error::invalid(format!(
                    "domain [{}, {}] at layer {i} is not a proper interval",
                    a[i], b[i]
                )));
            }
            if i <= depth && (a[i].abs() > c[i] || b[i].abs() > c[i]) {
                return Err(Error::invalid(format!(
                    "domain endpoints at layer {i} exceed the Hölder constant {}",
                    c[i]
                )));
            }
        }
        Ok(CsSpec {
            r,
            r_tilde,
            beta,
            a,
            b,
            c,
            evaluators: None,
        })
    }

    /// Attaches numeric layer evaluators (one per composition level).
    pub fn with_evaluators(mut self, evaluators: Vec<LayerEval>) -> Result<Self> {
        if evaluators.len() != self.depth() + 1 {
            return Err(Error::invalid(format!(
                "expected {} evaluators, got {}",
                self.depth() + 1,
                evaluators.len()
            )));
        }
        self.evaluators = Some(evaluators);
        Ok(self)
    }

    /// Number of composed maps minus one (`L*`).
    pub fn depth(&self) -> usize {
        self.r.len() - 2
    }

    pub fn r(&self) -> &[usize] {
        &self.r
    }

    pub fn r_tilde(&self) -> &[usize] {
        &self.r_tilde
    }

    pub fn beta(&self) -> &[Smoothness] {
        &self.beta
    }

    pub fn domains(&self) -> (&[f64], &[f64]) {
        (&self.a, &self.b)
    }

    pub fn holder_constants(&self) -> &[f64] {
        &self.c
    }
}

/// The additive-then-link composition (coordinate-wise transforms, exact sum,
/// scalar link): three levels with smoothness (β_h, ∞, β_φ) and active
/// dimensions (d, d, 1).
pub fn gam_composition_spec(d: usize, beta_h: f64, beta_phi: f64) -> Result<CsSpec> {
    let dd = d as f64;
    CsSpec::new(
        vec![d, d, 1, 1],
        vec![d, d, 1],
        vec![
            Smoothness::Finite(beta_h),
            Smoothness::Infinite,
            Smoothness::Finite(beta_phi),
        ],
        vec![0.0, -1.0, -dd, -2.0 * dd],
        vec![1.0, 1.0, dd, 2.0 * dd],
        vec![2.0, dd + 1.0, dd + 1.0],
    )
}

/// Per-layer effective smoothness and the minimising layer.
#[derive(Debug, Clone, PartialEq)]
pub struct IntrinsicSummary {
    /// β_i* = β_i · Π_{s>i} (β_s ∧ 1).
    pub beta_star_per_layer: Vec<Smoothness>,
    /// β_i* / r̃_i (infinite β_i* gives +∞).
    pub ratios: Vec<f64>,
    /// argmin of the ratios (ties → smallest index; all-infinite → 0).
    pub i_star: usize,
    pub beta_star: Smoothness,
    pub r_star: usize,
    /// Π_{l=1}^{L*} (β_l ∧ 1) — the exponent driving the depth term of the rate.
    pub min_smoothness_product: f64,
    /// True when every ratio is infinite (no finite smoothness anywhere).
    pub degenerate: bool,
}

/// Reduces a composition to its intrinsic smoothness β* and dimension r*.
pub fn intrinsic(spec: &CsSpec) -> IntrinsicSummary {
    let depth = spec.depth();
    // Suffix products q_i = Π_{s=i+1}^{L*} (β_s ∧ 1), with q_{L*} = 1.
    let mut q = vec![1.0f64; depth + 2];
    for i in (0..=depth).rev() {
        q[i] = q[i + 1] * spec.beta[i].min_one();
    }
    let beta_star_per_layer: Vec<Smoothness> = (0..=depth)
        .map(|i| match spec.beta[i] {
            Smoothness::Finite(b) => Smoothness::Finite(b * q[i + 1]),
            Smoothness::Infinite => Smoothness::Infinite,
        })
        .collect();
    let ratios: Vec<f64> = beta_star_per_layer
        .iter()
        .zip(&spec.r_tilde)
        .map(|(bs, &rt)| match bs {
            Smoothness::Finite(v) => v / rt as f64,
            Smoothness::Infinite => f64::INFINITY,
        })
        .collect();
    let mut i_star = 0usize;
    for (i, &r) in ratios.iter().enumerate() {
        if r < ratios[i_star] {
            i_star = i;
        }
    }
    let degenerate = ratios.iter().all(|r| r.is_infinite());
    IntrinsicSummary {
        beta_star: beta_star_per_layer[i_star],
        r_star: spec.r_tilde[i_star],
        min_smoothness_product: q[1],
        beta_star_per_layer,
        ratios,
        i_star,
        degenerate,
    }
}

/// Evaluates the composition numerically, checking every intermediate against
/// its declared layer domain (tolerance 1e−9).
pub fn eval_cs(spec: &CsSpec, z: &[f64]) -> Result<f64> {
    const TOL: f64 = 1e-9;
    let evals = spec
        .evaluators
        .as_ref()
        .ok_or_else(|| Error::invalid("composition has no attached evaluators"))?;
    if z.len() != spec.r[0] {
        return Err(Error::invalid(format!(
            "input has dimension {}, expected {}",
            z.len(),
            spec.r[0]
        )));
    }
    let check = |values: &[f64], layer: usize| -> Result<()> {
        let (lo, hi) = (spec.a[layer], spec.b[layer]);
        for &v in values {
            if !v.is_finite() || v < lo - TOL || v > hi + TOL {
                return Err(Error::DomainViolation {
                    layer,
                    value: v,
                    lo,
                    hi,
                });
            }
        }
        Ok(())
    };
    check(z, 0)?;
    let mut current = z.to_vec();
    for (i, g) in evals.iter().enumerate() {
        current = g(&current);
        if current.len() != spec.r[i + 1] {
            return Err(Error::invalid(format!(
                "evaluator {i} produced dimension {}, expected {}",
                current.len(),
                spec.r[i + 1]
            )));
        }
        check(&current, i + 1)?;
    }
    debug_assert_eq!(current.len(), 1);
    Ok(current[0])
}

/// Shared inputs for the bound calculators. Each calculator reads the subset
/// it needs; `validate` enforces the joint constraints once.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BoundInputs {
    /// Sample size.
    pub n: usize,
    /// Network sparsity budget τ.
    pub tau: f64,
    /// Network depth (hidden layers).
    pub l: usize,
    /// Network width parameter.
    pub n_width: usize,
    /// Input dimension of the network.
    pub d: usize,
    /// Confidence level δ ∈ (0, 1].
    pub delta: f64,
    /// Slack parameter ε ∈ (0, 1].
    pub epsilon: f64,
    /// Nugget standard deviation σ ≥ 0.
    pub sigma: f64,
    /// Trace of the field covariance matrix.
    pub tr_gamma: f64,
    /// Trace of the squared field covariance matrix.
    pub tr_gamma_sq: f64,
}

impl BoundInputs {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.l == 0 || self.n_width == 0 || self.d == 0 {
            return Err(Error::invalid("all counts must be positive"));
        }
        if !(self.tau >= 1.0) || !self.tau.is_finite() {
            return Err(Error::invalid(format!(
                "sparsity must be at least 1, got {}",
                self.tau
            )));
        }
        for (name, v) in [("delta", self.delta), ("epsilon", self.epsilon)] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::invalid(format!("{name} must lie in (0, 1], got {v}")));
            }
        }
        for (name, v) in [
            ("sigma", self.sigma),
            ("tr_gamma", self.tr_gamma),
            ("tr_gamma_sq", self.tr_gamma_sq),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::invalid(format!(
                    "{name} must be non-negative and finite, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Log covering number bound for the sparse network class:
/// (1 + τ)·ln(2^{5+2L} δ⁻¹ (L+1) τ^{2L} d²), assembled in log space.
pub fn covering_bound(l: usize, tau: f64, d: usize, delta: f64) -> Result<f64> {
    if l == 0 || d == 0 {
        return Err(Error::invalid("depth and input dimension must be positive"));
    }
    if !(tau >= 1.0) || !tau.is_finite() {
        return Err(Error::invalid(format!("sparsity must be at least 1, got {tau}")));
    }
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::invalid(format!("delta must lie in (0, 1], got {delta}")));
    }
    let lf = l as f64;
    let log_inner = (5.0 + 2.0 * lf) * std::f64::consts::LN_2 - delta.ln()
        + (lf + 1.0).ln()
        + 2.0 * lf * tau.ln()
        + 2.0 * (d as f64).ln();
    Ok((1.0 + tau) * log_inner)
}

/// Remainder controlling the gap between empirical and population risk:
/// ε⁻¹ [ δ(trΓ/n + 2√(trΓ²/n) + 3σ) + (τ/n)(ln(L/δ) + L·lnτ)(trΓ²/n + σ² + 1) ].
pub fn zeta_bound(inputs: &BoundInputs) -> Result<f64> {
    inputs.validate()?;
    let n = inputs.n as f64;
    let lf = inputs.l as f64;
    let field_part = inputs.delta
        * (inputs.tr_gamma / n + 2.0 * (inputs.tr_gamma_sq / n).sqrt() + 3.0 * inputs.sigma);
    let complexity = (inputs.tau / n)
        * ((lf / inputs.delta).ln() + lf * inputs.tau.ln())
        * (inputs.tr_gamma_sq / n + inputs.sigma * inputs.sigma + 1.0);
    Ok((field_part + complexity) / inputs.epsilon)
}

/// The additive pieces of the convergence-rate bound, in the order they
/// appear: depth term, width term, estimation term, proxy term.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RateTerms {
    /// (N 2^{−L})^{2·Π(β_l ∧ 1)} — vanishes once depth outruns width.
    pub depth_term: f64,
    /// N^{−2β*/r*} — the classical nonparametric component.
    pub width_term: f64,
    /// (trΓ² + n)(L N ln(L n²) + L² N ln(L N)) / n² — estimation error.
    pub estimation_term: f64,
    /// Caller-supplied proxy for the approximation gap.
    pub proxy_term: f64,
}

impl RateTerms {
    pub fn total(&self) -> f64 {
        self.depth_term + self.width_term + self.estimation_term + self.proxy_term
    }
}

/// Convergence-rate bound ς_n for given architecture (L, N), sample size n,
/// intrinsic summary, and a proxy value for the approximation gap.
pub fn varsigma_rate(
    inputs: &BoundInputs,
    intrinsic: &IntrinsicSummary,
    delta_proxy: f64,
) -> Result<RateTerms> {
    inputs.validate()?;
    if !(delta_proxy >= 0.0) || !delta_proxy.is_finite() {
        return Err(Error::invalid(format!(
            "approximation proxy must be non-negative and finite, got {delta_proxy}"
        )));
    }
    let n = inputs.n as f64;
    let lf = inputs.l as f64;
    let nf = inputs.n_width as f64;

    // (N·2^{−L})^{2q₀} in log space; q₀ = Π_{l≥1}(β_l ∧ 1).
    let q0 = intrinsic.min_smoothness_product;
    let log_base = nf.ln() - lf * std::f64::consts::LN_2;
    let depth_term = (2.0 * q0 * log_base).exp();

    // N^{−2β*/r*}; an infinitely smooth minimising layer degenerates to N^0 = 1
    // only at N = 1, otherwise the term vanishes.
    let width_term = match intrinsic.beta_star {
        Smoothness::Finite(b) => {
            let expo = -2.0 * b / intrinsic.r_star as f64;
            (expo * nf.ln()).exp()
        }
        Smoothness::Infinite => {
            if inputs.n_width > 1 {
                0.0
            } else {
                1.0
            }
        }
    };

    let estimation_term = (inputs.tr_gamma_sq + n)
        * (lf * nf * (lf * n * n).ln() + lf * lf * nf * (lf * nf).ln())
        / (n * n);

    Ok(RateTerms {
        depth_term,
        width_term,
        estimation_term,
        proxy_term: delta_proxy,
    })
}

/// The prescribed architecture schedule: L = ⌈ln n⌉ and N = ⌈n^{r*/(2β* + r*)}⌉
/// (N = 1 when the intrinsic smoothness is infinite).
pub fn rate_schedule(n: usize, intrinsic: &IntrinsicSummary) -> Result<(usize, usize)> {
    if n < 2 {
        return Err(Error::invalid("schedule needs a sample size of at least 2"));
    }
    let nf = n as f64;
    let l = nf.ln().ceil() as usize;
    let n_width = match intrinsic.beta_star {
        Smoothness::Finite(b) => {
            let expo = intrinsic.r_star as f64 / (2.0 * b + intrinsic.r_star as f64);
            nf.powf(expo).ceil() as usize
        }
        Smoothness::Infinite => 1,
    };
    Ok((l.max(1), n_width.max(1)))
}

/// Architecture sizing and approximation error for realising a composition
/// with a sparse network of width parameter N and precision parameter m.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ApproxReport {
    /// Accumulated domain-rescaling constants C̃_0..C̃_{L*}.
    pub c_tilde: Vec<f64>,
    /// Sub-network depths L_0..L_{L*}.
    pub layer_depths: Vec<usize>,
    /// Total depth L = 3L* + Σ L_i.
    pub total_depth: usize,
    /// Width multiplier η = max_i r_{i+1}(r̃_i + ⌈β_i⌉).
    pub eta: usize,
    /// Uniform width 6ηN.
    pub width: usize,
    /// Per-layer sparsity contributions τ_i.
    pub layer_sparsity: Vec<f64>,
    /// Total sparsity budget Σ r_{i+1}(τ_i + 4).
    pub sparsity_cap: f64,
    /// The approximation-error bound itself.
    pub bound: f64,
}

/// Computes the sizing report and approximation bound. Errors with
/// `WidthPrecondition` (naming the first offending layer) when N is too small
/// for the requested composition.
pub fn approx_bound(spec: &CsSpec, n_width: usize, m: usize) -> Result<ApproxReport> {
    if n_width == 0 {
        return Err(Error::invalid("width parameter must be positive"));
    }
    if m == 0 {
        return Err(Error::invalid("precision parameter must be positive"));
    }
    let depth = spec.depth();
    let finite_beta: Vec<f64> = spec
        .beta
        .iter()
        .map(|b| match b {
            Smoothness::Finite(v) => Ok(*v),
            Smoothness::Infinite => Err(Error::invalid(
                "architecture sizing requires finite smoothness at every layer",
            )),
        })
        .collect::<Result<_>>()?;

    // C̃_i accumulates the domain rescalings of all earlier layers; the last
    // layer appends the final output range instead of a ratio.
    let mut c_tilde = Vec::with_capacity(depth + 1);
    let mut acc = 0.0f64;
    for i in 0..=depth {
        let ratio = if i < depth {
            (spec.b[i] - spec.a[i]) / (spec.b[i + 1] - spec.a[i + 1])
        } else {
            spec.b[depth] - spec.a[depth]
        };
        acc += spec.c[i] * ratio;
        c_tilde.push(acc);
    }

    let nf = n_width as f64;
    for i in 0..=depth {
        let rt = spec.r_tilde[i] as f64;
        let need = ((finite_beta[i] + 1.0).powf(rt)).max((c_tilde[i] + 1.0) * rt.exp());
        if nf < need {
            return Err(Error::WidthPrecondition {
                layer: i,
                n_width,
                required: need,
            });
        }
    }

    let mut layer_depths = Vec::with_capacity(depth + 1);
    let mut total_depth = 3 * depth;
    for i in 0..=depth {
        let base = (spec.r_tilde[i] as f64).max(finite_beta[i]);
        let li = 8 + (m + 5) * (1 + base.log2().ceil().max(0.0) as usize);
        layer_depths.push(li);
        total_depth += li;
    }

    let eta = (0..=depth)
        .map(|i| spec.r[i + 1] * (spec.r_tilde[i] + finite_beta[i].ceil() as usize))
        .max()
        .unwrap_or(1);
    let width = 6 * eta * n_width;

    let mut layer_sparsity = Vec::with_capacity(depth + 1);
    let mut sparsity_cap = 0.0f64;
    for i in 0..=depth {
        let rt = spec.r_tilde[i] as f64;
        let ti = 141.0 * (rt + finite_beta[i] + 1.0).powf(3.0 + rt) * nf * (m as f64 + 6.0);
        layer_sparsity.push(ti);
        sparsity_cap += spec.r[i + 1] as f64 * (ti + 4.0);
    }

    // Prefactor C_{L*}·Π_{l=0}^{L*−1} (2C_l)^{β_{l+1}} and the per-layer
    // summands, both assembled in log space.
    let mut log_pref = spec.c[depth].ln();
    for l in 0..depth {
        log_pref += finite_beta[l + 1] * (2.0 * spec.c[l]).ln();
    }
    let mut sum_terms = 0.0f64;
    for i in 0..=depth {
        let rt = spec.r_tilde[i] as f64;
        let bi = finite_beta[i];
        let log_s1 = (2.0 * c_tilde[i] + 1.0).ln()
            + (1.0 + rt * rt + bi * bi).ln()
            + rt * 6.0f64.ln()
            + nf.ln()
            - m as f64 * std::f64::consts::LN_2;
        let log_s2 = c_tilde[i].ln() + bi * 3.0f64.ln() - (bi / rt) * nf.ln();
        let inner = log_s1.exp() + log_s2.exp();
        // exponent Π_{l>i} (β_l ∧ 1)
        let mut q = 1.0f64;
        for l in i + 1..=depth {
            q *= finite_beta[l].min(1.0);
        }
        sum_terms += (q * inner.ln()).exp();
    }
    let bound = (log_pref + sum_terms.ln()).exp();

    Ok(ApproxReport {
        c_tilde,
        layer_depths,
        total_depth,
        eta,
        width,
        layer_sparsity,
        sparsity_cap,
        bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::Rng;

    fn simple_spec() -> CsSpec {
        gam_composition_spec(5, 2.0, 1.0).unwrap()
    }

    #[test]
    fn intrinsic_matches_worked_example() {
        // Additive composition with β_h = 2, β_φ = 1 in dimension 5:
        // ratios (0.4, ∞, 1) → minimising layer 0 with β* = 2, r* = 5.
        let s = intrinsic(&simple_spec());
        assert_eq!(s.i_star, 0);
        assert_eq!(s.beta_star, Smoothness::Finite(2.0));
        assert_eq!(s.r_star, 5);
        assert_eq!(s.ratios[0], 0.4);
        assert!(s.ratios[1].is_infinite());
        assert_eq!(s.ratios[2], 1.0);
        assert!(!s.degenerate);
        assert_eq!(s.min_smoothness_product, 1.0);
    }

    #[test]
    fn intrinsic_matches_brute_force_on_random_specs() {
        // Independent reimplementation: literal product loops instead of
        // suffix products, across 1000 random finite compositions.
        let mut rng = crate::util::rng_from_seed(914);
        for _ in 0..1000 {
            let depth = rng.random_range(0..=4usize);
            let mut r = Vec::new();
            let mut r_tilde = Vec::new();
            let mut beta = Vec::new();
            let mut a = Vec::new();
            let mut b = Vec::new();
            let mut c = Vec::new();
            for i in 0..=depth + 1 {
                let dim = if i == depth + 1 {
                    1
                } else {
                    rng.random_range(1..=6usize)
                };
                r.push(dim);
                a.push(-1.0);
                b.push(1.0);
                if i <= depth {
                    r_tilde.push(rng.random_range(1..=dim));
                    beta.push(Smoothness::Finite(rng.random_range(0.2..4.0)));
                    c.push(rng.random_range(1.5..5.0));
                }
            }
            let spec = CsSpec::new(r, r_tilde.clone(), beta.clone(), a, b, c).unwrap();
            let got = intrinsic(&spec);

            let betas: Vec<f64> = beta.iter().map(|s| s.finite_value().unwrap()).collect();
            let mut best_i = 0usize;
            let mut best_ratio = f64::INFINITY;
            for i in 0..=depth {
                let mut prod = 1.0f64;
                for s in i + 1..=depth {
                    prod *= betas[s].min(1.0);
                }
                let bstar = betas[i] * prod;
                let ratio = bstar / r_tilde[i] as f64;
                assert_relative_eq!(
                    got.beta_star_per_layer[i].finite_value().unwrap(),
                    bstar,
                    max_relative = 1e-12
                );
                if ratio < best_ratio {
                    best_ratio = ratio;
                    best_i = i;
                }
            }
            assert_eq!(got.i_star, best_i);
            assert_eq!(got.r_star, r_tilde[best_i]);
            let mut q0 = 1.0f64;
            for s in 1..=depth {
                q0 *= betas[s].min(1.0);
            }
            assert_relative_eq!(got.min_smoothness_product, q0, max_relative = 1e-12);
        }
    }

    #[test]
    fn intrinsic_ties_pick_the_earliest_layer() {
        // Two layers with identical ratio 1.0.
        let spec = CsSpec::new(
            vec![2, 2, 1],
            vec![2, 1],
            vec![Smoothness::Finite(2.0), Smoothness::Finite(1.0)],
            vec![0.0, -1.0, -2.0],
            vec![1.0, 1.0, 2.0],
            vec![2.0, 2.0],
        )
        .unwrap();
        let s = intrinsic(&spec);
        assert_eq!(s.ratios, vec![1.0, 1.0]);
        assert_eq!(s.i_star, 0);
    }

    #[test]
    fn intrinsic_all_infinite_is_degenerate() {
        let spec = CsSpec::new(
            vec![2, 1],
            vec![2],
            vec![Smoothness::Infinite],
            vec![0.0, -2.0],
            vec![1.0, 2.0],
            vec![2.0],
        )
        .unwrap();
        let s = intrinsic(&spec);
        assert!(s.degenerate);
        assert_eq!(s.i_star, 0);
        assert_eq!(s.beta_star, Smoothness::Infinite);
    }

    #[test]
    fn eval_cs_identity_layers_sum_to_half() {
        // Identity transforms, exact sum, identity link at (0.2, 0.3) → 0.5.
        let spec = gam_composition_spec(2, 2.0, 1.0)
            .unwrap()
            .with_evaluators(vec![
                Arc::new(|z: &[f64]| z.to_vec()),
                Arc::new(|z: &[f64]| vec![z.iter().sum()]),
                Arc::new(|z: &[f64]| z.to_vec()),
            ])
            .unwrap();
        let v = eval_cs(&spec, &[0.2, 0.3]).unwrap();
        assert_relative_eq!(v, 0.5, max_relative = 1e-15);
    }

    #[test]
    fn eval_cs_reports_the_offending_layer() {
        // The sum layer produces 1.8, outside its declared domain [-1, 1].
        let spec = CsSpec::new(
            vec![2, 1, 1],
            vec![2, 1],
            vec![Smoothness::Finite(1.0), Smoothness::Finite(1.0)],
            vec![0.0, -1.0, -2.0],
            vec![1.0, 1.0, 2.0],
            vec![2.0, 2.0],
        )
        .unwrap()
        .with_evaluators(vec![
            Arc::new(|z: &[f64]| vec![z.iter().sum()]),
            Arc::new(|z: &[f64]| z.to_vec()),
        ])
        .unwrap();
        let err = eval_cs(&spec, &[0.9, 0.9]).unwrap_err();
        match err {
            Error::DomainViolation { layer, value, .. } => {
                assert_eq!(layer, 1);
                assert_relative_eq!(value, 1.8, max_relative = 1e-12);
            }
            other => panic!("expected DomainViolation, got {other:?}"),
        }
    }

    #[test]
    fn eval_cs_tolerates_tiny_overshoot() {
        let spec = CsSpec::new(
            vec![1, 1],
            vec![1],
            vec![Smoothness::Finite(1.0)],
            vec![0.0, 0.0],
            vec![1.0, 1.0],
            vec![2.0],
        )
        .unwrap()
        .with_evaluators(vec![Arc::new(|z: &[f64]| vec![z[0] + 5e-10])])
        .unwrap();
        assert!(eval_cs(&spec, &[1.0]).is_ok());
    }

    #[test]
    fn covering_bound_matches_hand_value() {
        // L = 1, τ = 1, d = 1, δ = 1: (1+1)·ln(2⁷·2) = 2·ln 256 ≈ 11.090.
        let v = covering_bound(1, 1.0, 1, 1.0).unwrap();
        assert_relative_eq!(v, 2.0 * 256.0f64.ln(), max_relative = 1e-12);
        assert_relative_eq!(v, 11.0903548889591, max_relative = 1e-10);
    }

    #[test]
    fn covering_bound_matches_direct_formula_on_random_inputs() {
        // Independent oracle: evaluate the inner product directly (safe at
        // moderate sizes) and compare against the log-space assembly.
        let mut rng = crate::util::rng_from_seed(77);
        for _ in 0..200 {
            let l = rng.random_range(1..=6usize);
            let tau = rng.random_range(1.0..50.0f64);
            let d = rng.random_range(1..=10usize);
            let delta = rng.random_range(0.01..1.0f64);
            let inner = 2.0f64.powi(5 + 2 * l as i32) / delta
                * (l as f64 + 1.0)
                * tau.powi(2 * l as i32)
                * (d * d) as f64;
            let direct = (1.0 + tau) * inner.ln();
            let got = covering_bound(l, tau, d, delta).unwrap();
            assert_relative_eq!(got, direct, max_relative = 1e-12);
        }
    }

    #[test]
    fn covering_bound_is_monotone_in_each_argument() {
        let base = covering_bound(3, 20.0, 4, 0.1).unwrap();
        assert!(covering_bound(4, 20.0, 4, 0.1).unwrap() > base);
        assert!(covering_bound(3, 30.0, 4, 0.1).unwrap() > base);
        assert!(covering_bound(3, 20.0, 6, 0.1).unwrap() > base);
        // Shrinking δ increases the bound.
        assert!(covering_bound(3, 20.0, 4, 0.01).unwrap() > base);
    }

    #[test]
    fn covering_bound_stays_finite_at_extreme_sizes() {
        let v = covering_bound(1_000, 1e6, 5, 1e-8).unwrap();
        assert!(v.is_finite());
        assert!(v > 0.0);
    }

    #[test]
    fn zeta_bound_matches_frozen_example() {
        // n = 100, trΓ = 100, trΓ² = 150, σ = 1, δ = 1e−4, ε = 1, τ = 50, L = 3.
        let inputs = BoundInputs {
            n: 100,
            tau: 50.0,
            l: 3,
            n_width: 1,
            d: 1,
            delta: 1e-4,
            epsilon: 1.0,
            sigma: 1.0,
            tr_gamma: 100.0,
            tr_gamma_sq: 150.0,
        };
        let v = zeta_bound(&inputs).unwrap();
        // Frozen from an independent hand computation of the closed form.
        assert_relative_eq!(v, 38.57943288359955, max_relative = 1e-9);
        assert_relative_eq!(v, 38.6, max_relative = 1e-3);
    }

    #[test]
    fn zeta_bound_matches_reimplementation_on_random_inputs() {
        let mut rng = crate::util::rng_from_seed(4242);
        for _ in 0..200 {
            let inputs = BoundInputs {
                n: rng.random_range(10..5000usize),
                tau: rng.random_range(1.0..500.0f64),
                l: rng.random_range(1..12usize),
                n_width: 1,
                d: 1,
                delta: rng.random_range(1e-6..1.0f64),
                epsilon: rng.random_range(0.05..1.0f64),
                sigma: rng.random_range(0.0..3.0f64),
                tr_gamma: rng.random_range(0.0..1e4f64),
                tr_gamma_sq: rng.random_range(0.0..1e4f64),
            };
            let n = inputs.n as f64;
            let oracle = (inputs.delta
                * (inputs.tr_gamma / n
                    + 2.0 * (inputs.tr_gamma_sq / n).sqrt()
                    + 3.0 * inputs.sigma)
                + inputs.tau / n
                    * ((inputs.l as f64 / inputs.delta).ln() + inputs.l as f64 * inputs.tau.ln())
                    * (inputs.tr_gamma_sq / n + inputs.sigma.powi(2) + 1.0))
                / inputs.epsilon;
            assert_relative_eq!(zeta_bound(&inputs).unwrap(), oracle, max_relative = 1e-12);
        }
    }

    #[test]
    fn rate_schedule_matches_hand_values() {
        // n = 10⁴ with β* = 2, r* = 5: L = ⌈ln 10⁴⌉ = 10, N = ⌈10^{20/9}⌉ = 167.
        let s = intrinsic(&simple_spec());
        let (l, n_width) = rate_schedule(10_000, &s).unwrap();
        assert_eq!(l, 10);
        assert_eq!(n_width, 167);
    }

    #[test]
    fn rate_schedule_infinite_smoothness_pins_width_to_one() {
        let spec = CsSpec::new(
            vec![2, 1],
            vec![2],
            vec![Smoothness::Infinite],
            vec![0.0, -2.0],
            vec![1.0, 2.0],
            vec![2.0],
        )
        .unwrap();
        let s = intrinsic(&spec);
        let (_, n_width) = rate_schedule(1_000, &s).unwrap();
        assert_eq!(n_width, 1);
    }

    #[test]
    fn varsigma_decreases_along_the_schedule() {
        // Independent errors (trΓ² = n), zero proxy: the total must strictly
        // decrease across n ∈ {10², 10³, 10⁴}.
        let s = intrinsic(&simple_spec());
        let mut prev = f64::INFINITY;
        for n in [100usize, 1_000, 10_000] {
            let (l, n_width) = rate_schedule(n, &s).unwrap();
            let inputs = BoundInputs {
                n,
                tau: 1.0,
                l,
                n_width,
                d: 5,
                delta: 1.0,
                epsilon: 1.0,
                sigma: 1.0,
                tr_gamma: n as f64,
                tr_gamma_sq: n as f64,
            };
            let total = varsigma_rate(&inputs, &s, 0.0).unwrap().total();
            assert!(
                total < prev,
                "rate bound must decrease: n = {n} gave {total} after {prev}"
            );
            prev = total;
        }
    }

    #[test]
    fn varsigma_width_term_slope_matches_theory() {
        // Log-log fit of the width term over n ∈ [10², 10⁶] along the
        // schedule: slope must sit within 0.15 of −2β*/(2β* + r*) = −4/9.
        let s = intrinsic(&simple_spec());
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for k in 0..=16 {
            let n = (100.0 * 10.0f64.powf(k as f64 / 4.0)).round() as usize;
            let (l, n_width) = rate_schedule(n, &s).unwrap();
            let inputs = BoundInputs {
                n,
                tau: 1.0,
                l,
                n_width,
                d: 5,
                delta: 1.0,
                epsilon: 1.0,
                sigma: 1.0,
                tr_gamma: n as f64,
                tr_gamma_sq: n as f64,
            };
            let terms = varsigma_rate(&inputs, &s, 0.0).unwrap();
            xs.push((n as f64).ln());
            ys.push(terms.width_term.ln());
        }
        let np = xs.len() as f64;
        let mx = xs.iter().sum::<f64>() / np;
        let my = ys.iter().sum::<f64>() / np;
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
        let slope = sxy / sxx;
        let theory = -2.0 * 2.0 / (2.0 * 2.0 + 5.0);
        assert!(
            (slope - theory).abs() < 0.15,
            "slope {slope} vs theoretical {theory}"
        );
    }

    #[test]
    fn varsigma_terms_match_direct_formulas() {
        let s = intrinsic(&simple_spec());
        let inputs = BoundInputs {
            n: 500,
            tau: 1.0,
            l: 7,
            n_width: 40,
            d: 5,
            delta: 1.0,
            epsilon: 1.0,
            sigma: 1.0,
            tr_gamma: 500.0,
            tr_gamma_sq: 800.0,
        };
        let terms = varsigma_rate(&inputs, &s, 0.25).unwrap();
        let q0 = 1.0; // all upper-layer smoothness ≥ 1
        assert_relative_eq!(
            terms.depth_term,
            (40.0f64 * 2f64.powi(-7)).powf(2.0 * q0),
            max_relative = 1e-12
        );
        assert_relative_eq!(
            terms.width_term,
            40.0f64.powf(-2.0 * 2.0 / 5.0),
            max_relative = 1e-12
        );
        let n = 500.0f64;
        let est = (800.0 + n)
            * (7.0 * 40.0 * (7.0 * n * n).ln() + 49.0 * 40.0 * (7.0 * 40.0f64).ln())
            / (n * n);
        assert_relative_eq!(terms.estimation_term, est, max_relative = 1e-12);
        assert_relative_eq!(terms.proxy_term, 0.25, max_relative = 1e-15);
        assert_relative_eq!(
            terms.total(),
            terms.depth_term + terms.width_term + terms.estimation_term + 0.25,
            max_relative = 1e-15
        );
    }

    #[test]
    fn varsigma_unit_width_with_deep_net_leaves_only_width_term() {
        // N = 1, L large: depth term ≈ 0 and the width term equals 1.
        let s = intrinsic(&simple_spec());
        let inputs = BoundInputs {
            n: 100,
            tau: 1.0,
            l: 40,
            n_width: 1,
            d: 5,
            delta: 1.0,
            epsilon: 1.0,
            sigma: 0.0,
            tr_gamma: 0.0,
            tr_gamma_sq: 0.0,
        };
        let terms = varsigma_rate(&inputs, &s, 0.0).unwrap();
        assert!(terms.depth_term < 1e-20);
        assert_relative_eq!(terms.width_term, 1.0, max_relative = 1e-12);
    }

    #[test]
    fn approx_bound_sizes_the_single_layer_example() {
        // One level, r̃ = 1, β = 1, C = 2 on [0, 1]: depth 8 + (m+5)·1,
        // η = 1·(1+1) = 2, width 12N.
        let spec = CsSpec::new(
            vec![1, 1],
            vec![1],
            vec![Smoothness::Finite(1.0)],
            vec![0.0, -2.0],
            vec![1.0, 2.0],
            vec![2.0],
        )
        .unwrap();
        let m = 4usize;
        let report = approx_bound(&spec, 32, m).unwrap();
        assert_eq!(report.layer_depths, vec![8 + (m + 5)]);
        assert_eq!(report.total_depth, 8 + (m + 5));
        assert_eq!(report.eta, 2);
        assert_eq!(report.width, 12 * 32);
        // C̃_0 = C_0·(b_0 − a_0) for the last (only) layer.
        assert_relative_eq!(report.c_tilde[0], 2.0, max_relative = 1e-12);
        // τ_0 = 141·(1 + 1 + 1)⁴·N·(m + 6), cap = r_1·(τ_0 + 4).
        let t0 = 141.0 * 81.0 * 32.0 * 10.0;
        assert_relative_eq!(report.layer_sparsity[0], t0, max_relative = 1e-12);
        assert_relative_eq!(report.sparsity_cap, t0 + 4.0, max_relative = 1e-12);
        assert!(report.bound.is_finite() && report.bound > 0.0);
    }

    #[test]
    fn approx_bound_matches_direct_formula() {
        // Two-level composition, bound recomputed without log-space tricks.
        let spec = CsSpec::new(
            vec![2, 2, 1],
            vec![2, 1],
            vec![Smoothness::Finite(1.5), Smoothness::Finite(2.0)],
            vec![0.0, -1.0, -4.0],
            vec![1.0, 1.0, 4.0],
            vec![2.0, 4.0],
        )
        .unwrap();
        let n_width = 64usize;
        let m = 6usize;
        let report = approx_bound(&spec, n_width, m).unwrap();

        let ct0 = 2.0 * (1.0 - 0.0) / (1.0 - (-1.0));
        let ct1 = ct0 + 4.0 * (1.0 - (-1.0));
        assert_relative_eq!(report.c_tilde[0], ct0, max_relative = 1e-12);
        assert_relative_eq!(report.c_tilde[1], ct1, max_relative = 1e-12);

        let nf = n_width as f64;
        let pref = 4.0 * (2.0 * 2.0f64).powf(2.0);
        let summand = |ct: f64, rt: f64, b: f64, q: f64| -> f64 {
            let s1 = (2.0 * ct + 1.0)
                * (1.0 + rt * rt + b * b)
                * 6.0f64.powf(rt)
                * nf
                * 2.0f64.powi(-(m as i32));
            let s2 = ct * 3.0f64.powf(b) * nf.powf(-b / rt);
            (s1 + s2).powf(q)
        };
        let direct = pref * (summand(ct0, 2.0, 1.5, 1.0) + summand(ct1, 1.0, 2.0, 1.0));
        assert_relative_eq!(report.bound, direct, max_relative = 1e-10);

        // Depth: 3·1 + Σ (8 + (m+5)(1 + ⌈log₂ max(r̃, β)⌉)).
        let l0 = 8 + (m + 5) * (1 + 1); // log2(max(2, 1.5)) = 1
        let l1 = 8 + (m + 5) * (1 + 1); // log2(max(1, 2)) = 1
        assert_eq!(report.layer_depths, vec![l0, l1]);
        assert_eq!(report.total_depth, 3 + l0 + l1);
        // η = max(r_1·(r̃_0 + ⌈β_0⌉), r_2·(r̃_1 + ⌈β_1⌉)) = max(2·4, 1·3) = 8.
        assert_eq!(report.eta, 8);
        assert_eq!(report.width, 6 * 8 * n_width);
    }

    #[test]
    fn approx_bound_rejects_insufficient_width() {
        let spec = CsSpec::new(
            vec![3, 1],
            vec![3],
            vec![Smoothness::Finite(2.0)],
            vec![0.0, -4.0],
            vec![1.0, 4.0],
            vec![2.0],
        )
        .unwrap();
        // Requirement: max((β+1)^r̃, (C̃+1)e^r̃) = max(27, 3e³ ≈ 60.3).
        let err = approx_bound(&spec, 10, 4).unwrap_err();
        match err {
            Error::WidthPrecondition {
                layer,
                n_width,
                required,
            } => {
                assert_eq!(layer, 0);
                assert_eq!(n_width, 10);
                assert_relative_eq!(required, 3.0 * 3.0f64.exp(), max_relative = 1e-12);
            }
            other => panic!("expected WidthPrecondition, got {other:?}"),
        }
        assert!(approx_bound(&spec, 61, 4).is_ok());
    }

    #[test]
    fn approx_bound_decreases_in_precision_and_scaled_width() {
        let spec = simple_spec();
        // Infinite middle layer is rejected for sizing.
        assert!(approx_bound(&spec, 1000, 8).is_err());

        let finite = CsSpec::new(
            vec![2, 2, 1],
            vec![2, 1],
            vec![Smoothness::Finite(1.5), Smoothness::Finite(2.0)],
            vec![0.0, -1.0, -4.0],
            vec![1.0, 1.0, 4.0],
            vec![2.0, 4.0],
        )
        .unwrap();
        // At fixed width, higher precision strictly helps.
        let b0 = approx_bound(&finite, 64, 6).unwrap().bound;
        let sharper = approx_bound(&finite, 64, 12).unwrap().bound;
        assert!(sharper < b0, "higher precision must approximate better");
        // Width only helps when precision keeps pace (one term scales like
        // N·2^{−m}); with m = 2·log₂N the bound decreases along N.
        let mut prev = f64::INFINITY;
        for k in [6u32, 8, 10] {
            let n_width = 1usize << k;
            let b = approx_bound(&finite, n_width, 2 * k as usize).unwrap().bound;
            assert!(b < prev, "bound must shrink along the scaled sequence");
            prev = b;
        }
    }

    #[test]
    fn spec_construction_rejects_bad_shapes() {
        // Output dimension must be 1.
        assert!(CsSpec::new(
            vec![2, 2],
            vec![2],
            vec![Smoothness::Finite(1.0)],
            vec![0.0, 0.0],
            vec![1.0, 1.0],
            vec![2.0],
        )
        .is_err());
        // r̃ may not exceed r.
        assert!(CsSpec::new(
            vec![2, 1],
            vec![3],
            vec![Smoothness::Finite(1.0)],
            vec![0.0, 0.0],
            vec![1.0, 1.0],
            vec![2.0],
        )
        .is_err());
        // Hölder constants must exceed 1.
        assert!(CsSpec::new(
            vec![2, 1],
            vec![2],
            vec![Smoothness::Finite(1.0)],
            vec![0.0, 0.0],
            vec![1.0, 1.0],
            vec![0.5],
        )
        .is_err());
        // Domain endpoints must respect the Hölder constant.
        assert!(CsSpec::new(
            vec![2, 1],
            vec![2],
            vec![Smoothness::Finite(1.0)],
            vec![-5.0, 0.0],
            vec![1.0, 1.0],
            vec![2.0],
        )
        .is_err());
        // Negative smoothness.
        assert!(CsSpec::new(
            vec![2, 1],
            vec![2],
            vec![Smoothness::Finite(-1.0)],
            vec![0.0, 0.0],
            vec![1.0, 1.0],
            vec![2.0],
        )
        .is_err());
    }

    #[test]
    fn bound_inputs_validation_rejects_bad_values() {
        let good = BoundInputs {
            n: 100,
            tau: 10.0,
            l: 3,
            n_width: 5,
            d: 2,
            delta: 0.5,
            epsilon: 0.5,
            sigma: 1.0,
            tr_gamma: 10.0,
            tr_gamma_sq: 20.0,
        };
        assert!(good.validate().is_ok());
        assert!(BoundInputs { n: 0, ..good }.validate().is_err());
        assert!(BoundInputs { tau: 0.5, ..good }.validate().is_err());
        assert!(BoundInputs { delta: 0.0, ..good }.validate().is_err());
        assert!(BoundInputs { delta: 1.5, ..good }.validate().is_err());
        assert!(BoundInputs { epsilon: 0.0, ..good }.validate().is_err());
        assert!(BoundInputs {
            sigma: f64::NAN,
            ..good
        }
        .validate()
        .is_err());
        assert!(BoundInputs {
            tr_gamma: -1.0,
            ..good
        }
        .validate()
        .is_err());
    }
}
