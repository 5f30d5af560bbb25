//! Gaussian random field machinery: stationary covariance models, covariance
//! matrix assembly over point sets, Cholesky sampling, and trace utilities.

use crate::error::{Error, Result};
use crate::linalg::{cholesky_with_ladder, CholFactor, Mat, JITTER_LADDER};
use rand::Rng;
use rand_distr::StandardNormal;

/// Half-integer Matérn smoothness orders with closed-form kernels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum MaternSmoothness {
    /// ν = 1/2 (identical to the exponential model).
    Half,
    /// ν = 3/2.
    ThreeHalves,
    /// ν = 5/2.
    FiveHalves,
}

impl MaternSmoothness {
    pub fn nu(self) -> f64 {
        match self {
            MaternSmoothness::Half => 0.5,
            MaternSmoothness::ThreeHalves => 1.5,
            MaternSmoothness::FiveHalves => 2.5,
        }
    }
}

/// A stationary, isotropic covariance model γ(s, t) = γ(‖s − t‖).
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum CovarianceModel {
    /// γ(r) = σ² exp(−r/ρ).
    Exponential { range: f64, variance: f64 },
    /// Matérn with half-integer smoothness; with u = √(2ν)·r/ρ:
    /// ν=1/2 → σ²e^{−u}, ν=3/2 → σ²(1+u)e^{−u}, ν=5/2 → σ²(1+u+u²/3)e^{−u}.
    Matern {
        range: f64,
        smoothness: MaternSmoothness,
        variance: f64,
    },
}

impl CovarianceModel {
    pub fn exponential(range: f64, variance: f64) -> Result<Self> {
        check_positive("range", range)?;
        check_positive("variance", variance)?;
        Ok(CovarianceModel::Exponential { range, variance })
    }

    pub fn matern(range: f64, smoothness: MaternSmoothness, variance: f64) -> Result<Self> {
        check_positive("range", range)?;
        check_positive("variance", variance)?;
        Ok(CovarianceModel::Matern {
            range,
            smoothness,
            variance,
        })
    }

    /// Marginal variance σ² (the value at distance zero).
    pub fn variance(&self) -> f64 {
        match *self {
            CovarianceModel::Exponential { variance, .. } => variance,
            CovarianceModel::Matern { variance, .. } => variance,
        }
    }

    /// Evaluates γ at a nonnegative distance.
    pub fn eval_distance(&self, r: f64) -> f64 {
        match *self {
            CovarianceModel::Exponential { range, variance } => variance * (-r / range).exp(),
            CovarianceModel::Matern {
                range,
                smoothness,
                variance,
            } => {
                let u = (2.0 * smoothness.nu()).sqrt() * r / range;
                let poly = match smoothness {
                    MaternSmoothness::Half => 1.0,
                    MaternSmoothness::ThreeHalves => 1.0 + u,
                    MaternSmoothness::FiveHalves => 1.0 + u + u * u / 3.0,
                };
                variance * poly * (-u).exp()
            }
        }
    }
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0) || !v.is_finite() {
        return Err(Error::invalid(format!("{name} must be positive and finite, got {v}")));
    }
    Ok(())
}

/// Covariance between two points given as coordinate slices of equal length.
pub fn cov_eval(model: &CovarianceModel, s: &[f64], t: &[f64]) -> Result<f64> {
    if s.len() != t.len() || s.is_empty() {
        return Err(Error::invalid(format!(
            "cov_eval point dimensions differ or are empty: {} vs {}",
            s.len(),
            t.len()
        )));
    }
    if s.iter().chain(t).any(|c| !c.is_finite()) {
        return Err(Error::invalid("cov_eval received a non-finite coordinate"));
    }
    let r = s
        .iter()
        .zip(t)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    Ok(model.eval_distance(r))
}

/// An ordered, duplicate-free set of 1-D or 2-D locations inside `[0, D]^dim`.
///
/// 1-D points are stored with a zero second coordinate, so Euclidean distance
/// over both components is correct in either dimension.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LocationSet {
    dim: usize,
    domain: f64,
    points: Vec<[f64; 2]>,
}

impl LocationSet {
    /// `n` equispaced points on `[0, D]` including both endpoints.
    pub fn line_equispaced(n: usize, domain: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::invalid("equispaced line needs at least 2 points"));
        }
        check_positive("domain", domain)?;
        let step = domain / (n - 1) as f64;
        let points = (0..n).map(|i| [i as f64 * step, 0.0]).collect();
        Self::validated(1, domain, points)
    }

    /// A `side × side` grid over `[0, D]²` including the boundary.
    pub fn grid_equispaced(side: usize, domain: f64) -> Result<Self> {
        if side < 2 {
            return Err(Error::invalid("equispaced grid needs side at least 2"));
        }
        check_positive("domain", domain)?;
        let step = domain / (side - 1) as f64;
        let mut points = Vec::with_capacity(side * side);
        for i in 0..side {
            for j in 0..side {
                points.push([i as f64 * step, j as f64 * step]);
            }
        }
        Self::validated(2, domain, points)
    }

    pub fn from_points_1d(xs: Vec<f64>, domain: f64) -> Result<Self> {
        check_positive("domain", domain)?;
        let points = xs.into_iter().map(|x| [x, 0.0]).collect();
        Self::validated(1, domain, points)
    }

    pub fn from_points_2d(points: Vec<[f64; 2]>, domain: f64) -> Result<Self> {
        check_positive("domain", domain)?;
        Self::validated(2, domain, points)
    }

    fn validated(dim: usize, domain: f64, points: Vec<[f64; 2]>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::invalid("location set must be nonempty"));
        }
        for p in &points {
            if p.iter().any(|c| !c.is_finite()) {
                return Err(Error::invalid("location has a non-finite coordinate"));
            }
            let in_domain = match dim {
                1 => p[0] >= 0.0 && p[0] <= domain && p[1] == 0.0,
                2 => p.iter().all(|&c| (0.0..=domain).contains(&c)),
                _ => false,
            };
            if !in_domain {
                return Err(Error::invalid(format!(
                    "location ({}, {}) outside [0, {domain}]^{dim}",
                    p[0], p[1]
                )));
            }
        }
        // duplicate check via coordinate sort
        let mut order: Vec<usize> = (0..points.len()).collect();
        order.sort_by(|&a, &b| {
            points[a][0]
                .total_cmp(&points[b][0])
                .then(points[a][1].total_cmp(&points[b][1]))
        });
        for w in order.windows(2) {
            if points[w[0]] == points[w[1]] {
                return Err(Error::invalid(format!(
                    "duplicate location ({}, {})",
                    points[w[0]][0], points[w[0]][1]
                )));
            }
        }
        Ok(LocationSet {
            dim,
            domain,
            points,
        })
    }

    /// Concatenation (e.g. training then test locations for joint sampling).
    pub fn concat(&self, other: &LocationSet) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::invalid("cannot concatenate location sets of different dimension"));
        }
        if self.domain != other.domain {
            return Err(Error::invalid("cannot concatenate location sets over different domains"));
        }
        let mut points = self.points.clone();
        points.extend_from_slice(&other.points);
        Self::validated(self.dim, self.domain, points)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn domain(&self) -> f64 {
        self.domain
    }

    pub fn point(&self, i: usize) -> [f64; 2] {
        self.points[i]
    }

    pub fn points(&self) -> &[[f64; 2]] {
        &self.points
    }

    /// Coordinate slice of the widths actually used (length 1 or 2).
    pub fn coords(&self, i: usize) -> &[f64] {
        &self.points[i][..self.dim]
    }
}

/// A realised covariance matrix Γ over a location set.
#[derive(Debug, Clone)]
pub struct CovMatrix {
    entries: Mat,
    field_variance: f64,
    jitter_applied: f64,
}

impl CovMatrix {
    pub fn entries(&self) -> &Mat {
        &self.entries
    }

    pub fn order(&self) -> usize {
        self.entries.n_rows()
    }

    /// The marginal variance of the generating model.
    pub fn field_variance(&self) -> f64 {
        self.field_variance
    }

    /// Diagonal jitter already folded into `entries` (0 straight after build).
    pub fn jitter_applied(&self) -> f64 {
        self.jitter_applied
    }
}

/// Assembles the dense covariance matrix of `model` over `locs`.
pub fn build_cov(model: &CovarianceModel, locs: &LocationSet) -> Result<CovMatrix> {
    let n = locs.len();
    let mut entries = Mat::zeros(n, n);
    for i in 0..n {
        entries.set(i, i, model.variance());
        for j in (i + 1)..n {
            let v = cov_eval(model, locs.coords(i), locs.coords(j))?;
            entries.set(i, j, v);
            entries.set(j, i, v);
        }
    }
    Ok(CovMatrix {
        entries,
        field_variance: model.variance(),
        jitter_applied: 0.0,
    })
}

/// Cholesky factor of Γ with the jitter escalation ladder
/// {0, 1e−10, 1e−8, 1e−6}; the jitter actually used is recorded on the factor.
pub fn chol(cov: &CovMatrix) -> Result<CholFactor> {
    cholesky_with_ladder(&cov.entries, &JITTER_LADDER)
}

/// One draw of the field at every location of the factored covariance.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GrfSample {
    pub values: Vec<f64>,
    pub seed: u64,
}

/// Samples `L·z` with `z` i.i.d. standard normal from a seeded generator.
pub fn sample_field(factor: &CholFactor, seed: u64) -> GrfSample {
    let mut rng = crate::util::rng_from_seed(seed);
    let z: Vec<f64> = (0..factor.order())
        .map(|_| rng.sample::<f64, _>(StandardNormal))
        .collect();
    GrfSample {
        values: factor.apply(&z),
        seed,
    }
}

/// `(tr Γ, tr Γ²)`; the second trace uses symmetry: tr Γ² = Σ_{ij} γ_ij².
pub fn traces(cov: &CovMatrix) -> (f64, f64) {
    let n = cov.order();
    let mut tr = 0.0;
    let mut tr_sq = 0.0;
    for i in 0..n {
        tr += cov.entries.get(i, i);
        for j in 0..n {
            let v = cov.entries.get(i, j);
            tr_sq += v * v;
        }
    }
    (tr, tr_sq)
}

/// Row-major CSV rendering of a covariance matrix (`i,j,value`).
pub fn matrix_csv(cov: &CovMatrix) -> String {
    let mut out = String::from("i,j,value\n");
    let n = cov.order();
    for i in 0..n {
        for j in 0..n {
            out.push_str(&format!("{i},{j},{}\n", crate::csvio::fmt_f64(cov.entries.get(i, j))));
        }
    }
    out
}

/// CSV rendering of a field sample (`i,value`).
pub fn sample_csv(sample: &GrfSample) -> String {
    let mut out = String::from("i,value\n");
    for (i, v) in sample.values.iter().enumerate() {
        out.push_str(&format!("{i},{}\n", crate::csvio::fmt_f64(*v)));
    }
    out
}
