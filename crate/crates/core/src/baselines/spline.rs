//! Clamped cubic B-spline basis on quantile knots, with derivatives and the
//! exact integrated-squared-curvature penalty matrix.

use crate::error::{Error, Result};
use crate::linalg::Mat;

/// A cubic B-spline basis over `[x_min, x_max]` with boundary knots repeated
/// four times (clamped), so the basis sums to one on the whole interval and
/// linear functions lie exactly in its span.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SplineBasis {
    /// Full knot vector of length `n_basis + 4`.
    knots: Vec<f64>,
    n_basis: usize,
}

impl SplineBasis {
    /// Places up to `n_interior` interior knots at the empirical quantiles of
    /// `xs` (duplicates and knots colliding with the boundary are dropped).
    pub fn from_quantiles(xs: &[f64], n_interior: usize) -> Result<Self> {
        if xs.len() < 2 {
            return Err(Error::invalid("spline basis needs at least 2 observations"));
        }
        if xs.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("spline basis data must be finite"));
        }
        let mut sorted = xs.to_vec();
        sorted.sort_by(f64::total_cmp);
        let (x_min, x_max) = (sorted[0], *sorted.last().unwrap());
        if x_min == x_max {
            return Err(Error::Degenerate(
                "constant covariate: spline basis has an empty range".into(),
            ));
        }
        let mut interior = Vec::with_capacity(n_interior);
        let n = sorted.len();
        for j in 1..=n_interior {
            let q = j as f64 / (n_interior + 1) as f64;
            let pos = q * (n - 1) as f64;
            let lo = pos.floor() as usize;
            let frac = pos - lo as f64;
            let v = if lo + 1 < n {
                sorted[lo] * (1.0 - frac) + sorted[lo + 1] * frac
            } else {
                sorted[lo]
            };
            let distinct = v > x_min
                && v < x_max
                && interior.last().map_or(true, |&p: &f64| v > p);
            if distinct {
                interior.push(v);
            }
        }
        let n_basis = interior.len() + 4;
        let mut knots = Vec::with_capacity(n_basis + 4);
        knots.extend(std::iter::repeat(x_min).take(4));
        knots.extend(interior);
        knots.extend(std::iter::repeat(x_max).take(4));
        Ok(SplineBasis { knots, n_basis })
    }

    pub fn n_basis(&self) -> usize {
        self.n_basis
    }

    pub fn x_min(&self) -> f64 {
        self.knots[0]
    }

    pub fn x_max(&self) -> f64 {
        *self.knots.last().unwrap()
    }

    /// Greville abscissae: coefficients equal to these reproduce `f(x) = x`.
    pub fn greville(&self) -> Vec<f64> {
        (0..self.n_basis)
            .map(|i| (self.knots[i + 1] + self.knots[i + 2] + self.knots[i + 3]) / 3.0)
            .collect()
    }

    /// Degree-0 indicators; the final nonempty interval is closed at `x_max`.
    fn degree0(&self, x: f64) -> Vec<f64> {
        let m = self.n_basis + 3; // number of degree-0 functions
        let mut n0 = vec![0.0; m];
        // span: last i with knots[i] <= x and knots[i] < knots[i+1]
        let mut span = None;
        for i in 0..m {
            if self.knots[i] <= x && self.knots[i] < self.knots[i + 1] {
                span = Some(i);
            }
        }
        if let Some(s) = span {
            if x < self.knots[s + 1] || x >= self.x_max() {
                n0[s] = 1.0;
            }
        }
        n0
    }

    /// Basis values together with first and second derivatives at `x`
    /// (which must lie in `[x_min, x_max]`; callers handle extrapolation).
    pub fn eval_with_derivs(&self, x: f64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let t = &self.knots;
        let safe = |num: f64, den: f64| if den != 0.0 { num / den } else { 0.0 };
        let n0 = self.degree0(x);
        // raise degree via Cox–de Boor
        let raise = |lower: &[f64], p: usize| -> Vec<f64> {
            (0..lower.len() - 1)
                .map(|i| {
                    safe((x - t[i]) * lower[i], t[i + p] - t[i])
                        + safe((t[i + p + 1] - x) * lower[i + 1], t[i + p + 1] - t[i + 1])
                })
                .collect()
        };
        let n1 = raise(&n0, 1);
        let n2 = raise(&n1, 2);
        let n3 = raise(&n2, 3);
        // derivative of degree-p basis in terms of degree-(p−1) values
        let deriv = |lower: &[f64], p: usize| -> Vec<f64> {
            (0..lower.len() - 1)
                .map(|i| {
                    p as f64
                        * (safe(lower[i], t[i + p] - t[i])
                            - safe(lower[i + 1], t[i + p + 1] - t[i + 1]))
                })
                .collect()
        };
        let d1 = deriv(&n2, 3);
        let n1_d = deriv(&n1, 2); // first derivatives of the degree-2 basis
        let d2 = deriv(&n1_d, 3);
        (n3, d1, d2)
    }

    /// Basis values at `x` (clamped to the knot range).
    pub fn eval(&self, x: f64) -> Vec<f64> {
        let xc = x.clamp(self.x_min(), self.x_max());
        self.eval_with_derivs(xc).0
    }

    /// Design matrix over `xs` (values outside the range are clamped; callers
    /// that need linear extrapolation evaluate derivatives themselves).
    pub fn design(&self, xs: &[f64]) -> Mat {
        let mut m = Mat::zeros(xs.len(), self.n_basis);
        for (i, &x) in xs.iter().enumerate() {
            let row = self.eval(x);
            m.row_mut(i).copy_from_slice(&row);
        }
        m
    }

    /// Exact Gram matrix of second derivatives, `P_ij = ∫ B_i'' B_j'' dx`.
    ///
    /// On each inter-knot interval the second derivatives are linear, so the
    /// integrand is quadratic and a per-interval Simpson rule is exact. The
    /// endpoint limits are obtained by linear extrapolation from two interior
    /// evaluation points, which sidesteps the one-sided-limit ambiguity of
    /// `B''` at the knots.
    pub fn penalty(&self) -> Mat {
        let nb = self.n_basis;
        let mut p = Mat::zeros(nb, nb);
        let distinct: Vec<f64> = {
            let mut d: Vec<f64> = Vec::new();
            for &k in &self.knots {
                if d.last().map_or(true, |&l: &f64| k > l) {
                    d.push(k);
                }
            }
            d
        };
        for w in distinct.windows(2) {
            let (a, b) = (w[0], w[1]);
            let h = b - a;
            let x1 = a + h / 3.0;
            let x2 = a + 2.0 * h / 3.0;
            let (_, _, d2_1) = self.eval_with_derivs(x1);
            let (_, _, d2_2) = self.eval_with_derivs(x2);
            // linear-in-x second derivatives: exact endpoint and midpoint values
            let ea: Vec<f64> = d2_1.iter().zip(&d2_2).map(|(u, v)| 2.0 * u - v).collect();
            let eb: Vec<f64> = d2_1.iter().zip(&d2_2).map(|(u, v)| 2.0 * v - u).collect();
            let em: Vec<f64> = d2_1.iter().zip(&d2_2).map(|(u, v)| (u + v) / 2.0).collect();
            for i in 0..nb {
                if ea[i] == 0.0 && em[i] == 0.0 && eb[i] == 0.0 {
                    continue;
                }
                for j in i..nb {
                    let s = h / 6.0 * (ea[i] * ea[j] + 4.0 * em[i] * em[j] + eb[i] * eb[j]);
                    p.set(i, j, p.get(i, j) + s);
                }
            }
        }
        for i in 0..nb {
            for j in 0..i {
                let v = p.get(j, i);
                p.set(i, j, v);
            }
        }
        p
    }
}
