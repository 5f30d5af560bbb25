//! Minimal dense linear algebra: row-major matrices, Cholesky factorisation
//! with a diagonal-jitter escalation ladder, and triangular solves.
//!
//! The systems solved here are small (covariance matrices up to a few
//! thousand, spline normal equations of a few dozen columns), so a
//! hand-rolled implementation keeps the dependency surface flat.

use crate::error::{Error, Result};

/// Dense row-major matrix of `f64`.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Mat {
    n_rows: usize,
    n_cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        Mat {
            n_rows,
            n_cols,
            data: vec![0.0; n_rows * n_cols],
        }
    }

    /// Builds from a flat row-major buffer. Length must be `n_rows * n_cols`.
    pub fn from_vec(n_rows: usize, n_cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n_rows * n_cols {
            return Err(Error::invalid(format!(
                "matrix buffer length {} does not match {n_rows}x{n_cols}",
                data.len()
            )));
        }
        Ok(Mat {
            n_rows,
            n_cols,
            data,
        })
    }

    /// Builds from rows; all rows must have equal length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != n_cols) {
            return Err(Error::invalid("ragged rows in matrix constructor"));
        }
        Ok(Mat {
            n_rows,
            n_cols,
            data: rows.concat(),
        })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n_cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n_cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n_rows).map(|i| self.get(i, j)).collect()
    }

    /// `self * x` for a vector `x` of length `n_cols`.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.n_cols);
        (0..self.n_rows)
            .map(|i| dot(self.row(i), x))
            .collect()
    }

    /// `selfᵀ * x` for a vector `x` of length `n_rows`.
    pub fn t_matvec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.n_rows);
        let mut out = vec![0.0; self.n_cols];
        for (i, &xi) in x.iter().enumerate() {
            for (o, &a) in out.iter_mut().zip(self.row(i)) {
                *o += xi * a;
            }
        }
        out
    }

    /// Gram matrix `selfᵀ * self` (`n_cols × n_cols`, symmetric).
    pub fn gram(&self) -> Mat {
        let p = self.n_cols;
        let mut g = Mat::zeros(p, p);
        for i in 0..self.n_rows {
            let r = self.row(i);
            for a in 0..p {
                let ra = r[a];
                if ra == 0.0 {
                    continue;
                }
                for b in a..p {
                    let v = g.get(a, b) + ra * r[b];
                    g.set(a, b, v);
                }
            }
        }
        for a in 0..p {
            for b in 0..a {
                let v = g.get(b, a);
                g.set(a, b, v);
            }
        }
        g
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// A lower-triangular Cholesky factor together with the jitter that was added
/// to the diagonal to obtain it.
#[derive(Debug, Clone)]
pub struct CholFactor {
    lower: Mat,
    jitter: f64,
}

impl CholFactor {
    pub fn lower(&self) -> &Mat {
        &self.lower
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn order(&self) -> usize {
        self.lower.n_rows()
    }

    /// `L * z`.
    pub fn apply(&self, z: &[f64]) -> Vec<f64> {
        let n = self.order();
        debug_assert_eq!(z.len(), n);
        (0..n)
            .map(|i| dot(&self.lower.row(i)[..=i], &z[..=i]))
            .collect()
    }

    /// Solves `L Lᵀ x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.order();
        debug_assert_eq!(b.len(), n);
        // forward: L y = b
        let mut y = vec![0.0; n];
        for i in 0..n {
            let r = self.lower.row(i);
            let s = dot(&r[..i], &y[..i]);
            y[i] = (b[i] - s) / r[i];
        }
        // backward: Lᵀ x = y
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in (i + 1)..n {
                s -= self.lower.get(k, i) * x[k];
            }
            x[i] = s / self.lower.get(i, i);
        }
        x
    }

    /// Reconstructs `L Lᵀ` (for diagnostics and tests).
    pub fn reconstruct(&self) -> Mat {
        let n = self.order();
        let mut a = Mat::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let m = i.min(j);
                let mut s = 0.0;
                for k in 0..=m {
                    s += self.lower.get(i, k) * self.lower.get(j, k);
                }
                a.set(i, j, s);
            }
        }
        a
    }
}

/// Attempts a Cholesky factorisation of `a + jitter·I`. Returns the failing
/// row and pivot on a non-positive or non-finite pivot.
fn try_cholesky(a: &Mat, jitter: f64) -> std::result::Result<Mat, (usize, f64)> {
    let n = a.n_rows();
    let mut l = Mat::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut s = a.get(i, j);
            if i == j {
                s += jitter;
            }
            for k in 0..j {
                s -= l.get(i, k) * l.get(j, k);
            }
            if i == j {
                if !(s > 0.0) || !s.is_finite() {
                    return Err((i, s));
                }
                l.set(i, j, s.sqrt());
            } else {
                l.set(i, j, s / l.get(j, j));
            }
        }
    }
    Ok(l)
}

/// The escalation ladder used for covariance factorisation: try the exact
/// matrix first, then add progressively larger diagonal jitter.
pub const JITTER_LADDER: [f64; 4] = [0.0, 1e-10, 1e-8, 1e-6];

/// Cholesky factorisation with jitter escalation.
///
/// Each ladder level `j` factors `a + j·I`; the first level whose pivots are
/// all strictly positive wins, and the level used is recorded on the factor.
/// If the final level still fails, the error reports the offending pivot.
pub fn cholesky_with_ladder(a: &Mat, ladder: &[f64]) -> Result<CholFactor> {
    if a.n_rows() != a.n_cols() {
        return Err(Error::invalid(format!(
            "cholesky requires a square matrix, got {}x{}",
            a.n_rows(),
            a.n_cols()
        )));
    }
    if a.n_rows() == 0 {
        return Err(Error::invalid("cholesky of an empty matrix"));
    }
    let mut last = (0usize, f64::NAN, 0.0f64);
    for &jitter in ladder {
        match try_cholesky(a, jitter) {
            Ok(lower) => return Ok(CholFactor { lower, jitter }),
            Err((row, pivot)) => last = (row, pivot, jitter),
        }
    }
    Err(Error::NotPositiveDefinite {
        order: a.n_rows(),
        row: last.0,
        pivot: last.1,
        jitter: last.2,
    })
}

/// Solves the symmetric positive-definite system `a x = b`.
///
/// Uses a ladder scaled to the matrix diagonal, so it behaves sensibly for
/// normal-equation systems whose entries are far from unit scale.
pub fn solve_spd(a: &Mat, b: &[f64]) -> Result<Vec<f64>> {
    let scale = (0..a.n_rows())
        .map(|i| a.get(i, i).abs())
        .fold(0.0f64, f64::max)
        .max(1.0);
    let ladder = [0.0, 1e-12 * scale, 1e-10 * scale, 1e-8 * scale];
    let f = cholesky_with_ladder(a, &ladder)?;
    Ok(f.solve(b))
}
