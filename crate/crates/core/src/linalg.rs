//! Dense row-major matrices and the small amount of linear algebra the
//! solvers need: products, a one-sided Jacobi SVD and operator-norm bounds.

use crate::error::{invalid, mismatch, Error, Result};
use crate::tolerances::{POWER_ITERS, POWER_TOL, SVD_OFFDIAG_TOL, SVD_SWEEPS_PER_DIM};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    /// Row-major storage.
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(mismatch(format!(
                "matrix {}x{} needs {} entries, got {}",
                rows,
                cols,
                rows * cols,
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        if rows.iter().any(|row| row.len() != c) {
            return Err(mismatch("ragged rows"));
        }
        Ok(Matrix { rows: r, cols: c, data: rows.concat() })
    }

    pub fn diag(d: &[f64]) -> Self {
        let n = d.len();
        let mut m = Self::zeros(n, n);
        for (i, v) in d.iter().enumerate() {
            m.data[i * n + i] = *v;
        }
        m
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.data[j * self.rows + i] = self.get(i, j);
            }
        }
        t
    }

    /// `A x`.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols, "matvec dimension");
        (0..self.rows).map(|i| dot(self.row(i), x)).collect()
    }

    /// `A^T y`.
    pub fn t_matvec(&self, y: &[f64]) -> Vec<f64> {
        assert_eq!(y.len(), self.rows, "t_matvec dimension");
        let mut out = vec![0.0; self.cols];
        for (i, yi) in y.iter().enumerate() {
            if *yi != 0.0 {
                axpy(&mut out, *yi, self.row(i));
            }
        }
        out
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(mismatch(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                let orow = other.row(k);
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                axpy(dst, a, orow);
            }
        }
        Ok(out)
    }

    /// `A^T A`.
    pub fn gram(&self) -> Matrix {
        self.transpose().matmul(self).expect("shapes agree")
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn frobenius(&self) -> f64 {
        dot(&self.data, &self.data).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `y += a x`.
pub fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn scale(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|x| x * s).collect()
}

/// `(1 - t) a + t b`, written as two weights to avoid cancellation when
/// the weights come from `A_{k-1}/A_k` and `a_k/A_k`.
pub fn combine(wa: f64, a: &[f64], wb: f64, b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| wa * x + wb * y).collect()
}

pub fn inf_norm(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m, v| m.max(v.abs()))
}

pub fn euclid(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

/// Thin singular value decomposition `A = U diag(s) V^T`.
#[derive(Debug, Clone)]
pub struct Svd {
    /// rows x k
    pub u: Matrix,
    /// k singular values, descending.
    pub s: Vec<f64>,
    /// cols x k
    pub v: Matrix,
    pub sweeps: usize,
}

impl Svd {
    /// `U diag(d) V^T` for a replacement spectrum `d`.
    pub fn recompose(&self, d: &[f64]) -> Matrix {
        let (m, n, k) = (self.u.rows, self.v.rows, self.s.len());
        let mut out = Matrix::zeros(m, n);
        for j in 0..k {
            if d[j] == 0.0 {
                continue;
            }
            for r in 0..m {
                let ur = self.u.get(r, j) * d[j];
                if ur == 0.0 {
                    continue;
                }
                for c in 0..n {
                    out.data[r * n + c] += ur * self.v.get(c, j);
                }
            }
        }
        out
    }
}

/// One-sided (Hestenes) Jacobi SVD.
pub fn svd(a: &Matrix) -> Result<Svd> {
    if !a.is_finite() {
        return Err(invalid("matrix has non-finite entries"));
    }
    if a.rows < a.cols {
        let t = svd(&a.transpose())?;
        return Ok(Svd { u: t.v, s: t.s, v: t.u, sweeps: t.sweeps });
    }
    let (m, n) = (a.rows, a.cols);
    // Rescale to unit max entry so the Gram products neither underflow nor overflow.
    let scale = a.max_abs();
    let inv = if scale > 0.0 { 1.0 / scale } else { 1.0 };
    // Work column-major: cols[j] is column j of the evolving U*Sigma.
    let mut cols: Vec<Vec<f64>> = (0..n).map(|j| (0..m).map(|i| a.get(i, j) * inv).collect()).collect();
    let mut vcols: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            e
        })
        .collect();
    let cap = SVD_SWEEPS_PER_DIM * m.max(n).max(1);
    // Columns below this squared norm are rounding residue of a rank drop.
    let negligible = (f64::EPSILON * cols.iter().map(|c| dot(c, c)).sum::<f64>().sqrt()).powi(2);
    let mut sweeps = 0;
    let mut converged = n < 2;
    while !converged && sweeps < cap {
        sweeps += 1;
        let mut rotated = false;
        for i in 0..n - 1 {
            for j in i + 1..n {
                let alpha = dot(&cols[i], &cols[i]);
                let beta = dot(&cols[j], &cols[j]);
                let gamma = dot(&cols[i], &cols[j]);
                if gamma == 0.0
                    || alpha.min(beta) <= negligible
                    || gamma.abs() <= SVD_OFFDIAG_TOL * alpha.sqrt() * beta.sqrt()
                {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut cols, i, j, c, s);
                rotate(&mut vcols, i, j, c, s);
            }
        }
        converged = !rotated;
    }
    if !converged {
        return Err(Error::Numerical(format!(
            "Jacobi SVD of {}x{} matrix did not converge in {} sweeps",
            m, n, cap
        )));
    }
    let mut order: Vec<(f64, usize)> = cols.iter().enumerate().map(|(j, c)| (euclid(c), j)).collect();
    order.sort_by(|x, y| y.0.partial_cmp(&x.0).unwrap_or(std::cmp::Ordering::Equal));
    let mut u = Matrix::zeros(m, n);
    let mut v = Matrix::zeros(n, n);
    let mut s = Vec::with_capacity(n);
    for (k, (sigma, j)) in order.into_iter().enumerate() {
        s.push(if scale > 0.0 { sigma * scale } else { sigma });
        for r in 0..m {
            u.set(r, k, if sigma > 0.0 { cols[j][r] / sigma } else { 0.0 });
        }
        for r in 0..n {
            v.set(r, k, vcols[j][r]);
        }
    }
    Ok(Svd { u, s, v, sweeps })
}

fn rotate(cols: &mut [Vec<f64>], i: usize, j: usize, c: f64, s: f64) {
    let (lo, hi) = cols.split_at_mut(j);
    let (ci, cj) = (&mut lo[i], &mut hi[0]);
    for (x, y) in ci.iter_mut().zip(cj.iter_mut()) {
        let (xi, yj) = (*x, *y);
        *x = c * xi - s * yj;
        *y = s * xi + c * yj;
    }
}

/// Spectral norm estimate by power iteration on `A^T A`.
pub fn spectral_norm(a: &Matrix) -> f64 {
    if a.data.iter().all(|v| *v == 0.0) {
        return 0.0;
    }
    let n = a.cols;
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + 0.01 * i as f64).collect();
    let nv = euclid(&v);
    v.iter_mut().for_each(|x| *x /= nv);
    let mut est = 0.0;
    for _ in 0..POWER_ITERS {
        let w = a.t_matvec(&a.matvec(&v));
        let nw = euclid(&w);
        if nw == 0.0 {
            return 0.0;
        }
        let next = nw.sqrt();
        v = w.into_iter().map(|x| x / nw).collect();
        if (next - est).abs() <= POWER_TOL * next {
            return next;
        }
        est = next;
    }
    est
}

/// Solve the square system `K x = r` by LU with partial pivoting.
pub fn solve(k: &Matrix, r: &[f64]) -> Result<Vec<f64>> {
    if k.rows != k.cols || k.rows != r.len() {
        return Err(mismatch("linear solve needs a square system"));
    }
    let km = nalgebra::DMatrix::from_row_slice(k.rows, k.cols, &k.data);
    let rv = nalgebra::DVector::from_column_slice(r);
    km.lu()
        .solve(&rv)
        .map(|x| x.iter().copied().collect())
        .ok_or_else(|| Error::Numerical("singular linear system".into()))
}
