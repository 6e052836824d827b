//! lp and Schatten-p geometry: norms, dual exponents and duality maps.
//!
//! Points are flat `f64` slices. A Schatten space reads them as row-major
//! `rows x cols` matrices.

use crate::error::{invalid, mismatch, Result};
use crate::linalg::{svd, Matrix};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SpaceKind {
    VectorLp,
    SchattenP,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormedSpace {
    pub kind: SpaceKind,
    pub p: f64,
    pub rows: usize,
    pub cols: usize,
}

fn check_exponent(p: f64) -> Result<()> {
    if !p.is_finite() || p <= 1.0 {
        return Err(invalid(format!("exponent must lie in (1, inf), got {p}")));
    }
    Ok(())
}

/// `p / (p - 1)`.
pub fn dual_exponent(p: f64) -> Result<f64> {
    check_exponent(p)?;
    Ok(p / (p - 1.0))
}

/// Exponent standing in for the l1 norm on dimension `d`.
pub fn l1_exponent(d: usize) -> Result<f64> {
    let ld = log_dim(d)?;
    Ok(ld / (ld - 1.0))
}

/// Exponent standing in for the l-infinity norm on dimension `d`.
pub fn linf_exponent(d: usize) -> Result<f64> {
    log_dim(d)
}

fn log_dim(d: usize) -> Result<f64> {
    if d < 3 {
        return Err(invalid(format!("l1/linf substitution needs d >= 3, got {d}")));
    }
    Ok((d as f64).ln())
}

pub fn lp_norm(x: &[f64], p: f64) -> Result<f64> {
    check_exponent(p)?;
    if let Some(bad) = x.iter().position(|v| !v.is_finite()) {
        return Err(invalid(format!("component {bad} is not finite")));
    }
    Ok(norm_unchecked(x, p))
}

/// Max-rescaled `(sum |x_i|^p)^(1/p)`.
pub(crate) fn norm_unchecked(x: &[f64], p: f64) -> f64 {
    let m = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if m == 0.0 {
        return 0.0;
    }
    if p == 2.0 {
        return m * x.iter().map(|v| (v / m) * (v / m)).sum::<f64>().sqrt();
    }
    m * x.iter().map(|v| (v.abs() / m).powf(p)).sum::<f64>().powf(1.0 / p)
}

/// Gradient of `(1/q) |x|_p^q`.
pub fn duality_map(x: &[f64], p: f64, q: f64) -> Result<Vec<f64>> {
    check_exponent(q)?;
    let n = lp_norm(x, p)?;
    Ok(duality_map_with_norm(x, p, q, n))
}

pub(crate) fn duality_map_with_norm(x: &[f64], p: f64, q: f64, n: f64) -> Vec<f64> {
    if n == 0.0 {
        return vec![0.0; x.len()];
    }
    let scale = n.powf(q - 1.0);
    x.iter()
        .map(|v| {
            if *v == 0.0 {
                0.0
            } else if p == 2.0 {
                v / n * scale
            } else {
                v.signum() * (v.abs() / n).powf(p - 1.0) * scale
            }
        })
        .collect()
}

pub fn schatten_norm(x: &Matrix, p: f64) -> Result<f64> {
    check_exponent(p)?;
    let d = svd(x)?;
    Ok(norm_unchecked(&d.s, p))
}

/// Spectral lift `U diag(J(sigma)) V^T` of the vector duality map.
pub fn schatten_duality_map(x: &Matrix, p: f64, q: f64) -> Result<Matrix> {
    check_exponent(p)?;
    check_exponent(q)?;
    let d = svd(x)?;
    let g = duality_map_with_norm(&d.s, p, q, norm_unchecked(&d.s, p));
    Ok(d.recompose(&g))
}

impl NormedSpace {
    pub fn lp(p: f64, dim: usize) -> Result<Self> {
        check_exponent(p)?;
        Ok(NormedSpace { kind: SpaceKind::VectorLp, p, rows: dim, cols: 1 })
    }

    pub fn schatten(p: f64, rows: usize, cols: usize) -> Result<Self> {
        check_exponent(p)?;
        Ok(NormedSpace { kind: SpaceKind::SchattenP, p, rows, cols })
    }

    pub fn dim(&self) -> usize {
        self.rows * self.cols
    }

    pub fn p_star(&self) -> f64 {
        self.p / (self.p - 1.0)
    }

    /// The same ambient space under the conjugate exponent.
    pub fn dual(&self) -> NormedSpace {
        NormedSpace { p: self.p_star(), ..*self }
    }

    fn check_len(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(mismatch(format!("point has {} entries, space has {}", x.len(), self.dim())));
        }
        Ok(())
    }

    fn as_matrix(&self, x: &[f64]) -> Matrix {
        Matrix { rows: self.rows, cols: self.cols, data: x.to_vec() }
    }

    pub fn norm(&self, x: &[f64]) -> Result<f64> {
        self.check_len(x)?;
        match self.kind {
            SpaceKind::VectorLp => lp_norm(x, self.p),
            SpaceKind::SchattenP => schatten_norm(&self.as_matrix(x), self.p),
        }
    }

    pub fn dual_norm(&self, z: &[f64]) -> Result<f64> {
        self.dual().norm(z)
    }

    /// Gradient of `(1/q) |x|^q` in this space.
    pub fn duality_map(&self, x: &[f64], q: f64) -> Result<Vec<f64>> {
        self.check_len(x)?;
        match self.kind {
            SpaceKind::VectorLp => duality_map(x, self.p, q),
            SpaceKind::SchattenP => Ok(schatten_duality_map(&self.as_matrix(x), self.p, q)?.data),
        }
    }

    /// Inverse of `duality_map(., q)`: the dual-space map with exponent `q*`.
    pub fn inverse_duality_map(&self, z: &[f64], q: f64) -> Result<Vec<f64>> {
        self.dual().duality_map(z, dual_exponent(q)?)
    }
}
