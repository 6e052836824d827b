//! Regression problem builders.

use crate::error::{invalid, mismatch, Error, Result};
use crate::linalg::{inf_norm, Matrix};
use crate::oracles::{make_correlated_ls, make_least_squares, make_lp_residual, Oracle};
use crate::regularizers::{Regularizer, Scaffold};
use crate::solver::{agd_plus, Solution, SolverConfig};
use crate::spaces::{dual_exponent, NormedSpace};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    ElasticNet,
    Bridge,
    Dantzig,
    LpRegression,
    Schatten,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ProblemMeta {
    /// Penalty as passed to the builder.
    pub lambda: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub p: f64,
    pub approx_eps: Option<f64>,
    pub rows: usize,
    pub cols: usize,
}

pub struct ProblemSpec {
    pub kind: ProblemKind,
    pub oracle: Oracle,
    pub reg: Regularizer,
    pub scaffold: Scaffold,
    pub space: NormedSpace,
    pub meta: ProblemMeta,
    pub a: Matrix,
    pub b: Vec<f64>,
}

impl ProblemSpec {
    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    /// `f(x) + psi(x)`.
    pub fn objective(&self, x: &[f64]) -> Result<f64> {
        Ok(self.oracle.eval(x) + self.reg.eval(x)?)
    }

    /// Runs AGD+ from the scaffold center.
    pub fn solve(&self, cfg: &SolverConfig) -> Result<Solution> {
        agd_plus(&self.oracle, &self.reg, &self.scaffold, &self.scaffold.center, cfg)
    }
}

fn check_penalty(name: &str, v: f64) -> Result<()> {
    if !(v >= 0.0 && v.is_finite()) {
        return Err(invalid(format!("{name} must be finite and nonnegative, got {v}")));
    }
    Ok(())
}

fn finish(kind: ProblemKind, oracle: Oracle, reg: Regularizer, meta: ProblemMeta, a: &Matrix, b: &[f64]) -> Result<ProblemSpec> {
    let center = vec![0.0; reg.dim()];
    let scaffold = Scaffold::for_regularizer(&reg, &center)?;
    Ok(ProblemSpec { kind, oracle, space: reg.space, reg, scaffold, meta, a: a.clone(), b: b.to_vec() })
}

/// Least squares plus `lambda2/2 |x|_2^2 + lambda1 |x|_1`.
pub fn build_elastic_net(a: &Matrix, b: &[f64], lambda1: f64, lambda2: f64) -> Result<ProblemSpec> {
    check_penalty("lambda1", lambda1)?;
    check_penalty("lambda2", lambda2)?;
    let oracle = make_least_squares(a, b)?;
    let reg = if lambda2 > 0.0 {
        Regularizer::elastic_net(a.cols, lambda1, lambda2)?
    } else {
        Regularizer::l1_only(a.cols, lambda1)?
    };
    let meta = ProblemMeta { lambda1, lambda2, lambda: lambda2, p: 2.0, rows: a.cols, cols: 1, ..Default::default() };
    finish(ProblemKind::ElasticNet, oracle, reg, meta, a, b)
}

/// Least squares plus `lambda/2 |x|_p^2` (p <= 2) or `lambda/p |x|_p^p` (p > 2).
pub fn build_bridge(a: &Matrix, b: &[f64], lambda: f64, p: f64) -> Result<ProblemSpec> {
    check_penalty("lambda", lambda)?;
    let space = NormedSpace::lp(p, a.cols)?;
    let oracle = make_least_squares(a, b)?;
    let scale = if p <= 2.0 { lambda * (p - 1.0) } else { lambda };
    let reg = Regularizer::power_of_norm(space, scale, vec![0.0; a.cols])?;
    let meta = ProblemMeta { lambda, p, rows: a.cols, cols: 1, ..Default::default() };
    finish(ProblemKind::Bridge, oracle, reg, meta, a, b)
}

/// `1/2 |A^T(Ax - b)|_{p*}^2 + lambda/2 |x|_p^2` with `p* = ln d / ln(1 + eps)`.
pub fn build_dantzig(a: &Matrix, b: &[f64], lambda: f64, approx_eps: f64) -> Result<ProblemSpec> {
    check_penalty("lambda", lambda)?;
    let d = a.cols;
    if d < 3 {
        return Err(invalid(format!("Dantzig selector needs d >= 3, got {d}")));
    }
    if !(approx_eps > 0.0 && approx_eps < 1.0) {
        return Err(invalid(format!("approximation parameter must lie in (0, 1), got {approx_eps}")));
    }
    let p_star = (d as f64).ln() / approx_eps.ln_1p();
    if p_star <= 2.0 {
        return Err(invalid(format!("p* = {p_star} puts p outside (1, 2)")));
    }
    let p = dual_exponent(p_star)?;
    let oracle = make_correlated_ls(a, b, p_star)?;
    let reg = Regularizer::power_of_norm(NormedSpace::lp(p, d)?, lambda * (p - 1.0), vec![0.0; d])?;
    let meta = ProblemMeta { lambda, p, approx_eps: Some(approx_eps), rows: d, cols: 1, ..Default::default() };
    finish(ProblemKind::Dantzig, oracle, reg, meta, a, b)
}

/// `(1/q)|Ax - b|_p^q`, `q = min(2, p)`, with no regularizer; the scaffold is
/// `(1/(qbar min(p-1, 1))) |x|_p^qbar`, `qbar = max(2, p)`.
pub fn build_lp_regression(a: &Matrix, b: &[f64], p: f64) -> Result<ProblemSpec> {
    let space = NormedSpace::lp(p, a.cols)?;
    let oracle = make_lp_residual(a, b, p)?;
    let reg = Regularizer::power_of_norm(space, 0.0, vec![0.0; a.cols])?;
    let meta = ProblemMeta { p, rows: a.cols, cols: 1, ..Default::default() };
    finish(ProblemKind::LpRegression, oracle, reg, meta, a, b)
}

/// Gradient-norm task: make `|A^T(Ay - b)|_p` small with `p = p*/(p* - 1)`,
/// where `y` lives in the `p*`-normed space.
pub struct GradNormTask {
    pub oracle: Oracle,
    pub space: NormedSpace,
    /// Exponent of the norm in which the correlated error is measured.
    pub target_p: f64,
    pub a: Matrix,
    pub b: Vec<f64>,
}

pub fn build_correlated(a: &Matrix, b: &[f64], p_star: f64) -> Result<GradNormTask> {
    let space = NormedSpace::lp(p_star, a.cols)?;
    Ok(GradNormTask {
        oracle: make_least_squares(a, b)?,
        space,
        target_p: dual_exponent(p_star)?,
        a: a.clone(),
        b: b.to_vec(),
    })
}

/// Linear observation model on `rows x cols` matrices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum LinearMap {
    /// Observation j is `<M_j, X>`.
    Sensing(Vec<Matrix>),
    /// Observations are the entries with `mask = true`, row-major.
    Mask { rows: usize, cols: usize, mask: Vec<bool> },
}

impl LinearMap {
    /// The map as a `k x (rows cols)` matrix acting on row-major `vec(X)`.
    pub fn lift(&self) -> Result<(Matrix, usize, usize)> {
        match self {
            LinearMap::Sensing(ms) => {
                let first = ms.first().ok_or_else(|| invalid("no sensing matrices"))?;
                let (r, c) = (first.rows, first.cols);
                if ms.iter().any(|m| m.rows != r || m.cols != c) {
                    return Err(mismatch("sensing matrices differ in shape"));
                }
                let rows: Vec<Vec<f64>> = ms.iter().map(|m| m.data.clone()).collect();
                Ok((Matrix::from_rows(&rows)?, r, c))
            }
            LinearMap::Mask { rows, cols, mask } => {
                if mask.len() != rows * cols {
                    return Err(mismatch("mask length differs from rows x cols"));
                }
                let n = rows * cols;
                let obs: Vec<Vec<f64>> = mask
                    .iter()
                    .enumerate()
                    .filter(|(_, m)| **m)
                    .map(|(i, _)| {
                        let mut e = vec![0.0; n];
                        e[i] = 1.0;
                        e
                    })
                    .collect();
                if obs.is_empty() {
                    return Err(invalid("mask observes no entries"));
                }
                Ok((Matrix::from_rows(&obs)?, *rows, *cols))
            }
        }
    }
}

/// `1/2 |A(X) - b|_2^2 + lambda Psi_{S,p}(X)`.
pub fn build_schatten_problem(op: &LinearMap, b: &[f64], lambda: f64, p: f64) -> Result<ProblemSpec> {
    check_penalty("lambda", lambda)?;
    let (a, r, c) = op.lift()?;
    let space = NormedSpace::schatten(p, r, c)?;
    let oracle = make_least_squares(&a, b)?;
    let reg = Regularizer::schatten_power(space, lambda, vec![0.0; r * c])?;
    let meta = ProblemMeta { lambda, p, rows: r, cols: c, ..Default::default() };
    finish(ProblemKind::Schatten, oracle, reg, meta, &a, b)
}

/// Bridge: `| |A^T(Ax - b)|_{p*} - lambda |x|_p^(q-1) |`, zero at the optimum.
/// Dantzig: `((1+eps)/(1-eps)) A_max |A^T(Ax - b)|_inf - lambda |x|_1`,
/// nonnegative when the trade-off inequality holds.
pub fn tradeoff_check(spec: &ProblemSpec, x: &[f64]) -> Result<f64> {
    let r: Vec<f64> = spec.a.matvec(x).iter().zip(&spec.b).map(|(u, v)| u - v).collect();
    let corr = spec.a.t_matvec(&r);
    match spec.kind {
        ProblemKind::Bridge => {
            let p = spec.meta.p;
            let q = p.max(2.0);
            let fit = spec.space.dual_norm(&corr)?;
            Ok((fit - spec.meta.lambda * spec.space.norm(x)?.powf(q - 1.0)).abs())
        }
        ProblemKind::Dantzig => {
            let eps = spec.meta.approx_eps.unwrap_or(0.0);
            let a_max = spec.a.gram().max_abs();
            let l1: f64 = x.iter().map(|v| v.abs()).sum();
            Ok((1.0 + eps) / (1.0 - eps) * a_max * inf_norm(&corr) - spec.meta.lambda * l1)
        }
        _ => Err(Error::Unsupported("trade-off identity exists only for bridge and Dantzig".into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dantzig_exponents() {
        let a = Matrix::identity(1024);
        let spec = build_dantzig(&a, &vec![0.0; 1024], 1.0, 0.5).unwrap();
        let p_star = 1024f64.ln() / 1.5f64.ln();
        assert!((p_star - 17.0951).abs() < 1e-4);
        assert!((spec.meta.p - p_star / (p_star - 1.0)).abs() < 1e-15);
        assert!((spec.meta.p - 1.06213).abs() < 1e-5);
        assert!((spec.reg.modulus() - (spec.meta.p - 1.0)).abs() < 1e-15);
        assert!(build_dantzig(&Matrix::identity(2), &[0.0, 0.0], 1.0, 0.5).is_err());
    }

    #[test]
    fn tradeoff_trivial_cases() {
        let a = Matrix::from_rows(&[vec![1.0, 0.5], vec![0.0, 2.0]]).unwrap();
        let b = [1.0, -1.0];
        let spec = build_bridge(&a, &b, 0.7, 1.5).unwrap();
        let at_b = spec.space.dual_norm(&a.t_matvec(&b)).unwrap();
        assert!((tradeoff_check(&spec, &[0.0, 0.0]).unwrap() - at_b).abs() < 1e-15);
        let spec0 = build_bridge(&a, &b, 0.0, 1.5).unwrap();
        let x = [0.3, 0.2];
        let r: Vec<f64> = a.matvec(&x).iter().zip(&b).map(|(u, v)| u - v).collect();
        let fit = spec0.space.dual_norm(&a.t_matvec(&r)).unwrap();
        assert!((tradeoff_check(&spec0, &x).unwrap() - fit).abs() < 1e-15);
        let en = build_elastic_net(&a, &b, 1.0, 1.0).unwrap();
        assert!(tradeoff_check(&en, &x).is_err());
    }

    #[test]
    fn mask_lift() {
        let op = LinearMap::Mask { rows: 2, cols: 2, mask: vec![true, false, false, true] };
        let (a, r, c) = op.lift().unwrap();
        assert_eq!((a.rows, a.cols, r, c), (2, 4, 2, 2));
        assert_eq!(a.matvec(&[1.0, 2.0, 3.0, 4.0]), vec![1.0, 4.0]);
    }
}
