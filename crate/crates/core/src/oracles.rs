//! First-order oracles.
//!
//! An [`Oracle`] wraps an [`Objective`] and counts gradient queries. The
//! built-in objectives cover least squares, its correlated-error variant,
//! lp residual powers and the logistic loss.

use crate::error::{invalid, mismatch, Result};
use crate::linalg::{dot, inf_norm, svd, Matrix};
use crate::spaces::{duality_map_with_norm, norm_unchecked, NormedSpace};
use crate::tolerances::FD_STEP;
use std::sync::atomic::{AtomicUsize, Ordering};

/// Declared Hoelder regularity of the gradient:
/// `|grad f(x) - grad f(y)|_* <= l |x - y|^(kappa - 1)` in `space`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Regularity {
    pub l: f64,
    pub kappa: f64,
    pub space: NormedSpace,
}

pub trait Objective: Send + Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64]) -> Vec<f64>;
    fn regularity(&self) -> Option<Regularity> {
        None
    }
    fn describe(&self) -> String;
}

pub struct Oracle {
    inner: Box<dyn Objective>,
    declared: Option<Regularity>,
    queries: AtomicUsize,
}

impl Oracle {
    pub fn new(inner: Box<dyn Objective>) -> Self {
        let declared = inner.regularity();
        Oracle { inner, declared, queries: AtomicUsize::new(0) }
    }

    pub fn from_objective<O: Objective + 'static>(o: O) -> Self {
        Self::new(Box::new(o))
    }

    pub fn dim(&self) -> usize {
        self.inner.dim()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.inner.value(x)
    }

    /// Gradient query; bumps the query counter by exactly one.
    pub fn grad(&self, x: &[f64]) -> Vec<f64> {
        self.queries.fetch_add(1, Ordering::Relaxed);
        self.inner.gradient(x)
    }

    pub fn queries(&self) -> usize {
        self.queries.load(Ordering::Relaxed)
    }

    pub fn reset_queries(&self) {
        self.queries.store(0, Ordering::Relaxed);
    }

    pub fn regularity(&self) -> Option<Regularity> {
        self.declared
    }

    /// Override or add a declared regularity.
    pub fn with_regularity(mut self, r: Regularity) -> Self {
        self.declared = Some(r);
        self
    }

    pub fn describe(&self) -> String {
        self.inner.describe()
    }
}

fn check_system(a: &Matrix, b: &[f64]) -> Result<()> {
    if a.rows != b.len() {
        return Err(mismatch(format!("A has {} rows but b has {} entries", a.rows, b.len())));
    }
    if !a.is_finite() || b.iter().any(|v| !v.is_finite()) {
        return Err(invalid("data contain non-finite values"));
    }
    Ok(())
}

fn sigma_max(a: &Matrix) -> Option<f64> {
    svd(a).ok().map(|d| d.s.first().copied().unwrap_or(0.0))
}

fn residual(a: &Matrix, b: &[f64], x: &[f64]) -> Vec<f64> {
    let mut r = a.matvec(x);
    r.iter_mut().zip(b).for_each(|(ri, bi)| *ri -= bi);
    r
}

/// `1/2 |Ax - b|_2^2`.
pub struct LeastSquares {
    a: Matrix,
    b: Vec<f64>,
    l: Option<f64>,
}

impl Objective for LeastSquares {
    fn dim(&self) -> usize {
        self.a.cols
    }
    fn value(&self, x: &[f64]) -> f64 {
        let r = residual(&self.a, &self.b, x);
        0.5 * dot(&r, &r)
    }
    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        self.a.t_matvec(&residual(&self.a, &self.b, x))
    }
    fn regularity(&self) -> Option<Regularity> {
        let space = NormedSpace::lp(2.0, self.a.cols).ok()?;
        Some(Regularity { l: self.l?, kappa: 2.0, space })
    }
    fn describe(&self) -> String {
        format!("least squares, A {}x{}", self.a.rows, self.a.cols)
    }
}

pub fn make_least_squares(a: &Matrix, b: &[f64]) -> Result<Oracle> {
    check_system(a, b)?;
    let l = sigma_max(a).map(|s| s * s);
    Ok(Oracle::from_objective(LeastSquares { a: a.clone(), b: b.to_vec(), l }))
}

/// `1/2 |A^T (Ax - b)|_{p*}^2`.
pub struct CorrelatedLs {
    gram: Matrix,
    atb: Vec<f64>,
    p_star: f64,
    l: Option<f64>,
}

impl CorrelatedLs {
    fn correlated(&self, x: &[f64]) -> Vec<f64> {
        let mut c = self.gram.matvec(x);
        c.iter_mut().zip(&self.atb).for_each(|(ci, bi)| *ci -= bi);
        c
    }
}

impl Objective for CorrelatedLs {
    fn dim(&self) -> usize {
        self.gram.cols
    }
    fn value(&self, x: &[f64]) -> f64 {
        let n = norm_unchecked(&self.correlated(x), self.p_star);
        0.5 * n * n
    }
    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let c = self.correlated(x);
        let n = norm_unchecked(&c, self.p_star);
        // The Gram matrix is symmetric, so A^T A J = gram * J.
        self.gram.matvec(&duality_map_with_norm(&c, self.p_star, 2.0, n))
    }
    fn regularity(&self) -> Option<Regularity> {
        let space = NormedSpace::lp(2.0, self.gram.cols).ok()?;
        Some(Regularity { l: self.l?, kappa: 2.0, space })
    }
    fn describe(&self) -> String {
        format!("correlated least squares, p* = {}, d = {}", self.p_star, self.gram.cols)
    }
}

pub fn make_correlated_ls(a: &Matrix, b: &[f64], p_star: f64) -> Result<Oracle> {
    check_system(a, b)?;
    if !(p_star >= 2.0 && p_star.is_finite()) {
        return Err(invalid(format!("correlated least squares needs p* >= 2, got {p_star}")));
    }
    // Only the Euclidean case has a closed-form constant: |A^T A|_2^2.
    let l = if p_star == 2.0 { sigma_max(a).map(|s| s.powi(4)) } else { None };
    Ok(Oracle::from_objective(CorrelatedLs { gram: a.gram(), atb: a.t_matvec(b), p_star, l }))
}

/// `(1/q) |Ax - b|_p^q` with `q = min(2, p)`.
pub struct LpResidual {
    a: Matrix,
    b: Vec<f64>,
    p: f64,
    q: f64,
    l: Option<f64>,
}

impl Objective for LpResidual {
    fn dim(&self) -> usize {
        self.a.cols
    }
    fn value(&self, x: &[f64]) -> f64 {
        norm_unchecked(&residual(&self.a, &self.b, x), self.p).powf(self.q) / self.q
    }
    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let r = residual(&self.a, &self.b, x);
        let n = norm_unchecked(&r, self.p);
        self.a.t_matvec(&duality_map_with_norm(&r, self.p, self.q, n))
    }
    fn regularity(&self) -> Option<Regularity> {
        let space = NormedSpace::lp(self.p, self.a.cols).ok()?;
        Some(Regularity { l: self.l?, kappa: self.q, space })
    }
    fn describe(&self) -> String {
        format!("lp residual, p = {}, A {}x{}", self.p, self.a.rows, self.a.cols)
    }
}

pub fn make_lp_residual(a: &Matrix, b: &[f64], p: f64) -> Result<Oracle> {
    check_system(a, b)?;
    if !(p > 1.0 && p.is_finite()) {
        return Err(invalid(format!("exponent must lie in (1, inf), got {p}")));
    }
    let q = p.min(2.0);
    let l = if p == 2.0 {
        sigma_max(a).map(|s| s * s)
    } else if is_identity(a) {
        // Identity design: (p-1) for p > 2, 2^(2-p) for the separable p < 2 power.
        Some(if p > 2.0 { p - 1.0 } else { 2f64.powf(2.0 - p) })
    } else {
        None
    };
    Ok(Oracle::from_objective(LpResidual { a: a.clone(), b: b.to_vec(), p, q, l }))
}

fn is_identity(a: &Matrix) -> bool {
    a.rows == a.cols
        && (0..a.rows).all(|i| (0..a.cols).all(|j| a.get(i, j) == if i == j { 1.0 } else { 0.0 }))
}

/// `sum_i log(1 + exp(-y_i <a_i, x>))`.
pub struct Logistic {
    a: Matrix,
    y: Vec<f64>,
    l: Option<f64>,
}

fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

impl Objective for Logistic {
    fn dim(&self) -> usize {
        self.a.cols
    }
    fn value(&self, x: &[f64]) -> f64 {
        let m = self.a.matvec(x);
        m.iter().zip(&self.y).map(|(mi, yi)| softplus(-yi * mi)).sum()
    }
    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let m = self.a.matvec(x);
        let w: Vec<f64> = m.iter().zip(&self.y).map(|(mi, yi)| -yi * sigmoid(-yi * mi)).collect();
        self.a.t_matvec(&w)
    }
    fn regularity(&self) -> Option<Regularity> {
        let space = NormedSpace::lp(2.0, self.a.cols).ok()?;
        Some(Regularity { l: self.l?, kappa: 2.0, space })
    }
    fn describe(&self) -> String {
        format!("logistic loss, A {}x{}", self.a.rows, self.a.cols)
    }
}

pub fn make_logistic(a: &Matrix, labels: &[f64]) -> Result<Oracle> {
    check_system(a, labels)?;
    if let Some(i) = labels.iter().position(|y| *y != 1.0 && *y != -1.0) {
        return Err(invalid(format!("label {i} is {}, expected +1 or -1", labels[i])));
    }
    let l = sigma_max(a).map(|s| 0.25 * s * s);
    Ok(Oracle::from_objective(Logistic { a: a.clone(), y: labels.to_vec(), l }))
}

/// Constant objective with zero gradient.
pub struct Constant {
    pub dim: usize,
    pub value: f64,
}

impl Objective for Constant {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, _: &[f64]) -> f64 {
        self.value
    }
    fn gradient(&self, _: &[f64]) -> Vec<f64> {
        vec![0.0; self.dim]
    }
    fn describe(&self) -> String {
        format!("constant {}", self.value)
    }
}

pub fn make_constant(dim: usize, value: f64) -> Oracle {
    Oracle::from_objective(Constant { dim, value })
}

type ValueFn = Box<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type GradFn = Box<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// Objective assembled from closures.
pub struct FnObjective {
    pub dim: usize,
    pub name: String,
    pub value: ValueFn,
    pub gradient: GradFn,
}

impl Objective for FnObjective {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, x: &[f64]) -> f64 {
        (self.value)(x)
    }
    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        (self.gradient)(x)
    }
    fn describe(&self) -> String {
        self.name.clone()
    }
}

/// Worst coordinatewise mismatch between the oracle gradient and central
/// differences, relative to `max(|g_i|, |fd_i|, 1)`.
pub fn finite_diff_check(oracle: &Oracle, x: &[f64], h: Option<f64>) -> f64 {
    let h = h.unwrap_or(FD_STEP * (1.0 + inf_norm(x)));
    let g = oracle.grad(x);
    let mut worst = 0.0f64;
    let mut xp = x.to_vec();
    for i in 0..x.len() {
        xp[i] = x[i] + h;
        let fp = oracle.eval(&xp);
        xp[i] = x[i] - h;
        let fm = oracle.eval(&xp);
        xp[i] = x[i];
        let fd = (fp - fm) / (2.0 * h);
        let err = (g[i] - fd).abs() / g[i].abs().max(fd.abs()).max(1.0);
        worst = worst.max(err);
    }
    worst
}

/// Diagnostic bounds on the data matrix: power-iteration spectral norm and
/// the largest absolute entry (the 1 -> inf operator norm).
pub fn operator_norm_bounds(a: &Matrix) -> (f64, f64) {
    (crate::linalg::spectral_norm(a), a.max_abs())
}
