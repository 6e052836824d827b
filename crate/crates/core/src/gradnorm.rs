//! Small gradients in non-Euclidean norms by regularization and restarts.
//!
//! Solves `f + lambda psi_p(. - x0)` with AGD+ until `|grad f(y)|_{p*} <= eps`.
//! When the regularized gradient is already small but the plain one is not,
//! the distance estimate behind `lambda` was too small: halve `lambda` and
//! restart from the last iterate.

use crate::error::{invalid, Result};
use crate::oracles::Oracle;
use crate::regularizers::{Regularizer, Scaffold};
use crate::solver::{agd_plus_with, composite_grad_norm, SolverConfig, StopReason};
use crate::spaces::{NormedSpace, SpaceKind};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradNormConfig {
    pub epsilon: f64,
    pub r_init: f64,
    pub lambda_init: Option<f64>,
    pub max_restarts: usize,
    /// Inner solver settings; its `epsilon` is the per-step model slack.
    pub inner: SolverConfig,
}

impl GradNormConfig {
    pub fn new(epsilon: f64) -> Self {
        GradNormConfig {
            epsilon,
            r_init: 1.0,
            lambda_init: None,
            max_restarts: 60,
            inner: SolverConfig { epsilon: 0.125 * epsilon * epsilon, max_iters: 200_000, ..Default::default() },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradNormReport {
    pub restarts: usize,
    pub lambda_init: f64,
    pub lambda_final: f64,
    pub grad_queries: usize,
    pub final_f_grad_norm: f64,
    pub final_composite_grad_norm: f64,
    pub inner_iterations: usize,
    pub converged: bool,
    pub warm_restart: bool,
}

/// `eps (p-1) / (2R)` for `p <= 2`, `eps / (2 R^(p-1))` above.
pub fn choose_lambda(p: f64, epsilon: f64, r: f64) -> Result<f64> {
    if !(p > 1.0 && p.is_finite()) {
        return Err(invalid(format!("exponent must lie in (1, inf), got {p}")));
    }
    if !(epsilon > 0.0 && r > 0.0) {
        return Err(invalid("epsilon and R must be positive"));
    }
    Ok(if p <= 2.0 { epsilon * (p - 1.0) / (2.0 * r) } else { epsilon / (2.0 * r.powf(p - 1.0)) })
}

fn regularizer(space: &NormedSpace, lambda: f64, center: &[f64]) -> Result<Regularizer> {
    match space.kind {
        SpaceKind::VectorLp => Regularizer::power_of_norm(*space, lambda, center.to_vec()),
        SpaceKind::SchattenP => Regularizer::schatten_power(*space, lambda, center.to_vec()),
    }
}

pub fn minimize_grad_norm(
    oracle: &Oracle,
    space: &NormedSpace,
    x0: &[f64],
    cfg: &GradNormConfig,
) -> Result<(Vec<f64>, GradNormReport)> {
    let eps = cfg.epsilon;
    if !(eps > 0.0 && cfg.r_init > 0.0) {
        return Err(invalid("epsilon and R_init must be positive"));
    }
    let q0 = oracle.queries();
    let lambda_init = match cfg.lambda_init {
        Some(l) if l > 0.0 => l,
        Some(l) => return Err(invalid(format!("lambda_init must be positive, got {l}"))),
        None => choose_lambda(space.p, eps, cfg.r_init)?,
    };
    let mut report = GradNormReport {
        restarts: 0,
        lambda_init,
        lambda_final: lambda_init,
        grad_queries: 0,
        final_f_grad_norm: f64::NAN,
        final_composite_grad_norm: f64::NAN,
        inner_iterations: 0,
        converged: false,
        warm_restart: true,
    };
    let g0 = space.dual_norm(&oracle.grad(x0))?;
    if g0 <= eps {
        report.final_f_grad_norm = g0;
        report.final_composite_grad_norm = g0;
        report.converged = true;
        report.grad_queries = oracle.queries() - q0;
        return Ok((x0.to_vec(), report));
    }

    let mut lambda = lambda_init;
    let mut start = x0.to_vec();
    let mut inner = cfg.inner.clone();
    inner.record_grad = true;
    inner.grad_tol = None;
    loop {
        let reg = regularizer(space, lambda, &start)?;
        let sc = Scaffold::for_regularizer(&reg, &start)?;
        let mut norms = (f64::NAN, f64::NAN);
        let mut err = None;
        let mut observe = |v: &crate::solver::IterView| {
            let Some(g) = v.grad_f else { return false };
            let gn = match space.dual_norm(g) {
                Ok(n) => n,
                Err(e) => {
                    err = Some(e);
                    return true;
                }
            };
            let cn = match composite_grad_norm(&reg, v.y, g) {
                Ok(n) => n,
                Err(e) => {
                    err = Some(e);
                    return true;
                }
            };
            norms = (gn, cn);
            gn <= eps || cn <= 0.5 * eps
        };
        let sol = agd_plus_with(oracle, &reg, &sc, &start, &inner, &mut observe)?;
        if let Some(e) = err {
            return Err(e);
        }
        report.inner_iterations += sol.state.k;
        report.final_f_grad_norm = norms.0;
        report.final_composite_grad_norm = norms.1;
        report.lambda_final = lambda;
        report.grad_queries = oracle.queries() - q0;
        inner.m_init = sol.state.m_k;
        if sol.trace.stop != StopReason::Observer {
            log::info!("inner solve ended with {:?} before reaching the gradient target", sol.trace.stop);
            return Ok((sol.y, report));
        }
        if norms.0 <= eps {
            report.converged = true;
            return Ok((sol.y, report));
        }
        if report.restarts >= cfg.max_restarts {
            log::info!("restart cap {} reached", cfg.max_restarts);
            return Ok((sol.y, report));
        }
        report.restarts += 1;
        lambda *= 0.5;
        log::debug!("restart {}: lambda -> {lambda:e}", report.restarts);
        start = sol.y;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;
    use crate::oracles::{make_constant, make_least_squares};

    #[test]
    fn lambda_examples() {
        assert!((choose_lambda(2.0, 0.1, 1.0).unwrap() - 0.05).abs() < 1e-17);
        assert!((choose_lambda(1.5, 0.1, 2.0).unwrap() - 0.0125).abs() < 1e-17);
        assert!((choose_lambda(4.0, 0.1, 2.0).unwrap() - 0.00625).abs() < 1e-17);
        assert!(choose_lambda(1.0, 0.1, 1.0).is_err());
    }

    #[test]
    fn euclidean_quadratic() {
        let o = make_least_squares(&Matrix::identity(2), &[0.0, 0.0]).unwrap();
        let s = NormedSpace::lp(2.0, 2).unwrap();
        let (y, rep) = minimize_grad_norm(&o, &s, &[1.0, 0.0], &GradNormConfig::new(1e-3)).unwrap();
        assert!(rep.converged);
        assert_eq!(rep.restarts, 0);
        assert!(crate::linalg::euclid(&y) <= 1e-3);
    }

    #[test]
    fn zero_gradient_returns_start() {
        let o = make_constant(3, 2.0);
        let s = NormedSpace::lp(3.0, 3).unwrap();
        let x0 = [1.0, 2.0, 3.0];
        let (y, rep) = minimize_grad_norm(&o, &s, &x0, &GradNormConfig::new(1e-6)).unwrap();
        assert_eq!(y, x0.to_vec());
        assert!(rep.converged && rep.restarts == 0);
    }
}
