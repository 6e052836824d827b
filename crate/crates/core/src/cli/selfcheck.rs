//! Desk-scale invariant suites behind `compcomp selfcheck`.

// Checks are written as `!(ok)` so that NaN counts as a failure.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use crate::apps::{build_bridge, build_correlated, build_elastic_net};
use crate::gradnorm::{minimize_grad_norm, GradNormConfig};
use crate::hardinstance::{complexity_lower_bound, HardInstance};
use crate::linalg::{inf_norm, Matrix};
use crate::oracles::{finite_diff_check, make_least_squares, make_logistic, make_lp_residual};
use crate::regularizers::{composite_prox, prox_objective, Regularizer, Scaffold};
use crate::solver::{agd_plus, SolverConfig, TRACE_HEADER};
use crate::spaces::NormedSpace;
use crate::verification::{perturbation_check, reference_minimize, reference_solve, replay_certificate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::time::Instant;

/// Deliberate defects for negative-control runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Fault {
    /// Flip the sign of every duality map the spaces suite checks.
    DualitySign,
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteResult {
    pub name: &'static str,
    pub passed: bool,
    pub checks: usize,
    pub detail: String,
    pub seconds: f64,
}

type Outcome = std::result::Result<usize, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn lib<T>(r: crate::Result<T>) -> std::result::Result<T, String> {
    r.map_err(|e| e.to_string())
}

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::new(rows, cols, (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect()).expect("shape")
}

fn spaces(rng: &mut ChaCha8Rng, fault: Option<Fault>) -> Outcome {
    let mut n = 0;
    for case in 0..300 {
        let space = if case % 3 == 2 {
            lib(NormedSpace::schatten(rng.gen_range(1.1..5.0), 2, 3))?
        } else {
            lib(NormedSpace::lp(rng.gen_range(1.1..5.0), rng.gen_range(1..=6)))?
        };
        let q = rng.gen_range(1.2..5.0);
        let x: Vec<f64> = (0..space.dim()).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let mut j = lib(space.duality_map(&x, q))?;
        if fault == Some(Fault::DualitySign) {
            j.iter_mut().for_each(|v| *v = -*v);
        }
        let xn = lib(space.norm(&x))?;
        let pair: f64 = x.iter().zip(&j).map(|(a, b)| a * b).sum();
        ensure!((pair - xn.powf(q)).abs() <= 1e-9 * xn.powf(q), "pairing <x, J(x)> != |x|^q (case {case})");
        let jn = lib(space.dual_norm(&j))?;
        ensure!((jn - xn.powf(q - 1.0)).abs() <= 1e-9 * (1.0 + jn), "|J(x)|_* != |x|^(q-1) (case {case})");
        let back = lib(space.inverse_duality_map(&j, q))?;
        let err = x.iter().zip(&back).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        ensure!(err <= 1e-9 * (1.0 + inf_norm(&x)), "inverse map error {err:e} (case {case})");
        n += 3;
    }
    Ok(n)
}

fn oracles(rng: &mut ChaCha8Rng) -> Outcome {
    let a = random_matrix(rng, 6, 4);
    let b: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let labels: Vec<f64> = (0..6).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
    let list = [
        lib(make_least_squares(&a, &b))?,
        lib(make_logistic(&a, &labels))?,
        lib(make_lp_residual(&a, &b, 3.0))?,
        lib(make_lp_residual(&a, &b, 1.5))?,
    ];
    let mut n = 0;
    for o in &list {
        for _ in 0..10 {
            let x: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let err = finite_diff_check(o, &x, None);
            ensure!(err <= 1e-5, "{}: finite-difference mismatch {err:e}", o.describe());
            n += 1;
        }
    }
    Ok(n)
}

fn regularizers(rng: &mut ChaCha8Rng) -> Outcome {
    let mut n = 0;
    for case in 0..40 {
        let d = rng.gen_range(1..=3);
        let p = rng.gen_range(1.2..4.0);
        let reg = lib(Regularizer::power_of_norm(lib(NormedSpace::lp(p, d))?, rng.gen_range(0.2..2.0), vec![0.0; d]))?;
        let u: Vec<f64> = (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let v: Vec<f64> = (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let diff: Vec<f64> = u.iter().zip(&v).map(|(a, b)| a - b).collect();
        let floor = reg.modulus() / reg.q() * lib(reg.space.norm(&diff))?.powf(reg.q());
        ensure!(lib(reg.bregman(&u, &v))? >= floor - 1e-12, "uniform convexity sample fails (case {case})");
        let sc = lib(Scaffold::for_regularizer(&reg, &reg.center))?;
        let z: Vec<f64> = (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let (a, m0) = (rng.gen_range(0.5..2.0), rng.gen_range(0.5..2.0));
        let w = lib(composite_prox(&reg, &sc, &z, a, m0))?;
        let obj = |x: &[f64]| prox_objective(&reg, &sc, &z, a, m0, x).unwrap_or(f64::INFINITY);
        let (_, f_ref) = reference_minimize(&obj, &reg.center, 4.0 * (1.0 + inf_norm(&z) / m0));
        ensure!(obj(&w) <= f_ref + 1e-9, "prox objective above brute force (case {case})");
        n += 2;
    }
    Ok(n)
}

fn solver(rng: &mut ChaCha8Rng) -> Outcome {
    let a = random_matrix(rng, 20, 8);
    let b: Vec<f64> = (0..20).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let spec = lib(build_elastic_net(&a, &b, 0.1, 0.5))?;
    let r = lib(reference_solve(&spec, 1e-10))?;
    let sol = lib(spec.solve(&SolverConfig { max_iters: 100, ..Default::default() }))?;
    ensure!(sol.trace.records.len() == 101, "trace has {} rows, expected 101", sol.trace.records.len());
    ensure!(sol.trace.to_csv().lines().next() == Some(TRACE_HEADER), "trace header changed");
    let replay = lib(replay_certificate(&sol.trace, &spec, &r))?;
    ensure!(replay.passed, "certificate replay failed:\n{}", replay.to_csv());
    let gap = sol.trace.last().obj - r.f_ref;
    ensure!(gap <= 1e-6, "gap {gap:e} after 100 iterations");
    Ok(3)
}

fn gradnorm(rng: &mut ChaCha8Rng) -> Outcome {
    let a = random_matrix(rng, 20, 10);
    let b: Vec<f64> = (0..20).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut n = 0;
    for p_star in [2.0, 4.0] {
        let task = lib(build_correlated(&a, &b, p_star))?;
        let eps = 1e-4;
        let (y, rep) = lib(minimize_grad_norm(&task.oracle, &task.space, &[0.0; 10], &GradNormConfig::new(eps)))?;
        let g = lib(task.space.dual_norm(&task.oracle.grad(&y)))?;
        ensure!(rep.converged && g <= eps, "p* = {p_star}: gradient norm {g:e} > {eps:e}");
        n += 1;
    }
    Ok(n)
}

fn hardinstance(rng: &mut ChaCha8Rng) -> Outcome {
    let mut n = 0;
    for m in [4, 8] {
        let mut h = lib(HardInstance::new(16, m, 2.0, 2.0, 1.0, 1.0 / 240.0, 0.01))?;
        for _ in 0..m {
            let x: Vec<f64> = (0..16).map(|_| rng.gen_range(-0.1..0.1)).collect();
            lib(h.resisting_query(&x))?;
        }
        let bound = h.guarantee_bound();
        ensure!(h.replay_min() >= bound, "resisting guarantee violated for M = {m}");
        for x in &h.queries {
            let s = lib(h.smoothed_eval(x, 1e-9))?.value;
            let g = h.frozen_value(x) / h.scale();
            ensure!(s <= g + 1e-12 && s >= g - h.eta / 8.0 - 1e-12, "smoothing outside [g - eta/8, g]");
        }
        n += 1 + h.queries.len();
    }
    let c = complexity_lower_bound(2.0, 2.0, 200.0, 1.0, 1e-6, 16.0, 1.0).count;
    ensure!(c == 3.0, "Theorem-4 count {c} != 3");
    let h = lib(HardInstance::new(16, 8, 2.0, 2.0, 1.0, 1.0 / 240.0, 0.01))?;
    ensure!(h.hypotheses(4.8, 2.0).all(), "reference parameter set no longer feasible");
    Ok(n + 2)
}

fn apps(rng: &mut ChaCha8Rng) -> Outcome {
    let mut n = 0;
    for (i, p) in [1.5, 2.0, 3.0].into_iter().enumerate() {
        let a = random_matrix(rng, 10, 4 + i);
        let b: Vec<f64> = (0..10).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let spec = lib(build_bridge(&a, &b, 0.3, p))?;
        let x: Vec<f64> = (0..a.cols).map(|_| rng.gen_range(-1.0..1.0)).collect();
        ensure!(finite_diff_check(&spec.oracle, &x, None) <= 1e-5, "bridge p = {p}: oracle gradient mismatch");
        let r = lib(reference_solve(&spec, 1e-8))?;
        let sol = lib(spec.solve(&SolverConfig { max_iters: 5000, target_obj: Some(r.f_ref + 1e-7), ..Default::default() }))?;
        let gap = sol.trace.last().obj - r.f_ref;
        ensure!(gap <= 1e-5, "bridge p = {p}: solver gap {gap:e}");
        n += 2;
    }
    Ok(n)
}

fn verification(rng: &mut ChaCha8Rng) -> Outcome {
    let ridge = lib(build_elastic_net(&Matrix::identity(2), &[2.0, 2.0], 0.0, 1.0))?;
    let r = lib(reference_solve(&ridge, 1e-10))?;
    ensure!(r.x_ref.iter().all(|v| (v - 1.0).abs() < 1e-12), "ridge reference {:?}", r.x_ref);
    let lasso = lib(build_elastic_net(&Matrix::identity(2), &[2.0, 0.0], 1.0, 0.0))?;
    let r = lib(reference_solve(&lasso, 1e-10))?;
    ensure!((r.x_ref[0] - 1.0).abs() < 1e-12 && r.x_ref[1].abs() < 1e-12, "lasso reference {:?}", r.x_ref);
    let bridge = lib(build_bridge(&Matrix::identity(2), &[2.0, 0.0], 1.0, 1.5))?;
    let r = lib(reference_solve(&bridge, 1e-8))?;
    ensure!(lib(perturbation_check(&bridge, &r, 2000, rng.gen()))?, "bridge reference beaten by a perturbation");
    let zero = lib(build_elastic_net(&Matrix::identity(3), &[0.0; 3], 0.5, 0.5))?;
    let sol = lib(agd_plus(&zero.oracle, &zero.reg, &zero.scaffold, &[0.0; 3], &SolverConfig { max_iters: 20, ..Default::default() }))?;
    ensure!(sol.trace.records.iter().all(|rec| rec.obj == 0.0), "zero problem left the origin");
    Ok(4)
}

fn io(rng: &mut ChaCha8Rng) -> Outcome {
    let m = random_matrix(rng, 3, 4);
    let back = lib(Matrix::from_rows(&lib(super::io::parse_csv(&super::io::matrix_to_csv(&m), "mem"))?))?;
    ensure!(back == m, "CSV round trip changed values");
    let back = lib(super::io::parse_matrix_market(&super::io::matrix_to_mtx(&m), "mem"))?;
    ensure!(back == m, "Matrix Market round trip changed values");
    Ok(2)
}

pub fn run(seed: u64, fault: Option<Fault>) -> Vec<SuiteResult> {
    type Suite = fn(&mut ChaCha8Rng, Option<Fault>) -> Outcome;
    let suites: [(&'static str, Suite); 9] = [
        ("spaces", spaces),
        ("oracles", |r, _| oracles(r)),
        ("regularizers", |r, _| regularizers(r)),
        ("solver", |r, _| solver(r)),
        ("gradnorm", |r, _| gradnorm(r)),
        ("hardinstance", |r, _| hardinstance(r)),
        ("apps", |r, _| apps(r)),
        ("verification", |r, _| verification(r)),
        ("io", |r, _| io(r)),
    ];
    suites
        .iter()
        .enumerate()
        .map(|(i, (name, f))| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i as u64));
            let t = Instant::now();
            let out = f(&mut rng, fault);
            let seconds = t.elapsed().as_secs_f64();
            match out {
                Ok(checks) => SuiteResult { name, passed: true, checks, detail: String::new(), seconds },
                Err(detail) => SuiteResult { name, passed: false, checks: 0, detail, seconds },
            }
        })
        .collect()
}

pub fn table(results: &[SuiteResult]) -> String {
    let mut s = format!("{:<14} {:<6} {:>7} {:>9}  detail\n", "suite", "status", "checks", "seconds");
    for r in results {
        s.push_str(&format!(
            "{:<14} {:<6} {:>7} {:>9.3}  {}\n",
            r.name,
            if r.passed { "pass" } else { "FAIL" },
            r.checks,
            r.seconds,
            r.detail.lines().next().unwrap_or("")
        ));
    }
    s
}
