//! Generalized AGD+ with adaptive estimation of the smoothness constant.
//!
//! Iteration `k` computes
//!
//! ```text
//! x_k = (A_{k-1}/A_k) y_{k-1} + (a_k/A_k) v_{k-1}
//! v_k = argmin <z_k, u> + A_k psi(u) + m0 phi(u),   z_k = sum_i a_i grad f(x_i)
//! y_k = (A_{k-1}/A_k) y_{k-1} + (a_k/A_k) v_k
//! ```
//!
//! with `a_0 = A_0 = 1`, `y_0 = v_0` and `a_k^q = max(lambda A_{k-1}^q, m0 A_k^(q-1)) / M_k`.
//! Whenever the local upper model fails at `(x_k, y_k)` with slack
//! `delta_k = (a_k/A_k) eps`, `M_k` doubles and iteration `k` is redone.

use crate::error::{invalid, mismatch, Error, Result};
use crate::linalg::{axpy, combine, dot, sub};
use crate::oracles::Oracle;
use crate::regularizers::{composite_prox, RegKind, Regularizer, Scaffold};
use crate::spaces::NormedSpace;
use crate::tolerances::{
    BISECTION_TOL, BRACKET_EXPANSIONS, OVERFLOW_GUARD, SMOOTHNESS_SLACK, STALL_REL, STALL_WINDOW,
};
use serde::{Deserialize, Serialize};
use std::time::Instant;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub epsilon: f64,
    /// Iterations after the initial one.
    pub max_iters: usize,
    pub m_init: f64,
    pub adaptive: bool,
    pub bisection_tol: f64,
    pub seed: u64,
    /// Stop once the composite gradient has dual norm at most this.
    pub grad_tol: Option<f64>,
    /// Stop once the composite objective reaches this value.
    pub target_obj: Option<f64>,
    /// Stop on a relative objective stall over a 50-iteration window.
    pub stall: bool,
    /// Query `grad f(y_k)` every iteration and record its dual norm.
    pub record_grad: bool,
    /// Keep every `v_k` and `y_k` in the trace.
    pub keep_iterates: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            epsilon: 1e-6,
            max_iters: 1000,
            m_init: 1.0,
            adaptive: true,
            bisection_tol: BISECTION_TOL,
            seed: 0,
            grad_tol: None,
            target_obj: None,
            stall: false,
            record_grad: false,
            keep_iterates: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(invalid("epsilon must be positive"));
        }
        if !(self.m_init > 0.0 && self.m_init.is_finite()) {
            return Err(invalid("initial smoothness estimate must be positive"));
        }
        if !(self.bisection_tol > 0.0) {
            return Err(invalid("bisection tolerance must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub x: Vec<f64>,
    pub v: Vec<f64>,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
    pub a_cum: f64,
    pub a_k: f64,
    pub m_k: f64,
    pub m0: f64,
    pub k: usize,
    pub doublings: usize,
    /// `f(y_k) + (1/A_k) sum_i a_i psi(v_i)`.
    pub upper_estimate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub k: usize,
    pub a_k: f64,
    pub a_cum: f64,
    pub m_k: f64,
    pub f: f64,
    pub psi: f64,
    pub obj: f64,
    pub grad_dual_norm: Option<f64>,
    pub doublings: usize,
    pub elapsed_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunHeader {
    pub oracle: String,
    pub regularizer: RegKind,
    pub q: f64,
    pub lambda_eff: f64,
    pub m0: f64,
    pub config: SolverConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopReason {
    MaxIters,
    GradTol,
    Target,
    Stall,
    Observer,
    Overflow,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub header: RunHeader,
    pub records: Vec<TraceRecord>,
    pub v_iterates: Vec<Vec<f64>>,
    pub y_iterates: Vec<Vec<f64>>,
    pub stop: StopReason,
    pub grad_queries: usize,
}

pub const TRACE_HEADER: &str = "k,a_k,A_k,M_k,f,psi,obj,grad_dual_norm,doublings,elapsed_ms";

/// Decimal with 17 significant digits.
pub fn fmt17(x: f64) -> String {
    if x.is_finite() {
        format!("{:.16e}", x)
    } else {
        format!("{x}")
    }
}

impl Trace {
    pub fn to_csv(&self) -> String {
        let mut s = String::from(TRACE_HEADER);
        s.push('\n');
        for r in &self.records {
            let g = r.grad_dual_norm.map_or_else(|| "nan".to_string(), fmt17);
            s.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                r.k,
                fmt17(r.a_k),
                fmt17(r.a_cum),
                fmt17(r.m_k),
                fmt17(r.f),
                fmt17(r.psi),
                fmt17(r.obj),
                g,
                r.doublings,
                fmt17(r.elapsed_ms)
            ));
        }
        s
    }

    /// Header object on the first line, one record per following line.
    pub fn to_json_lines(&self) -> String {
        let mut s = serde_json::to_string(&self.header).expect("header serializes");
        s.push('\n');
        for r in &self.records {
            s.push_str(&serde_json::to_string(r).expect("record serializes"));
            s.push('\n');
        }
        s
    }

    pub fn last(&self) -> &TraceRecord {
        self.records.last().expect("trace has the initial record")
    }

    /// Total accepted doublings.
    pub fn doublings(&self) -> usize {
        self.records.iter().map(|r| r.doublings).sum()
    }
}

pub struct Solution {
    pub y: Vec<f64>,
    pub trace: Trace,
    pub state: SolverState,
}

/// What an observer sees after each accepted iteration.
pub struct IterView<'a> {
    pub k: usize,
    pub y: &'a [f64],
    pub f: f64,
    pub psi: f64,
    pub obj: f64,
    pub grad_f: Option<&'a [f64]>,
    pub a_cum: f64,
}

/// Step coefficient `a_k = max(a1, a2)` with `a1 = A_prev (lambda/M)^(1/q)` and
/// `a2` the positive root of `a^q = (m0/M) (A_prev + a)^(q-1)`.
pub fn compute_step(a_prev: f64, lambda: f64, m0: f64, m_k: f64, q: f64, tol: f64) -> Result<f64> {
    if !(a_prev > 0.0 && m_k > 0.0 && q > 1.0 && lambda >= 0.0 && m0 >= 0.0) {
        return Err(invalid("step rule needs A_prev > 0, M > 0, q > 1 and nonnegative weights"));
    }
    let a1 = if lambda > 0.0 { a_prev * (lambda / m_k).powf(1.0 / q) } else { 0.0 };
    let a2 = if m0 > 0.0 { scaffold_root(a_prev, m0 / m_k, q, tol)? } else { 0.0 };
    let a = a1.max(a2);
    if !(a > 0.0) {
        return Err(Error::Numerical("step rule yields no positive step".into()));
    }
    Ok(a)
}

fn scaffold_root(a_prev: f64, ratio: f64, q: f64, tol: f64) -> Result<f64> {
    // r is increasing in a; the root of r is the root of the step equation.
    let lr = ratio.ln();
    let r = |a: f64| q * a.ln() - (q - 1.0) * (a_prev + a).ln() - lr;
    let mut lo = ratio.powf(1.0 / q) * a_prev.powf((q - 1.0) / q);
    if r(lo) >= 0.0 {
        return Ok(lo);
    }
    let mut hi = lo + a_prev + 1.0;
    let mut expansions = 0;
    while r(hi) < 0.0 {
        expansions += 1;
        if expansions > BRACKET_EXPANSIONS || !hi.is_finite() {
            return Err(Error::Numerical("no bracket for the step equation".into()));
        }
        lo = hi;
        hi *= 2.0;
    }
    while hi - lo > tol * hi {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if r(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Whether `f(y) <= f(x) + <grad f(x), y - x> + (M/q)|y - x|^q + delta/2`.
pub fn validate_smoothness(
    oracle: &Oracle,
    space: &NormedSpace,
    x: &[f64],
    y: &[f64],
    m_k: f64,
    q: f64,
    delta: f64,
) -> Result<bool> {
    let gx = oracle.grad(x);
    upper_model_holds(oracle.eval(x), &gx, x, oracle.eval(y), y, space, m_k, q, delta)
}

#[allow(clippy::too_many_arguments)]
fn upper_model_holds(
    fx: f64,
    gx: &[f64],
    x: &[f64],
    fy: f64,
    y: &[f64],
    space: &NormedSpace,
    m_k: f64,
    q: f64,
    delta: f64,
) -> Result<bool> {
    let d = sub(y, x);
    let dist = space.norm(&d)?;
    let model = fx + dot(gx, &d) + m_k / q * dist.powf(q) + 0.5 * delta;
    if !fy.is_finite() {
        return Ok(false);
    }
    Ok(model - fy >= -SMOOTHNESS_SLACK * (1.0 + fx.abs()))
}

/// Stationarity measure at `y`. Power regularizers: dual norm of
/// `grad f(y) + grad psi(y)`. l1 kinds: norm of the unit-step prox residual
/// `y - prox_psi(y - grad f(y))`, which is continuous in `y` and zero exactly
/// at minimizers.
pub fn composite_grad_norm(reg: &Regularizer, y: &[f64], gf: &[f64]) -> Result<f64> {
    let g: Vec<f64> = match reg.kind {
        RegKind::PowerOfNorm | RegKind::SchattenPower => {
            let gp = reg.gradient(y)?;
            gf.iter().zip(gp).map(|(a, b)| a + b).collect()
        }
        RegKind::ElasticNet | RegKind::L1Only => gf
            .iter()
            .zip(y)
            .map(|(gi, yi)| {
                let z = yi - gi;
                let w = z.signum() * (z.abs() - reg.lambda1).max(0.0) / (1.0 + reg.lambda2);
                yi - w
            })
            .collect(),
    };
    reg.space.dual_norm(&g)
}

pub fn agd_plus(oracle: &Oracle, reg: &Regularizer, sc: &Scaffold, x0: &[f64], cfg: &SolverConfig) -> Result<Solution> {
    agd_plus_with(oracle, reg, sc, x0, cfg, &mut |_| false)
}

/// As [`agd_plus`], calling `observer` after every accepted iteration; a
/// `true` return stops the run.
pub fn agd_plus_with(
    oracle: &Oracle,
    reg: &Regularizer,
    sc: &Scaffold,
    x0: &[f64],
    cfg: &SolverConfig,
    observer: &mut dyn FnMut(&IterView) -> bool,
) -> Result<Solution> {
    cfg.validate()?;
    let d = oracle.dim();
    if x0.len() != d || reg.dim() != d || sc.center.len() != d {
        return Err(mismatch(format!(
            "oracle dim {}, regularizer dim {}, start dim {}",
            d,
            reg.dim(),
            x0.len()
        )));
    }
    let q = sc.q();
    if reg.is_power() && reg.q() != q {
        return Err(invalid("regularizer and scaffold exponents differ"));
    }
    let space = reg.space;
    let lam = reg.modulus();
    let sc_mod = sc.modulus();
    let eps = cfg.epsilon;
    let start = Instant::now();
    let q0 = oracle.queries();
    let want_grad = cfg.record_grad || cfg.grad_tol.is_some();

    // Iteration 0: A_0 = a_0 = 1, delta_0 = eps, M_0 adapted at (x_0, y_0).
    let mut m_k = cfg.m_init;
    let x = x0.to_vec();
    let fx = oracle.eval(&x);
    let gx = oracle.grad(&x);
    let mut doublings_now = 0;
    let (v, fy) = loop {
        let v = composite_prox(reg, sc, &gx, 1.0, m_k)?;
        let fy = oracle.eval(&v);
        if !cfg.adaptive || upper_model_holds(fx, &gx, &x, fy, &v, &space, m_k, q, eps)? {
            break (v, fy);
        }
        m_k *= 2.0;
        doublings_now += 1;
        if m_k > OVERFLOW_GUARD {
            return Err(Error::Numerical("smoothness estimate overflowed at iteration 0".into()));
        }
    };
    let m0 = m_k;
    let mut st = SolverState {
        x,
        y: v.clone(),
        v,
        z: gx,
        a_cum: 1.0,
        a_k: 1.0,
        m_k,
        m0,
        k: 0,
        doublings: doublings_now,
        upper_estimate: 0.0,
    };
    let mut psi_weighted = reg.eval(&st.v)?;
    st.upper_estimate = fy + psi_weighted;

    let header = RunHeader {
        oracle: oracle.describe(),
        regularizer: reg.kind,
        q,
        lambda_eff: lam,
        m0,
        config: cfg.clone(),
    };
    let mut trace = Trace {
        header,
        records: Vec::new(),
        v_iterates: Vec::new(),
        y_iterates: Vec::new(),
        stop: StopReason::MaxIters,
        grad_queries: 0,
    };

    let mut fy = fy;
    let mut stop = None;
    let mut k = 0usize;
    loop {
        let psi_y = reg.eval(&st.y)?;
        let obj = fy + psi_y;
        let gy = if want_grad { Some(oracle.grad(&st.y)) } else { None };
        let gnorm = match &gy {
            Some(g) => Some(space.dual_norm(g)?),
            None => None,
        };
        trace.records.push(TraceRecord {
            k,
            a_k: st.a_k,
            a_cum: st.a_cum,
            m_k: st.m_k,
            f: fy,
            psi: psi_y,
            obj,
            grad_dual_norm: gnorm,
            doublings: doublings_now,
            elapsed_ms: start.elapsed().as_secs_f64() * 1e3,
        });
        if cfg.keep_iterates {
            trace.v_iterates.push(st.v.clone());
            trace.y_iterates.push(st.y.clone());
        }
        if let (Some(tol), Some(g)) = (cfg.grad_tol, &gy) {
            if composite_grad_norm(reg, &st.y, g)? <= tol {
                stop = Some(StopReason::GradTol);
            }
        }
        if stop.is_none() && cfg.target_obj.is_some_and(|t| obj <= t) {
            stop = Some(StopReason::Target);
        }
        if stop.is_none() && cfg.stall && k >= STALL_WINDOW {
            let old = trace.records[k - STALL_WINDOW].obj;
            if (old - obj).abs() <= STALL_REL * (1.0 + obj.abs()) {
                stop = Some(StopReason::Stall);
            }
        }
        if stop.is_none() {
            let view = IterView { k, y: &st.y, f: fy, psi: psi_y, obj, grad_f: gy.as_deref(), a_cum: st.a_cum };
            if observer(&view) {
                stop = Some(StopReason::Observer);
            }
        }
        if stop.is_some() || k >= cfg.max_iters {
            break;
        }

        // Iteration k + 1.
        k += 1;
        doublings_now = 0;
        let a_prev = st.a_cum;
        let accepted = loop {
            let a = compute_step(a_prev, lam, m0 * sc_mod, m_k, q, cfg.bisection_tol)?;
            let a_new = a_prev + a;
            if a_new > OVERFLOW_GUARD {
                break None;
            }
            let (wy, wv) = (a_prev / a_new, a / a_new);
            let x = combine(wy, &st.y, wv, &st.v);
            let gx = oracle.grad(&x);
            let mut z = st.z.clone();
            axpy(&mut z, a, &gx);
            let v = composite_prox(reg, sc, &z, a_new, m0)?;
            let y = combine(wy, &st.y, wv, &v);
            let fy_new = oracle.eval(&y);
            let ok = !cfg.adaptive || {
                let fx = oracle.eval(&x);
                upper_model_holds(fx, &gx, &x, fy_new, &y, &space, m_k, q, a / a_new * eps)?
            };
            if ok {
                break Some((a, a_new, x, z, v, y, fy_new));
            }
            m_k *= 2.0;
            doublings_now += 1;
            log::debug!("iteration {k}: doubling M to {m_k:e}");
            if m_k > OVERFLOW_GUARD {
                return Err(Error::Numerical(format!("smoothness estimate overflowed at iteration {k}")));
            }
        };
        let Some((a, a_new, x, z, v, y, fy_new)) = accepted else {
            stop = Some(StopReason::Overflow);
            break;
        };
        psi_weighted = (a_prev * psi_weighted + a * reg.eval(&v)?) / a_new;
        st = SolverState {
            x,
            v,
            y,
            z,
            a_cum: a_new,
            a_k: a,
            m_k,
            m0,
            k,
            doublings: st.doublings + doublings_now,
            upper_estimate: fy_new + psi_weighted,
        };
        fy = fy_new;
    }
    trace.stop = stop.unwrap_or(StopReason::MaxIters);
    trace.grad_queries = oracle.queries() - q0;
    log::info!(
        "agd+ stopped after {} iterations ({:?}), {} doublings, {} gradient queries",
        st.k,
        trace.stop,
        st.doublings,
        trace.grad_queries
    );
    Ok(Solution { y: st.y.clone(), trace, state: st })
}
