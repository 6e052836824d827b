//! Lower-bound machinery: an adaptive resisting oracle over the max of
//! signed coordinate pieces, its numerical smoothing, and closed-form
//! complexity calculators.

use crate::error::{invalid, Error, Result};
use crate::oracles::{FnObjective, Oracle};
use crate::regularizers::{Regularizer, Scaffold};
use crate::solver::{agd_plus_with, SolverConfig};
use crate::spaces::NormedSpace;
use crate::spaces::{duality_map_with_norm, norm_unchecked};
use crate::tolerances::SMOOTHING_STEPS;
use serde::{Deserialize, Serialize};
use std::sync::{Arc, Mutex};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HardInstance {
    pub d: usize,
    pub m: usize,
    pub p: f64,
    pub kappa: f64,
    pub l: f64,
    pub lambda: f64,
    pub eta: f64,
    /// Kernel exponent `min(p, 3 ln d)`.
    pub r: f64,
    pub mu_bar: f64,
    /// `M^(-1/p)`.
    pub delta_cap: f64,
    pub lambda_bar: f64,
    pub signs: Vec<f64>,
    pub offsets: Vec<f64>,
    pub queries: Vec<Vec<f64>>,
    pub values: Vec<f64>,
}

/// Result of the numerical infimal convolution.
#[derive(Debug, Clone, PartialEq)]
pub struct Smoothed {
    pub value: f64,
    pub grad: Vec<f64>,
    /// Inner minimization still improving by more than the tolerance.
    pub stalled: bool,
}

impl HardInstance {
    pub fn new(d: usize, m: usize, p: f64, kappa: f64, l: f64, lambda: f64, eta: f64) -> Result<Self> {
        if m == 0 || m > d {
            return Err(invalid(format!("need 1 <= M <= d, got M = {m}, d = {d}")));
        }
        if !(p >= 2.0 && p.is_finite()) {
            return Err(invalid(format!("hard instances need p in [2, inf), got {p}")));
        }
        if !(kappa > 1.0 && kappa <= 2.0) {
            return Err(invalid(format!("kappa must lie in (1, 2], got {kappa}")));
        }
        if !(l > 0.0 && lambda > 0.0 && eta > 0.0) {
            return Err(invalid("L, lambda and eta must be positive"));
        }
        let ld = (d as f64).ln();
        let mu_bar = 2f64.powf(2.0 - kappa) * (p.min(ld) / eta).powf(kappa - 1.0);
        Ok(HardInstance {
            d,
            m,
            p,
            kappa,
            l,
            lambda,
            eta,
            r: p.min(3.0 * ld).max(1.0 + 1e-9),
            mu_bar,
            delta_cap: (m as f64).powf(-1.0 / p),
            lambda_bar: 1.0,
            signs: Vec::new(),
            offsets: Vec::new(),
            queries: Vec::new(),
            values: Vec::new(),
        })
    }

    /// `L / mu_bar`.
    pub fn scale(&self) -> f64 {
        self.l / self.mu_bar
    }

    /// Unscaled max over the revealed pieces and the maximizing index
    /// (lowest index on ties).
    fn max_piece(&self, x: &[f64]) -> (f64, usize) {
        let mut best = (f64::NEG_INFINITY, 0);
        for (i, (s, dl)) in self.signs.iter().zip(&self.offsets).enumerate() {
            let v = s * x[i] - dl;
            if v > best.0 {
                best = (v, i);
            }
        }
        best
    }

    /// Reveal piece `t` (sign chosen so the new piece is nonnegative at the
    /// query, offset `(t-1) eta / 4`) and answer with the scaled max.
    pub fn resisting_query(&mut self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        if x.len() != self.d {
            return Err(invalid("query dimension does not match the instance"));
        }
        let t = self.signs.len();
        if t >= self.m {
            return Err(Error::Exhausted(self.m));
        }
        self.signs.push(if x[t] >= 0.0 { 1.0 } else { -1.0 });
        self.offsets.push(t as f64 * self.eta / 4.0);
        let (v, i) = self.max_piece(x);
        let mut g = vec![0.0; self.d];
        g[i] = self.scale() * self.signs[i];
        let value = self.scale() * v;
        self.queries.push(x.to_vec());
        self.values.push(value);
        Ok((value, g))
    }

    pub fn max_offset(&self) -> f64 {
        self.offsets.iter().fold(0.0, |m, v| m.max(*v))
    }

    /// `(L/mu_bar) (-eta - max_i delta_i)`.
    pub fn guarantee_bound(&self) -> f64 {
        self.scale() * (-self.eta - self.max_offset())
    }

    /// Scaled nonsmooth value of the function fixed by the transcript.
    pub fn frozen_value(&self, x: &[f64]) -> f64 {
        self.scale() * self.max_piece(x).0
    }

    /// Smallest frozen value over the recorded queries.
    pub fn replay_min(&self) -> f64 {
        self.queries.iter().map(|x| self.frozen_value(x)).fold(f64::INFINITY, f64::min)
    }

    /// Fix all remaining signs to `+1` so the instance can be smoothed.
    pub fn freeze(&mut self) {
        while self.signs.len() < self.m {
            let t = self.signs.len();
            self.signs.push(1.0);
            self.offsets.push(t as f64 * self.eta / 4.0);
        }
    }

    /// Fix the instance from explicit signs.
    pub fn with_signs(mut self, signs: &[f64]) -> Result<Self> {
        if signs.len() != self.m || signs.iter().any(|s| s.abs() != 1.0) {
            return Err(invalid("need M signs in {-1, +1}"));
        }
        self.signs = signs.to_vec();
        self.offsets = (0..self.m).map(|t| t as f64 * self.eta / 4.0).collect();
        Ok(self)
    }

    /// `inf_{|h|_p <= 1} [g(x + h) + (2/eta) |h|_r^2]` for the unscaled max
    /// `g`, by projected subgradient descent with steps `(eta/4)/sqrt(t)`.
    /// The value lies in `[g(x) - eta/8, g(x)]`.
    pub fn smoothed_eval(&self, x: &[f64], inner_tol: f64) -> Result<Smoothed> {
        if self.signs.is_empty() {
            return Err(invalid("no pieces revealed yet"));
        }
        if (self.r - 2.0).abs() < 1e-12 {
            return Ok(self.smoothed_euclidean(x));
        }
        let kw = 2.0 / self.eta;
        let objective = |h: &[f64]| {
            let xh: Vec<f64> = x.iter().zip(h).map(|(a, b)| a + b).collect();
            let (v, i) = self.max_piece(&xh);
            let n = norm_unchecked(h, self.r);
            (v + kw * n * n, i)
        };
        let mut h = vec![0.0; self.d];
        let (f0, i0) = objective(&h);
        let mut best = (f0, i0, h.clone());
        let mut best_at_half = f0;
        let c = self.eta / 4.0;
        for t in 1..=SMOOTHING_STEPS {
            let (_, i) = objective(&h);
            let n = norm_unchecked(&h, self.r);
            let mut g = duality_map_with_norm(&h, self.r, 2.0, n);
            g.iter_mut().for_each(|v| *v *= 2.0 * kw);
            g[i] += self.signs[i];
            let step = c / (t as f64).sqrt();
            h.iter_mut().zip(&g).for_each(|(hi, gi)| *hi -= step * gi);
            let hn = norm_unchecked(&h, self.p);
            if hn > 1.0 {
                h.iter_mut().for_each(|v| *v /= hn);
            }
            let (val, idx) = objective(&h);
            if val < best.0 {
                best = (val, idx, h.clone());
            }
            if t == SMOOTHING_STEPS / 2 {
                best_at_half = best.0;
            }
        }
        let mut grad = vec![0.0; self.d];
        grad[best.1] = self.signs[best.1];
        Ok(Smoothed { value: best.0, grad, stalled: best_at_half - best.0 > inner_tol })
    }

    /// Exact smoothing for the Euclidean kernel. With `v_i = s_i x_i - delta_i`
    /// the optimal shift lowers every piece above a level `t` to `t`, where
    /// `sum_i (v_i - t)_+ = eta/4`; the gradient weights the active pieces by
    /// `(4/eta)(v_i - t)_+`. The shift has norm at most `eta/4`, so the unit
    /// ball constraint is inactive.
    fn smoothed_euclidean(&self, x: &[f64]) -> Smoothed {
        let v: Vec<f64> = self.signs.iter().zip(&self.offsets).enumerate().map(|(i, (s, dl))| s * x[i] - dl).collect();
        let mut sorted = v.clone();
        sorted.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
        let budget = self.eta / 4.0;
        let mut t = sorted[0] - budget;
        let mut cum = 0.0;
        for (k, vk) in sorted.iter().enumerate() {
            cum += vk;
            let cand = (cum - budget) / (k + 1) as f64;
            if k + 1 == sorted.len() || sorted[k + 1] <= cand {
                t = cand;
                break;
            }
        }
        let kw = 2.0 / self.eta;
        let mut grad = vec![0.0; self.d];
        let mut penalty = 0.0;
        for (i, vi) in v.iter().enumerate() {
            let e = (vi - t).max(0.0);
            penalty += e * e;
            grad[i] = self.signs[i] * e / budget;
        }
        Smoothed { value: t + kw * penalty, grad, stalled: false }
    }

    /// First-order oracle for `(L/mu_bar) S(g)`; the instance must be frozen.
    pub fn smoothed_oracle(&self, inner_tol: f64) -> Result<Oracle> {
        if self.signs.len() != self.m {
            return Err(invalid("freeze the instance before smoothing"));
        }
        let inst = Arc::new(self.clone());
        let (a, b) = (inst.clone(), inst.clone());
        let s = self.scale();
        Ok(Oracle::from_objective(FnObjective {
            dim: self.d,
            name: format!("smoothed hard instance, d = {}, M = {}", self.d, self.m),
            value: Box::new(move |x| s * a.smoothed_eval(x, inner_tol).map_or(f64::NAN, |r| r.value)),
            gradient: Box::new(move |x| {
                b.smoothed_eval(x, inner_tol)
                    .map(|r| r.grad.into_iter().map(|g| s * g).collect())
                    .unwrap_or_else(|_| vec![f64::NAN; b.d])
            }),
        }))
    }

    /// Smallest value of `(L/mu_bar) S(g)(x) + (lambda/q)|x|_p^q` found over
    /// `x(alpha) = -sum_i s_i (alpha - delta_i)_+ e_i`: a 200-point scan in
    /// `alpha` refined by golden section. The result is attained, so it
    /// bounds the composite optimum from above.
    pub fn composite_min_estimate(&self, q: f64, inner_tol: f64) -> Result<(f64, Vec<f64>)> {
        if self.signs.len() != self.m {
            return Err(invalid("freeze the instance before estimating its optimum"));
        }
        let point = |alpha: f64| -> Vec<f64> {
            let mut x = vec![0.0; self.d];
            for i in 0..self.m {
                x[i] = -self.signs[i] * (alpha - self.offsets[i]).max(0.0);
            }
            x
        };
        let value = |alpha: f64| -> f64 {
            let x = point(alpha);
            let s = self.smoothed_eval(&x, inner_tol).map_or(f64::INFINITY, |r| r.value);
            self.scale() * s + self.lambda / q * norm_unchecked(&x, self.p).powf(q)
        };
        let hi = self.max_offset() + 4.0 * (self.scale() / self.lambda).powf(1.0 / (q - 1.0));
        let mut best = (0.0, value(0.0));
        for i in 1..=200 {
            let alpha = hi * i as f64 / 200.0;
            let v = value(alpha);
            if v < best.1 {
                best = (alpha, v);
            }
        }
        let h = hi / 200.0;
        let (alpha, v) = crate::verification::golden_section(&value, (best.0 - h).max(0.0), best.0 + h, 1e-10);
        let (alpha, v) = if v < best.1 { (alpha, v) } else { best };
        Ok((v, point(alpha)))
    }

    /// Lemma hypotheses (a), (b), (c) for radius `R` and exponent `q`.
    pub fn hypotheses(&self, r_radius: f64, q: f64) -> Hypotheses {
        let mf = self.m as f64;
        let a = 2.0 * q * self.l * self.lambda_bar / (self.lambda * self.mu_bar) <= r_radius.powf(q - 1.0);
        let b = (mf + 3.0) * self.eta <= 4.0 * r_radius;
        let lb = gap_lower_bound(self.l, self.delta_cap, self.mu_bar, self.lambda, self.lambda_bar, q)
            .unwrap_or(f64::NAN);
        let c = self.l / (4.0 * self.mu_bar) * (mf + 7.0) * self.eta <= lb;
        Hypotheses { a, b, c }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hypotheses {
    pub a: bool,
    pub b: bool,
    pub c: bool,
}

impl Hypotheses {
    pub fn all(&self) -> bool {
        self.a && self.b && self.c
    }
}

/// `(1/(2 q*)) (L Delta / mu_bar)^(q*) (lambda_bar / lambda)^(1/(q-1))`.
pub fn gap_lower_bound(l: f64, delta: f64, mu_bar: f64, lambda: f64, lambda_bar: f64, q: f64) -> Result<f64> {
    if !(q > 1.0 && q.is_finite()) {
        return Err(invalid(format!("q must lie in (1, inf), got {q}")));
    }
    if !(l > 0.0 && delta > 0.0 && mu_bar > 0.0 && lambda > 0.0 && lambda_bar > 0.0) {
        return Err(invalid("gap bound parameters must be positive"));
    }
    let qs = q / (q - 1.0);
    Ok((l * delta / mu_bar).powf(qs) * (lambda_bar / lambda).powf(1.0 / (q - 1.0)) / (2.0 * qs))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    SmoothStrong,
    General,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LowerBound {
    pub count: f64,
    pub regime: Regime,
    pub valid: bool,
    /// Universal constant used in the validity threshold.
    pub constant: f64,
}

/// `C(p, kappa)` from the general-regime bound.
pub fn c_p_kappa(p: f64, kappa: f64) -> f64 {
    let e = kappa * p + kappa - p;
    let inner = ((p - 1.0) / p).powf(kappa * (p - 1.0))
        * 2f64.powf(((p - kappa) * (1.0 - 2.0 * p) + (kappa - 1.0) * p * (2.0 * p - 3.0)) / (p - 1.0));
    inner.powf(1.0 / e)
}

/// Oracle-complexity lower bound. `d` enters through `min(p, ln d)`.
pub fn complexity_lower_bound(p: f64, kappa: f64, l: f64, lambda: f64, epsilon: f64, d: f64, r: f64) -> LowerBound {
    let none = LowerBound { count: 0.0, regime: Regime::None, valid: false, constant: 1.0 };
    if !(l > 0.0 && lambda > 0.0 && epsilon > 0.0 && r > 0.0 && d > 1.0) {
        return none;
    }
    if p == 2.0 && kappa == 2.0 {
        let count = ((l / (2.0 * lambda)).sqrt() - 7.0).floor().max(0.0);
        let valid = epsilon < 2.0 * (2.0 * lambda * l).sqrt() * r * r * (2.0 * lambda / l).min(1.0);
        return LowerBound { count, regime: Regime::SmoothStrong, valid, constant: 1.0 };
    }
    if !(p >= 2.0 && p.is_finite() && kappa >= 1.0 && kappa < p && kappa <= 2.0) {
        return none;
    }
    let mp = p.min(d.ln());
    let e = kappa * p + kappa - p;
    let count = c_p_kappa(p, kappa) / mp.powf(2.0 * (kappa - 1.0))
        * (l.powf(p) / (lambda.powf(kappa) * epsilon.powf(p - kappa))).powf(1.0 / e);
    let lt = if kappa > 1.0 {
        let t1 = mp.powi(3) * (epsilon.powf(kappa) / (l * r)).powf(1.0 / (kappa - 1.0));
        let t2 = mp.powi(5)
            * (epsilon.powf(p) / (l.powf(p + 1.0) * r.powf((p - 1.0) * e / (kappa - 1.0))))
                .powf((kappa - 1.0) / (kappa * p + 1.0 - p));
        t1.max(t2)
    } else {
        0.0
    };
    LowerBound { count, regime: Regime::General, valid: lambda >= lt, constant: 1.0 }
}

/// Gradient oracle backed by a shared resisting adversary. Each gradient
/// call reveals the next piece; after `M` calls the frozen max answers.
/// Values use the pieces revealed so far (zero before the first).
pub fn resisting_oracle(inst: Arc<Mutex<HardInstance>>) -> Oracle {
    let (vi, gi) = (inst.clone(), inst.clone());
    let d = inst.lock().expect("adversary lock").d;
    Oracle::from_objective(FnObjective {
        dim: d,
        name: format!("resisting adversary, d = {d}"),
        value: Box::new(move |x| {
            let h = vi.lock().expect("adversary lock");
            if h.signs.is_empty() {
                0.0
            } else {
                h.frozen_value(x)
            }
        }),
        gradient: Box::new(move |x| {
            let mut h = gi.lock().expect("adversary lock");
            match h.resisting_query(x) {
                Ok((_, g)) => g,
                Err(_) => {
                    let (_, i) = h.max_piece(x);
                    let mut g = vec![0.0; h.d];
                    g[i] = h.scale() * h.signs[i];
                    g
                }
            }
        }),
    })
}

/// Outcome of running AGD+ against a frozen smoothed instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyRun {
    pub m: usize,
    pub eta: f64,
    pub predicted: f64,
    /// Gradient queries spent before the gap first fell to `epsilon`.
    pub measured: Option<usize>,
    pub f_estimate: f64,
}

/// Runs AGD+ on the `p = kappa = q = 2` instance sized by
/// [`smooth_strong_parameters`] (all signs `+1`, `d = 2M + 2`) and counts
/// gradient queries until `F(y) <= F_est + epsilon`.
pub fn empirical_queries(l: f64, lambda: f64, r: f64, epsilon: f64, max_iters: usize) -> Result<ConsistencyRun> {
    let (m, eta) = smooth_strong_parameters(l, lambda, r);
    if m == 0 {
        return Err(invalid("L/lambda too small for a nontrivial instance"));
    }
    let d = 2 * m + 2;
    let mut inst = HardInstance::new(d, m, 2.0, 2.0, l, lambda, eta)?;
    inst.freeze();
    let (f_estimate, _) = inst.composite_min_estimate(2.0, 1e-12)?;
    let oracle = inst.smoothed_oracle(1e-12)?;
    let reg = Regularizer::power_of_norm(NormedSpace::lp(2.0, d)?, lambda, vec![0.0; d])?;
    let sc = Scaffold::for_regularizer(&reg, &vec![0.0; d])?;
    let cfg = SolverConfig { max_iters, ..Default::default() };
    let mut measured = None;
    agd_plus_with(&oracle, &reg, &sc, &vec![0.0; d], &cfg, &mut |v| {
        if v.obj <= f_estimate + epsilon {
            measured = Some(oracle.queries());
            return true;
        }
        false
    })?;
    let predicted = complexity_lower_bound(2.0, 2.0, l, lambda, epsilon, d as f64, r).count;
    Ok(ConsistencyRun { m, eta, predicted, measured, f_estimate })
}

/// Suboptimality implied by a gradient of dual norm `epsilon_grad` at
/// distance `R` from a minimizer.
pub fn reduction_gap_from_gradient(epsilon_grad: f64, r: f64) -> f64 {
    epsilon_grad * r
}

/// Parameters `(M, eta)` for the `p = kappa = 2` case of the lower bound:
/// `M = floor(sqrt(L/(2 lambda)) - 7)`, `eta = min(lambda R/(2L), 4R/(M+3))`.
pub fn smooth_strong_parameters(l: f64, lambda: f64, r: f64) -> (usize, f64) {
    let m = ((l / (2.0 * lambda)).sqrt() - 7.0).floor().max(0.0) as usize;
    let eta = (lambda * r / (2.0 * l)).min(4.0 * r / (m as f64 + 3.0));
    (m, eta)
}
