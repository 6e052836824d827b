#![allow(dead_code)]

use compcomp::linalg::{spectral_norm, Matrix};
use compcomp::oracles::{FnObjective, Oracle};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    let u: f64 = rng.gen_range(1e-300..1.0);
    let v: f64 = rng.gen();
    (-2.0 * u.ln()).sqrt() * (2.0 * std::f64::consts::PI * v).cos()
}

/// Gaussian design scaled to unit spectral norm, Gaussian response.
pub fn gaussian_problem(n: usize, d: usize, seed: u64) -> (Matrix, Vec<f64>) {
    let mut r = rng(seed);
    let data: Vec<f64> = (0..n * d).map(|_| gauss(&mut r)).collect();
    let mut a = Matrix::new(n, d, data).unwrap();
    let s = spectral_norm(&a);
    a.data.iter_mut().for_each(|v| *v /= s);
    let b = (0..n).map(|_| gauss(&mut r)).collect();
    (a, b)
}

/// Diagonal design whose Hessian eigenvalues are log-uniform on
/// `[10^lo_exp, 1]`, with minimizer of the fit term at the all-ones vector.
/// Every spectral scale carries the same share of the initial gap, which
/// keeps sublinear worst-case rates visible over long windows.
pub fn log_uniform_problem(d: usize, lo_exp: f64) -> (Matrix, Vec<f64>) {
    let root: Vec<f64> = (0..d).map(|j| 10f64.powf(0.5 * lo_exp * j as f64 / (d - 1) as f64)).collect();
    (Matrix::diag(&root), root)
}

pub fn fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, sxy * sxy / (sxx * syy))
}

/// Nesterov's chain quadratic `(L/8)(x_1^2 + sum (x_i - x_{i+1})^2 + x_d^2) - (L/4) x_1`.
pub fn chain_oracle(d: usize, l: f64) -> Oracle {
    let value = move |x: &[f64]| {
        let mut s = x[0] * x[0] + x[d - 1] * x[d - 1];
        for i in 0..d - 1 {
            s += (x[i] - x[i + 1]).powi(2);
        }
        l / 8.0 * s - l / 4.0 * x[0]
    };
    let grad = move |x: &[f64]| {
        let mut g: Vec<f64> = (0..d)
            .map(|i| {
                let left = if i > 0 { x[i - 1] } else { 0.0 };
                let right = if i + 1 < d { x[i + 1] } else { 0.0 };
                l / 4.0 * (2.0 * x[i] - left - right)
            })
            .collect();
        g[0] -= l / 4.0;
        g
    };
    Oracle::from_objective(FnObjective { dim: d, name: "chain".into(), value: Box::new(value), gradient: Box::new(grad) })
}

pub fn verdict(n: usize, ok: bool, detail: &str) {
    println!("criterion {n:>2}: {} {detail}", if ok { "PASS" } else { "FAIL" });
}
