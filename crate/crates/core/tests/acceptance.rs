//! End-to-end acceptance checks. Each test prints one PASS/FAIL line.

mod common;

use common::*;
use compcomp::apps::{build_bridge, build_dantzig, build_elastic_net, build_schatten_problem, tradeoff_check, LinearMap};
use compcomp::gradnorm::{minimize_grad_norm, GradNormConfig};
use compcomp::hardinstance::{complexity_lower_bound, gap_lower_bound, resisting_oracle, HardInstance};
use compcomp::linalg::{inf_norm, Matrix};
use compcomp::oracles::make_least_squares;
use compcomp::regularizers::{composite_prox, prox_objective, Regularizer, Scaffold};
use compcomp::solver::{agd_plus, SolverConfig, Trace};
use compcomp::spaces::NormedSpace;
use compcomp::verification::{reference_minimize, reference_solve, replay_certificate};
use rand::Rng;
use std::sync::{Arc, Mutex};
use std::time::Instant;

fn iters_to(trace: &Trace, f_ref: f64, eps: f64) -> Option<usize> {
    trace.records.iter().find(|r| r.obj - f_ref <= eps).map(|r| r.k)
}

#[test]
fn criterion_01_linear_rate() {
    let t0 = Instant::now();
    let p = 1.5;
    let lam = 0.01 / (p - 1.0);
    let (a, b) = gaussian_problem(50, 50, 11);
    let spec = build_bridge(&a, &b, lam, p).unwrap();
    let r = reference_solve(&spec, 1e-9).unwrap();
    let eps: f64 = 1e-8;
    let budget = (25.0 * 100f64.sqrt() * (1.0 / eps).ln()).floor() as usize;
    let cfg = SolverConfig { epsilon: 1e-10, max_iters: budget, target_obj: Some(r.f_ref + eps), ..Default::default() };
    let sol = spec.solve(&cfg).unwrap();
    let last = sol.trace.last();
    let cond = last.m_k / spec.reg.modulus();
    let n = sol.trace.records.len();
    let tail = &sol.trace.records[n / 5..];
    let ks: Vec<f64> = tail.iter().map(|rec| rec.k as f64).collect();
    let lg: Vec<f64> = tail.iter().map(|rec| (rec.obj - r.f_ref).max(1e-300).ln()).collect();
    let (_, r2) = fit(&ks, &lg);
    let secs = t0.elapsed().as_secs_f64();
    let ok = last.obj - r.f_ref <= eps && last.k <= budget && r2 >= 0.98 && secs < 10.0;
    verdict(1, ok, &format!("iters={} budget={budget} M/mu={cond:.1} R2={r2:.4} time={secs:.2}s", last.k));
    assert!(ok);
}

#[test]
fn criterion_02_uniformly_convex_exponent() {
    let t0 = Instant::now();
    let (a, b) = log_uniform_problem(20, -8.0);
    let spec = build_bridge(&a, &b, 1e-9, 4.0).unwrap();
    // f* lies in [0, (1e-9/4)|1|_4^4]; measuring against 0 overstates the gap.
    let eps_grid = [1e-2, 1e-3, 1e-4];
    let mut iters = Vec::new();
    for &eps in &eps_grid {
        let cfg = SolverConfig { epsilon: eps, max_iters: 1_000_000, target_obj: Some(eps), ..Default::default() };
        let sol = spec.solve(&cfg).unwrap();
        assert!(sol.trace.last().obj <= eps);
        iters.push(sol.trace.last().k as f64);
    }
    let xs: Vec<f64> = eps_grid.iter().map(|e| (1.0 / e).ln()).collect();
    let ys: Vec<f64> = iters.iter().map(|k| k.ln()).collect();
    let (slope, _) = fit(&xs, &ys);
    let secs = t0.elapsed().as_secs_f64();
    let ok = (slope - 2.0 / 3.0).abs() <= 0.15 && secs < 30.0;
    verdict(2, ok, &format!("iters={iters:?} slope={slope:.3} target=0.667+-0.15 time={secs:.2}s"));
    assert!(ok);
}

#[test]
fn criterion_03_scaffold_only_rate() {
    let (a, b) = log_uniform_problem(200, -9.0);
    let spec = build_elastic_net(&a, &b, 1e-10, 0.0).unwrap();
    let r = reference_solve(&spec, 1e-9).unwrap();
    let cfg = SolverConfig { epsilon: 1e-14, max_iters: 2000, ..Default::default() };
    let sol = spec.solve(&cfg).unwrap();
    let window = &sol.trace.records[50..=2000];
    let ks: Vec<f64> = window.iter().map(|rec| (rec.k as f64).ln()).collect();
    let gs: Vec<f64> = window.iter().map(|rec| (rec.obj - r.f_ref).ln()).collect();
    let (slope, _) = fit(&ks, &gs);
    let ok = (slope + 2.0).abs() <= 0.3;
    verdict(3, ok, &format!("log-log slope={slope:.3} over k in [50, 2000] target=-2+-0.3"));
    assert!(ok);
}

#[test]
fn criterion_04_gradient_norm_scaling() {
    let d = 100;
    let (a, b) = log_uniform_problem(d, -6.0);
    let oracle = make_least_squares(&a, &b).unwrap();
    let space = NormedSpace::lp(1.2, d).unwrap();
    let eps_grid = [1e-1, 1e-2, 1e-3];
    let mut queries = Vec::new();
    let mut all_small = true;
    for &eps in &eps_grid {
        let (y, rep) = minimize_grad_norm(&oracle, &space, &vec![0.0; d], &GradNormConfig::new(eps)).unwrap();
        let measured = space.dual_norm(&oracle.grad(&y)).unwrap();
        all_small &= rep.converged && measured <= eps;
        queries.push(rep.grad_queries as f64);
    }
    let xs: Vec<f64> = eps_grid.iter().map(|e| e.ln()).collect();
    let ys: Vec<f64> = queries.iter().map(|q| q.ln()).collect();
    let (slope, _) = fit(&xs, &ys);
    let ok = (slope + 0.5).abs() <= 0.15 && all_small;
    verdict(4, ok, &format!("queries={queries:?} slope={slope:.3} target=-0.5+-0.15 grad<=eps:{all_small}"));
    assert!(ok);
}

fn random_prox_case(kind: usize, rng: &mut rand_chacha::ChaCha8Rng) -> (Regularizer, Scaffold, Vec<f64>, f64, f64) {
    let a = rng.gen_range(0.5..2.0);
    let m0 = rng.gen_range(0.5..2.0);
    let (reg, d) = match kind {
        0 => {
            let d = rng.gen_range(1..=3);
            let p = rng.gen_range(1.2..4.0);
            let c: Vec<f64> = (0..d).map(|_| rng.gen_range(-0.5..0.5)).collect();
            (Regularizer::power_of_norm(NormedSpace::lp(p, d).unwrap(), rng.gen_range(0.1..2.0), c).unwrap(), d)
        }
        1 => {
            let d = rng.gen_range(1..=3);
            (Regularizer::elastic_net(d, rng.gen_range(0.05..1.0), rng.gen_range(0.1..2.0)).unwrap(), d)
        }
        2 => {
            let d = rng.gen_range(1..=3);
            (Regularizer::l1_only(d, rng.gen_range(0.05..1.0)).unwrap(), d)
        }
        _ => {
            let p = rng.gen_range(1.2..4.0);
            let space = NormedSpace::schatten(p, 2, 2).unwrap();
            (Regularizer::schatten_power(space, rng.gen_range(0.1..2.0), vec![0.0; 4]).unwrap(), 4)
        }
    };
    let sc = Scaffold::for_regularizer(&reg, &reg.center.clone()).unwrap();
    let z: Vec<f64> = (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect();
    (reg, sc, z, a, m0)
}

#[test]
fn criterion_05_prox_exactness() {
    let t0 = Instant::now();
    let mut r = rng(5);
    let (mut worst_pt, mut worst_obj) = (0.0f64, 0.0f64);
    for case in 0..200 {
        let (reg, sc, z, a, m0) = random_prox_case(case % 4, &mut r);
        let u = composite_prox(&reg, &sc, &z, a, m0).unwrap();
        let obj = |v: &[f64]| prox_objective(&reg, &sc, &z, a, m0, v).unwrap();
        let radius = 4.0 * (1.0 + inf_norm(&z) / m0);
        let (u_ref, f_ref) = reference_minimize(&obj, &reg.center, radius);
        let pt = u.iter().zip(&u_ref).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        worst_pt = worst_pt.max(pt);
        worst_obj = worst_obj.max((obj(&u) - f_ref).abs());
    }
    let secs = t0.elapsed().as_secs_f64();
    let ok = worst_pt <= 1e-6 && worst_obj <= 1e-9 && secs < 5.0;
    verdict(5, ok, &format!("200 cases, worst point err={worst_pt:.2e} worst obj err={worst_obj:.2e} time={secs:.2}s"));
    assert!(ok);
}

#[test]
fn criterion_06_duality_map_identity() {
    let mut r = rng(6);
    let (mut worst_inv, mut worst_fd, mut worst_pair) = (0.0f64, 0.0f64, 0.0f64);
    for case in 0..1000 {
        let space = if case % 4 == 3 {
            NormedSpace::schatten(r.gen_range(1.1..6.0), 2, 3).unwrap()
        } else {
            NormedSpace::lp(r.gen_range(1.1..6.0), r.gen_range(1..=8)).unwrap()
        };
        let q = r.gen_range(1.1..6.0);
        let x: Vec<f64> = (0..space.dim()).map(|_| gauss(&mut r)).collect();
        let j = space.duality_map(&x, q).unwrap();
        let back = space.inverse_duality_map(&j, q).unwrap();
        let xn = space.norm(&x).unwrap();
        let inv = x.iter().zip(&back).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / inf_norm(&x);
        let pair: f64 = x.iter().zip(&j).map(|(a, b)| a * b).sum();
        worst_inv = worst_inv.max(inv);
        worst_pair = worst_pair.max((pair - xn.powf(q)).abs() / xn.powf(q));
        let h = 1e-6 * (1.0 + inf_norm(&x));
        let phi = |v: &[f64]| space.norm(v).unwrap().powf(q) / q;
        for i in 0..x.len() {
            let (mut xp, mut xm) = (x.clone(), x.clone());
            xp[i] += h;
            xm[i] -= h;
            let fd = (phi(&xp) - phi(&xm)) / (2.0 * h);
            worst_fd = worst_fd.max((fd - j[i]).abs() / j[i].abs().max(fd.abs()).max(1.0));
        }
    }
    let ok = worst_inv <= 1e-10 && worst_pair <= 1e-10 && worst_fd <= 1e-5;
    verdict(6, ok, &format!("1000 cases, inverse rel err={worst_inv:.2e} pairing rel err={worst_pair:.2e} fd err={worst_fd:.2e}"));
    assert!(ok);
}

#[test]
fn criterion_07_certificate_replay() {
    let (a1, b1) = gaussian_problem(20, 8, 71);
    let (a2, b2) = gaussian_problem(10, 5, 72);
    let sensing: Vec<Matrix> = (0..8)
        .map(|s| {
            let (m, _) = gaussian_problem(2, 3, 700 + s);
            m
        })
        .collect();
    let (_, b3) = gaussian_problem(8, 1, 73);
    let specs = [
        build_elastic_net(&a1, &b1, 0.1, 0.5).unwrap(),
        build_bridge(&a2, &b2, 0.5, 1.5).unwrap(),
        build_schatten_problem(&LinearMap::Sensing(sensing), &b3, 0.3, 2.0).unwrap(),
    ];
    let cfg = SolverConfig { max_iters: 100, ..Default::default() };
    let mut all_pass = true;
    let mut control_fires = true;
    for spec in &specs {
        let r = reference_solve(spec, 1e-10).unwrap();
        let sol = spec.solve(&cfg).unwrap();
        let replay = replay_certificate(&sol.trace, spec, &r).unwrap();
        all_pass &= replay.passed && replay.check().is_ok();
        let mut bad = sol.trace.clone();
        bad.records.iter_mut().skip(1).for_each(|rec| rec.a_cum *= 100.0);
        let replay_bad = replay_certificate(&bad, spec, &r).unwrap();
        control_fires &= !replay_bad.passed && replay_bad.check().is_err();
    }
    let ok = all_pass && control_fires;
    verdict(7, ok, &format!("3 instances x 101 rows pass={all_pass}; inflated-A_k control fires={control_fires}"));
    assert!(ok);
}

#[test]
fn criterion_08_resisting_oracle() {
    let (d, l, lam, eta) = (16, 1.0, 1.0 / 240.0, 0.01);
    let mut r = rng(8);
    let mut guarantee = true;
    for &m in &[4usize, 8, 16] {
        for source in 0..2 {
            let inst = Arc::new(Mutex::new(HardInstance::new(d, m, 2.0, 2.0, l, lam, eta).unwrap()));
            if source == 0 {
                for _ in 0..m {
                    let x: Vec<f64> = (0..d).map(|_| 0.1 * gauss(&mut r)).collect();
                    inst.lock().unwrap().resisting_query(&x).unwrap();
                }
            } else {
                let oracle = resisting_oracle(inst.clone());
                let reg = Regularizer::power_of_norm(NormedSpace::lp(2.0, d).unwrap(), lam, vec![0.0; d]).unwrap();
                let sc = Scaffold::for_regularizer(&reg, &vec![0.0; d]).unwrap();
                let cfg = SolverConfig { max_iters: 3 * m, ..Default::default() };
                agd_plus(&oracle, &reg, &sc, &vec![0.0; d], &cfg).unwrap();
            }
            let mut h = inst.lock().unwrap().clone();
            let revealed = h.signs.len();
            let bound = h.scale() * (-eta - (revealed.max(1) - 1) as f64 * eta / 4.0);
            guarantee &= h.replay_min() >= bound;
            h.freeze();
            for x in &h.queries {
                guarantee &= h.scale() * h.smoothed_eval(x, 1e-9).unwrap().value >= bound;
            }
        }
    }

    let m = 8;
    let r_rad = 4.8;
    let mut inst = HardInstance::new(d, m, 2.0, 2.0, l, lam, eta).unwrap();
    let feasible = inst.hypotheses(r_rad, 2.0).all();
    for t in 0..m {
        let mut x = vec![0.0; d];
        x[t] = 0.05;
        inst.resisting_query(&x).unwrap();
    }
    inst.freeze();
    let (opt, _) = inst.composite_min_estimate(2.0, 1e-12).unwrap();
    let lb = gap_lower_bound(l, inst.delta_cap, inst.mu_bar, lam, inst.lambda_bar, 2.0).unwrap();
    let threshold = -lb + eta * inst.scale() + 1e-3;
    let ok = guarantee && feasible && opt <= threshold;
    verdict(8, ok, &format!("replay guarantee={guarantee}; Lemma set feasible={feasible}, optimum={opt:.3e} <= {threshold:.3e}"));
    assert!(ok);
}

#[test]
fn criterion_09_theorem4_calculator() {
    let base = complexity_lower_bound(2.0, 2.0, 200.0, 1.0, 1e-6, 16.0, 1.0).count;
    let mut r = rng(9);
    let mut homogeneous = true;
    for _ in 0..50 {
        let l = 10f64.powf(r.gen_range(0.0..4.0));
        let lam = 10f64.powf(r.gen_range(-3.0..0.0));
        let c = 10f64.powf(r.gen_range(-3.0..3.0));
        let a = complexity_lower_bound(2.0, 2.0, l, lam, 1e-9, 16.0, 1.0).count;
        let b = complexity_lower_bound(2.0, 2.0, c * l, c * lam, 1e-9, 16.0, 1.0).count;
        homogeneous &= a == b;
    }
    let ok = base == 3.0 && homogeneous;
    verdict(9, ok, &format!("count(L=200, lambda=1)={base} homogeneity over 50 sets={homogeneous}"));
    assert!(ok);
}

#[test]
fn criterion_10_tradeoff_identities() {
    let mut worst_bridge = 0.0f64;
    let mut cases = vec![(Matrix::identity(2), vec![2.0, 0.0], 1.0, 1.5)];
    for (i, &p) in [1.5, 3.0, 1.2].iter().enumerate() {
        let (a, b) = gaussian_problem(8, 3 + i, 100 + i as u64);
        cases.push((a, b, 0.3, p));
    }
    for (a, b, lam, p) in &cases {
        let spec = build_bridge(a, b, *lam, *p).unwrap();
        let r = reference_solve(&spec, 1e-9).unwrap();
        worst_bridge = worst_bridge.max(tradeoff_check(&spec, &r.x_ref).unwrap());
    }
    let mut dantzig_min = f64::INFINITY;
    for (i, &eps) in [0.5, 0.3].iter().enumerate() {
        let (a, b) = gaussian_problem(10, 4 + i, 110 + i as u64);
        let spec = build_dantzig(&a, &b, 0.2, eps).unwrap();
        let r = reference_solve(&spec, 1e-9).unwrap();
        dantzig_min = dantzig_min.min(tradeoff_check(&spec, &r.x_ref).unwrap());
    }
    let ok = worst_bridge <= 1e-5 && dantzig_min >= 0.0;
    verdict(10, ok, &format!("worst bridge residual={worst_bridge:.2e}; min Dantzig slack={dantzig_min:.3e}"));
    assert!(ok);
}

#[test]
fn criterion_11_dimension_independence() {
    let p = 1.5;
    let lam = 0.01 / (p - 1.0);
    let mut iters = Vec::new();
    for &d in &[50usize, 200, 800] {
        let (a, b) = gaussian_problem(d, d, 7);
        let spec = build_bridge(&a, &b, lam, p).unwrap();
        let r = reference_solve(&spec, 1e-9).unwrap();
        let cfg = SolverConfig { epsilon: 1e-10, max_iters: 5000, target_obj: Some(r.f_ref + 1e-8), ..Default::default() };
        let sol = spec.solve(&cfg).unwrap();
        iters.push(iters_to(&sol.trace, r.f_ref, 1e-8).expect("target reached") as f64);
    }
    let lo = iters.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = iters.iter().cloned().fold(0.0, f64::max);
    let spread = (hi - lo) / lo;
    let ok = spread < 0.2;
    verdict(11, ok, &format!("iterations for d=50,200,800: {iters:?} spread={:.1}%", 100.0 * spread));
    assert!(ok);
}

#[test]
fn criterion_12_selfcheck() {
    let t = Instant::now();
    let out = std::process::Command::new(env!("CARGO_BIN_EXE_compcomp")).arg("selfcheck").output().unwrap();
    let secs = t.elapsed().as_secs_f64();
    let code = out.status.code();
    let ok = code == Some(0) && secs <= 120.0;
    print!("{}", String::from_utf8_lossy(&out.stdout));
    verdict(12, ok, &format!("exit={code:?} time={secs:.2}s limit=120s"));
    assert!(ok);
}
