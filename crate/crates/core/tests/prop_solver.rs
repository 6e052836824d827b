use compcomp::apps::{build_elastic_net, ProblemSpec};
use compcomp::linalg::{euclid, Matrix};
use compcomp::regularizers::{Regularizer, Scaffold};
use compcomp::oracles::make_least_squares;
use compcomp::solver::{agd_plus, SolverConfig, Trace};
use compcomp::verification::{reference_solve, replay_certificate};
use proptest::prelude::*;

fn system(n: usize, d: usize) -> impl Strategy<Value = (Matrix, Vec<f64>)> {
    (prop::collection::vec(-1.0f64..1.0, n * d), prop::collection::vec(-1.0f64..1.0, n))
        .prop_map(move |(a, b)| (Matrix::new(n, d, a).unwrap(), b))
}

fn ridge(a: &Matrix, b: &[f64], l2: f64) -> ProblemSpec {
    build_elastic_net(a, b, 0.0, l2).unwrap()
}

fn run(spec: &ProblemSpec, iters: usize) -> Trace {
    let cfg = SolverConfig { max_iters: iters, keep_iterates: true, ..Default::default() };
    spec.solve(&cfg).unwrap().trace
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn iterate_is_weighted_average((a, b) in system(12, 5), l1 in 0.0f64..0.3, l2 in 0.01f64..1.0) {
        let spec = build_elastic_net(&a, &b, l1, l2).unwrap();
        let t = run(&spec, 60);
        let mut acc = vec![0.0; 5];
        for (rec, (v, y)) in t.records.iter().zip(t.v_iterates.iter().zip(&t.y_iterates)) {
            acc.iter_mut().zip(v).for_each(|(s, vi)| *s += rec.a_k * vi);
            let avg: Vec<f64> = acc.iter().map(|s| s / rec.a_cum).collect();
            let err = euclid(&avg.iter().zip(y).map(|(u, w)| u - w).collect::<Vec<_>>());
            prop_assert!(err <= 1e-10 * (1.0 + euclid(y)), "k = {}: {err:e}", rec.k);
        }
    }

    #[test]
    fn gap_below_envelope((a, b) in system(15, 6), l2 in 0.01f64..1.0) {
        let spec = ridge(&a, &b, l2);
        let r = reference_solve(&spec, 1e-10).unwrap();
        let replay = replay_certificate(&run(&spec, 100), &spec, &r).unwrap();
        prop_assert!(replay.passed, "{}", replay.to_csv());
        prop_assert!(replay.rows.windows(2).all(|w| w[1].envelope <= w[0].envelope * (1.0 + 1e-12)));
    }

    #[test]
    fn strongly_convex_growth((a, b) in system(15, 6), l2 in 0.01f64..1.0) {
        let spec = ridge(&a, &b, l2);
        let t = run(&spec, 80);
        let m_max = t.records.iter().map(|r| r.m_k).fold(0.0, f64::max);
        let factor = 1.0 + (t.header.lambda_eff / m_max).sqrt();
        for w in t.records.windows(2) {
            prop_assert!(w[1].a_cum / w[0].a_cum >= factor * (1.0 - 1e-12));
        }
    }

    #[test]
    fn distance_bound((a, b) in system(15, 6), l2 in 0.01f64..1.0) {
        let spec = ridge(&a, &b, l2);
        let r = reference_solve(&spec, 1e-12).unwrap();
        let t = run(&spec, 60);
        for (rec, y) in t.records.iter().zip(&t.y_iterates) {
            let dist = euclid(&y.iter().zip(&r.x_ref).map(|(u, v)| u - v).collect::<Vec<_>>());
            let bound = 2.0 / l2 * (rec.obj - r.f_ref).max(0.0);
            prop_assert!(dist * dist <= bound + 1e-12, "k = {}: {} > {bound}", rec.k, dist * dist);
        }
    }

    #[test]
    fn doubling_budget((a, b) in system(10, 4), m_init in 1e-4f64..1.0) {
        let spec = ridge(&a, &b, 0.1);
        let l_true = spec.oracle.regularity().unwrap().l;
        let cfg = SolverConfig { max_iters: 50, m_init, ..Default::default() };
        let t = spec.solve(&cfg).unwrap().trace;
        let k = t.last().k as f64;
        let budget = (l_true / m_init).log2().ceil().max(0.0) + k;
        prop_assert!(t.doublings() as f64 <= budget);
    }

    #[test]
    fn runs_are_deterministic((a, b) in system(10, 4), l1 in 0.0f64..0.3, l2 in 0.0f64..1.0) {
        let spec = build_elastic_net(&a, &b, l1, l2).unwrap();
        let strip = |t: Trace| t.records.into_iter().map(|mut r| { r.elapsed_ms = 0.0; r }).collect::<Vec<_>>();
        let (t1, t2) = (run(&spec, 40), run(&spec, 40));
        prop_assert_eq!(&t1.y_iterates, &t2.y_iterates);
        prop_assert_eq!(strip(t1), strip(t2));
    }
}

#[test]
fn scaffold_branch_quadratic_growth() {
    let d = 30;
    let a = Matrix::from_rows(
        &(0..d).map(|i| (0..d).map(|j| if i == j { 1.0 / (1.0 + i as f64) } else { 0.0 }).collect()).collect::<Vec<_>>(),
    )
    .unwrap();
    let oracle = make_least_squares(&a, &vec![1.0; d]).unwrap();
    let reg = Regularizer::l1_only(d, 0.0).unwrap();
    let sc = Scaffold::for_regularizer(&reg, &vec![0.0; d]).unwrap();
    let cfg = SolverConfig { max_iters: 400, ..Default::default() };
    let t = agd_plus(&oracle, &reg, &sc, &vec![0.0; d], &cfg).unwrap().trace;
    let pts: Vec<(f64, f64)> =
        t.records.iter().filter(|r| r.k >= 20).map(|r| ((r.k as f64).ln(), r.a_cum.ln())).collect();
    let n = pts.len() as f64;
    let (mx, my) = (pts.iter().map(|p| p.0).sum::<f64>() / n, pts.iter().map(|p| p.1).sum::<f64>() / n);
    let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    assert!(slope >= 1.9, "slope {slope}");
}
