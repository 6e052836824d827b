use compcomp::apps::{build_bridge, build_dantzig, build_elastic_net, build_lp_regression, tradeoff_check, ProblemSpec};
use compcomp::linalg::Matrix;
use compcomp::oracles::finite_diff_check;
use compcomp::solver::SolverConfig;
use compcomp::verification::reference_solve;
use proptest::prelude::*;

fn system() -> impl Strategy<Value = (Matrix, Vec<f64>)> {
    (4usize..10, 3usize..7).prop_flat_map(|(n, d)| {
        (prop::collection::vec(-1.0f64..1.0, n * d), prop::collection::vec(-1.0f64..1.0, n))
            .prop_map(move |(a, b)| (Matrix::new(n, d, a).unwrap(), b))
    })
}

fn builders(a: &Matrix, b: &[f64], lambda: f64, p: f64) -> Vec<ProblemSpec> {
    vec![
        build_elastic_net(a, b, lambda, lambda).unwrap(),
        build_elastic_net(a, b, lambda, 0.0).unwrap(),
        build_bridge(a, b, lambda, p).unwrap(),
        build_bridge(a, b, lambda, p + 1.5).unwrap(),
        build_dantzig(a, b, lambda, 0.1).unwrap(),
        build_lp_regression(a, b, p.max(1.2)).unwrap(),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn builders_pass_sampling_checks(
        (a, b) in system(),
        lambda in 0.05f64..1.0,
        p in 1.2f64..2.0,
        pts in prop::collection::vec(-1.0f64..1.0, 30),
        t in 0.05f64..0.95,
    ) {
        for spec in builders(&a, &b, lambda, p) {
            let d = spec.dim();
            let (u, v) = (&pts[..d], &pts[15..15 + d]);
            prop_assert!(finite_diff_check(&spec.oracle, u, None) <= 1e-5, "{:?} gradient", spec.kind);
            let reg = &spec.reg;
            let mid: Vec<f64> = u.iter().zip(v).map(|(x, y)| t * x + (1.0 - t) * y).collect();
            let diff: Vec<f64> = u.iter().zip(v).map(|(x, y)| x - y).collect();
            let gap = t * reg.eval(u).unwrap() + (1.0 - t) * reg.eval(v).unwrap() - reg.eval(&mid).unwrap();
            let floor = reg.modulus() / reg.q() * t * (1.0 - t) * reg.space.norm(&diff).unwrap().powf(reg.q());
            prop_assert!(gap >= floor - 1e-10 * (1.0 + gap.abs()), "{:?} uniform convexity", spec.kind);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn solver_matches_reference((a, b) in system(), lambda in 0.05f64..1.0, p in 1.3f64..3.0, l2 in 0.0f64..0.5) {
        for spec in [build_bridge(&a, &b, lambda, p).unwrap(), build_elastic_net(&a, &b, lambda, l2).unwrap()] {
            let r = reference_solve(&spec, 1e-8).unwrap();
            let cfg = SolverConfig { max_iters: 20_000, target_obj: Some(r.f_ref + 1e-7), ..Default::default() };
            let sol = spec.solve(&cfg).unwrap();
            let gap = sol.trace.last().obj - r.f_ref;
            prop_assert!(gap.abs() <= 1e-5, "{:?}: gap {gap:e}", spec.kind);
        }
    }

    #[test]
    fn dantzig_tradeoff_at_reference((a, b) in system(), lambda in 0.05f64..0.5, eps in 0.05f64..0.3) {
        let spec = build_dantzig(&a, &b, lambda, eps).unwrap();
        let r = reference_solve(&spec, 1e-9).unwrap();
        prop_assert!(tradeoff_check(&spec, &r.x_ref).unwrap() >= 0.0);
    }
}
