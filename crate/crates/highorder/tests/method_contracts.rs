//! Cross-method contracts: determinism, monotone basic methods, the
//! accelerated gap bound, and shifted-Hessian consistency.

use highorder::linalg::Vector;
use highorder::methods::{
    fstar_prerun, nu_theoretical, run_method, CompositeOracle, MethodConfig, MethodKind,
    ProxTerm, RunStatus,
};
use highorder::problems::{synth_logistic, Lipschitz, Oracle, ProblemOracle};

fn strongly_convex_instance() -> ProblemOracle {
    let data = synth_logistic(120, 8, 33);
    ProblemOracle::logistic(
        data,
        1e-3,
        Lipschitz {
            l1: Some(0.26),
            l2: Some(0.1),
            l3: Some(0.1),
        },
    )
    .unwrap()
}

#[test]
fn all_methods_run_deterministically() {
    let oracle = strongly_convex_instance();
    let x0 = Vector::from_element(8, 3.0);
    let configs = [
        MethodConfig::new(MethodKind::Gd, 1).with_iters(10),
        MethodConfig::new(MethodKind::Crn, 2).with_iters(8),
        MethodConfig::new(MethodKind::Btm, 3).with_iters(5),
        MethodConfig::new(MethodKind::Natm, 2).with_iters(8),
        MethodConfig::new(MethodKind::Nata, 2).with_iters(8),
        MethodConfig::new(MethodKind::NearOptimal, 2).with_iters(6),
        MethodConfig::new(MethodKind::Ppss, 2).with_iters(5),
        MethodConfig::new(MethodKind::Optimal, 2).with_iters(5),
    ];
    for cfg in &configs {
        let a = run_method(&oracle, &oracle.lipschitz, &x0, cfg).unwrap();
        let b = run_method(&oracle, &oracle.lipschitz, &x0, cfg).unwrap();
        assert!(
            a.content_eq(&b),
            "{:?} not deterministic",
            cfg.method
        );
        assert!(
            matches!(a.status, RunStatus::Budget | RunStatus::Converged),
            "{:?} failed: {:?}",
            cfg.method,
            a.status
        );
        assert!(a.records.len() >= 2);
        // Every method makes progress from the far start.
        assert!(a.final_f() < a.records[0].f);
        // Trace stream invariants.
        for (i, pair) in a.records.windows(2).enumerate() {
            assert!(pair[1].iter > pair[0].iter, "{:?} indices at {i}", cfg.method);
            assert!(
                pair[1].wall_ms >= pair[0].wall_ms,
                "{:?} wall clock decreased at {i}",
                cfg.method
            );
        }
        assert_eq!(a.records.len(), a.iterates.len());
    }
}

#[test]
fn natm_gap_bound_holds_with_trusted_fstar() {
    let oracle = strongly_convex_instance();
    let x0 = Vector::from_element(8, 3.0);
    let (fstar, xstar, _) = fstar_prerun(&oracle, &x0, 0.1, 400, 1e-13).unwrap();
    let cfg = MethodConfig::new(MethodKind::Natm, 2).with_iters(20);
    let trace = run_method(&oracle, &oracle.lipschitz, &x0, &cfg).unwrap();
    let r = (&xstar - &x0).norm();
    let nu = nu_theoretical(2);
    for rec in trace.records.iter().skip(1) {
        let a_t = rec.a_big.unwrap();
        let bound = r.powi(3) / (3.0 * a_t);
        let gap = rec.f - fstar;
        assert!(
            gap <= bound * (1.0 + 1e-10) + 1e-14,
            "iter {}: gap {gap} above bound {bound}",
            rec.iter
        );
        // The schedule is the theoretical one.
        let expected_a = nu / 0.1 * (rec.iter as f64).powi(3);
        assert!((a_t - expected_a).abs() <= 1e-12 * expected_a.max(1.0));
    }
}

#[test]
fn shifted_hessian_matches_finite_differences() {
    // grad^2 g_lambda = grad^2 f + (1/lambda) I for the optimal method's
    // inner objective.
    let oracle = strongly_convex_instance();
    let lambda = 0.37;
    let y = Vector::from_element(8, 0.5);
    let shifted = CompositeOracle::new(&oracle, ProxTerm::new(y.clone(), 0.5 / lambda, 2));
    let x = Vector::from_element(8, 1.25);
    let base_h = oracle.hessian(&x).unwrap();
    let shifted_h = shifted.hessian(&x).unwrap();
    for i in 0..8 {
        for j in 0..8 {
            let expected = base_h[(i, j)] + if i == j { 1.0 / lambda } else { 0.0 };
            assert!((shifted_h[(i, j)] - expected).abs() <= 1e-12);
        }
    }
    // And against a central difference of the shifted gradient.
    let h = Vector::from_element(8, 0.3);
    let eps = 1e-6;
    let gp = shifted.gradient(&(&x + &h * eps)).unwrap();
    let gm = shifted.gradient(&(&x - &h * eps)).unwrap();
    let fd = (gp - gm) / (2.0 * eps);
    let action = &shifted_h * &h;
    assert!((&fd - &action).norm() <= 1e-5 * action.norm().max(1.0));
}

#[test]
fn basic_methods_monotone_descent_lemma() {
    // gd with M1 >= L1 decreases f at every step with a nonzero gradient.
    let oracle = strongly_convex_instance();
    let x0 = Vector::from_element(8, 2.0);
    let cfg = MethodConfig::new(MethodKind::Gd, 1).with_iters(40);
    let trace = run_method(&oracle, &oracle.lipschitz, &x0, &cfg).unwrap();
    let f = trace.f_series();
    for w in f.windows(2) {
        assert!(w[1] < w[0]);
    }
}
