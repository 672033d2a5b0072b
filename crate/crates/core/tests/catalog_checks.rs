//! Catalog-wide verification: finite-difference gradients, optimum
//! consistency, unbiased stochastic oracles, and the declared geometric
//! inequalities checked on sample grids.

use continuized::model::{
    check_assumption, check_descent_lemma, estimate_rho, sample_stochastic_gradient,
    AssumptionKind, ModelError, Objective, DEFAULT_ASSUMPTION_TOL,
};
use continuized::objectives::{build_objective, ObjectiveSpec};
use continuized::process::run_rng;
use ndarray::{array, Array1};
use rand::Rng;
use serde_json::json;
use std::sync::Arc;

fn spec(name: &str, params: serde_json::Value) -> ObjectiveSpec {
    ObjectiveSpec {
        name: name.to_string(),
        params,
    }
}

/// One representative instance per catalog entry.
fn catalog() -> Vec<Arc<dyn Objective>> {
    [
        spec("quadratic", json!({"eigenvalues": [1.0, 0.01]})),
        spec("quasar1d", json!({})),
        spec("quasar_radial2d", json!({})),
        spec("finite_sum_quadratic", json!({"coefficients": [1.0, 3.0], "dim": 2})),
        spec(
            "degenerate_quadratic",
            json!({"active_eigenvalues": [1.0, 0.5], "free_dims": 2}),
        ),
        spec("dist_sq_ball", json!({})),
    ]
    .iter()
    .map(|s| build_objective(s).expect("catalog entries build with these params"))
    .collect()
}

fn random_point<R: Rng>(dim: usize, rng: &mut R) -> Array1<f64> {
    Array1::from_iter((0..dim).map(|_| rng.random_range(-2.5..2.5)))
}

fn central_difference(model: &dyn Objective, x: &Array1<f64>) -> Array1<f64> {
    let h = 1e-6 * (1.0 + x.dot(x).sqrt());
    let mut g = Array1::zeros(model.dim());
    for i in 0..model.dim() {
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[i] += h;
        xm[i] -= h;
        g[i] = (model.value(&xp) - model.value(&xm)) / (2.0 * h);
    }
    g
}

#[test]
fn gradients_match_central_differences() {
    let mut rng = run_rng(0xD1FF, 0);
    for model in catalog() {
        for _ in 0..100 {
            let x = random_point(model.dim(), &mut rng);
            let g = model.gradient(&x);
            let fd = central_difference(model.as_ref(), &x);
            let err = {
                let d = &fd - &g;
                d.dot(&d).sqrt()
            };
            let tol = 1e-6 * (1.0 + g.dot(&g).sqrt());
            assert!(err <= tol, "fd mismatch at {x} (err {err:.3e}, tol {tol:.3e})");
        }
    }
}

#[test]
fn declared_optima_are_consistent() {
    let mut rng = run_rng(0x0070, 0);
    for model in catalog() {
        let opt = model.optimum();
        // Representative minimizers: the declared point, or projections of
        // random points when the minimizer is a set.
        let reps: Vec<Array1<f64>> = match opt.minimizer.point() {
            Some(p) => vec![p.clone()],
            None => (0..10)
                .map(|_| opt.minimizer.project(&random_point(model.dim(), &mut rng)))
                .collect(),
        };
        let l = model.constants().lipschitz.unwrap_or(1.0);
        for p in reps {
            let v = model.value(&p);
            assert!(
                (v - opt.f_star).abs() <= 1e-12 * (1.0 + opt.f_star.abs()),
                "value at a minimizer was {v}, declared {}",
                opt.f_star
            );
            let g = model.gradient(&p);
            let gn = g.dot(&g).sqrt();
            assert!(
                gn <= 1e-10 * l * (1.0 + p.dot(&p).sqrt()),
                "gradient norm {gn} at a minimizer"
            );
        }
    }
}

#[test]
fn component_average_equals_full_gradient() {
    let model = build_objective(&spec(
        "finite_sum_quadratic",
        json!({"coefficients": [1.0, 3.0], "dim": 2}),
    ))
    .unwrap();
    let mut rng = run_rng(0xABCD, 0);
    for _ in 0..20 {
        let x = random_point(2, &mut rng);
        let n = model.num_components();
        let mut mean = Array1::zeros(2);
        for i in 0..n {
            mean = mean + model.component_gradient(i, &x);
        }
        mean /= n as f64;
        let g = model.gradient(&x);
        for i in 0..2 {
            assert!(
                (mean[i] - g[i]).abs() <= 1e-14 * (1.0 + g[i].abs()),
                "component mean {} vs gradient {}",
                mean[i],
                g[i]
            );
        }
    }
}

#[test]
fn stochastic_oracle_draws_each_component() {
    let model = build_objective(&spec(
        "finite_sum_quadratic",
        json!({"coefficients": [1.0, 3.0]}),
    ))
    .unwrap();
    let x = array![1.0];
    let mut rng = run_rng(0xFEED, 0);
    let mut seen = [false, false];
    let mut total = 0.0;
    let draws = 2000;
    for _ in 0..draws {
        let s = sample_stochastic_gradient(model.as_ref(), &x, &mut rng).unwrap();
        let idx = s.component.expect("finite sum always samples an index");
        seen[idx] = true;
        let expected = [1.0, 3.0][idx];
        assert_eq!(s.grad[0], expected);
        total += s.grad[0];
    }
    assert!(seen[0] && seen[1]);
    // Mean of a {1, 3} coin: sd = 1, so 4 standard errors is 4 / sqrt(n).
    let mean = total / draws as f64;
    assert!((mean - 2.0).abs() <= 4.0 / (draws as f64).sqrt());
}

#[test]
fn quasar1d_is_gradient_dominated_on_its_box() {
    let model = build_objective(&spec("quasar1d", json!({}))).unwrap();
    let grid: Vec<Array1<f64>> = (0..1000)
        .map(|i| array![-3.0 + 6.0 * (i as f64) / 999.0])
        .collect();
    let report =
        check_assumption(model.as_ref(), AssumptionKind::Pl, &grid, DEFAULT_ASSUMPTION_TOL)
            .unwrap();
    assert!(report.holds, "worst margin {}", report.worst_margin);
}

#[test]
fn degenerate_quadratic_satisfies_the_projected_inequality() {
    let model = build_objective(&spec(
        "degenerate_quadratic",
        json!({"active_eigenvalues": [1.0, 0.5], "free_dims": 2}),
    ))
    .unwrap();
    let mut rng = run_rng(0xDE6E, 0);
    let samples: Vec<Array1<f64>> = (0..1000).map(|_| random_point(4, &mut rng)).collect();
    let report = check_assumption(
        model.as_ref(),
        AssumptionKind::SqcProj,
        &samples,
        DEFAULT_ASSUMPTION_TOL,
    )
    .unwrap();
    assert!(report.holds, "worst margin {}", report.worst_margin);
}

/// Quadratic growth is implied by the quasar inequality with constant
/// mu tau / (2 (2 - tau)); every model that passes the latter must pass
/// the former on the same samples.
#[test]
fn quadratic_growth_follows_from_the_quasar_inequality() {
    let mut rng = run_rng(0x96F0, 0);
    let cases: Vec<(Arc<dyn Objective>, AssumptionKind)> = vec![
        (
            build_objective(&spec("quadratic", json!({"eigenvalues": [1.0, 0.01]}))).unwrap(),
            AssumptionKind::Sqc,
        ),
        (
            build_objective(&spec(
                "degenerate_quadratic",
                json!({"active_eigenvalues": [1.0, 0.5], "free_dims": 2}),
            ))
            .unwrap(),
            AssumptionKind::SqcProj,
        ),
        (
            build_objective(&spec("dist_sq_ball", json!({}))).unwrap(),
            AssumptionKind::SqcProj,
        ),
    ];
    for (model, kind) in cases {
        let samples: Vec<Array1<f64>> =
            (0..500).map(|_| random_point(model.dim(), &mut rng)).collect();
        let sqc =
            check_assumption(model.as_ref(), kind, &samples, DEFAULT_ASSUMPTION_TOL).unwrap();
        assert!(sqc.holds, "{kind:?} failed with margin {}", sqc.worst_margin);
        let qg = check_assumption(
            model.as_ref(),
            AssumptionKind::Qg,
            &samples,
            DEFAULT_ASSUMPTION_TOL,
        )
        .unwrap();
        assert!(qg.holds, "growth failed with margin {}", qg.worst_margin);
    }
}

#[test]
fn smoothness_bound_holds_on_sample_pairs() {
    let mut rng = run_rng(0x5007, 0);
    for name in ["quadratic", "quasar1d"] {
        let model = match name {
            "quadratic" => {
                build_objective(&spec("quadratic", json!({"eigenvalues": [1.0, 0.01]}))).unwrap()
            }
            _ => build_objective(&spec("quasar1d", json!({}))).unwrap(),
        };
        let samples: Vec<Array1<f64>> =
            (0..200).map(|_| random_point(model.dim(), &mut rng)).collect();
        let report = check_assumption(
            model.as_ref(),
            AssumptionKind::LSmooth,
            &samples,
            DEFAULT_ASSUMPTION_TOL,
        )
        .unwrap();
        assert!(report.holds, "{name}: worst margin {}", report.worst_margin);
    }
}

#[test]
fn undeclared_constants_are_reported_not_defaulted() {
    let model = build_objective(&spec("quasar_radial2d", json!({}))).unwrap();
    let samples = vec![array![1.0, 0.5]];
    let err = check_assumption(
        model.as_ref(),
        AssumptionKind::Pl,
        &samples,
        DEFAULT_ASSUMPTION_TOL,
    )
    .unwrap_err();
    assert!(matches!(err, ModelError::MissingConstant(_)));
}

#[test]
fn growth_ratio_of_the_two_component_sum_is_exact() {
    let model = build_objective(&spec(
        "finite_sum_quadratic",
        json!({"coefficients": [1.0, 3.0]}),
    ))
    .unwrap();
    let probes = vec![array![1.0], array![-0.3]];
    let rho = estimate_rho(model.as_ref(), &probes).unwrap();
    assert_eq!(rho, 1.25);
}

#[test]
fn descent_bound_is_tight_at_the_critical_step() {
    let mut rng = run_rng(0xDE5C, 0);

    // Deterministic case: f = x^2 / 2, full step, exact equality.
    let quad = build_objective(&spec("quadratic", json!({"eigenvalues": [1.0]}))).unwrap();
    let report = check_descent_lemma(quad.as_ref(), 1.0, &array![1.0], 100, &mut rng).unwrap();
    assert!(report.exact);
    assert_eq!(report.lhs_se, 0.0);
    assert!((report.lhs_mean + 0.5).abs() < 1e-15);
    assert!((report.rhs + 0.5).abs() < 1e-15);
    assert!(report.holds);

    // Two-component sum at the largest admissible step: both sides -0.8,
    // enumerated exactly over the component choice.
    let fsum = build_objective(&spec(
        "finite_sum_quadratic",
        json!({"coefficients": [1.0, 3.0]}),
    ))
    .unwrap();
    let report = check_descent_lemma(fsum.as_ref(), 0.4, &array![1.0], 100, &mut rng).unwrap();
    assert!(report.exact);
    assert!((report.lhs_mean + 0.8).abs() < 1e-12);
    assert!((report.rhs + 0.8).abs() < 1e-12);
    assert!(report.holds);

    // Just past the admissible step the hypothesis fails loudly.
    let err = check_descent_lemma(fsum.as_ref(), 0.41, &array![1.0], 100, &mut rng).unwrap_err();
    assert!(matches!(err, ModelError::StepTooLarge { .. }));
}
