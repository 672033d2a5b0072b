//! End-to-end checks of the statistical probes against the scheme
//! derivations: certified energies really are supermartingales along the
//! simulated process, a mis-sized dual step is caught, the per-run decay
//! probe and tail checks pass where theory says they must, and batch
//! averaging shows the expected noise scaling.

use continuized::analysis::{
    almost_sure_decay_probe, build_lyapunov, chernoff_empirical_check, supermartingale_probe,
};
use continuized::model::Objective;
use continuized::objectives::{build_objective, ObjectiveSpec};
use continuized::presets::{preset_by_name, Derivation, PresetInputs};
use continuized::process::{mean_trajectory, ContinuizedParams, MeanTrajectory};
use ndarray::{array, Array1};
use serde_json::json;
use std::sync::Arc;

fn objective(name: &str, params: serde_json::Value) -> Arc<dyn Objective> {
    build_objective(&ObjectiveSpec {
        name: name.to_string(),
        params,
    })
    .unwrap()
}

fn derive(scheme: &str, model: &Arc<dyn Objective>) -> Derivation {
    preset_by_name(scheme)
        .unwrap()
        .derive(model.constants(), &PresetInputs::default())
        .unwrap()
}

#[test]
fn certified_energies_shrink_in_expectation() {
    let quad = objective("quadratic", json!({"eigenvalues": [1.0, 0.25]}));
    let degen = objective(
        "degenerate_quadratic",
        json!({"active_eigenvalues": [1.0, 0.01], "free_dims": 1}),
    );
    let cases: [(&Arc<dyn Objective>, &str, Array1<f64>); 3] = [
        (&quad, "pl", array![1.0, 1.0]),
        (&quad, "sqc", array![1.0, 1.0]),
        (&degen, "sqc-proj", array![1.0, 1.0, 1.0]),
    ];
    for (model, scheme, x0) in cases {
        let d = derive(scheme, model);
        let kind = d.lyapunov.expect("these schemes certify an energy");
        let lyap = build_lyapunov(kind, model, &d.params, d.epsilon).unwrap();
        let report =
            supermartingale_probe(model, &d.params, lyap.as_ref(), &x0, 80, 300, 2024).unwrap();
        assert!(
            report.holds,
            "{scheme}: excess {}, excluded {}",
            report.worst_excess, report.n_excluded
        );
    }
}

/// Doubling the dual step leaves the energy untouched (it does not read
/// gamma_prime) but breaks the descent it certifies, so the same probe
/// must reject the run.
#[test]
fn oversized_dual_step_is_rejected() {
    let quad = objective("quadratic", json!({"eigenvalues": [1.0, 0.25]}));
    let d = derive("sqc", &quad);
    let p = &d.params;
    let bad = ContinuizedParams::new(p.eta, p.eta_prime, p.gamma, 2.0 * p.gamma_prime).unwrap();
    let kind = d.lyapunov.unwrap();
    let lyap = build_lyapunov(kind, &quad, p, d.epsilon).unwrap();
    let x0 = array![1.0, 1.0];
    let report = supermartingale_probe(&quad, &bad, lyap.as_ref(), &x0, 80, 300, 2024).unwrap();
    assert!(!report.holds, "excess {}", report.worst_excess);
}

#[test]
fn gap_decays_at_the_certified_rate_on_most_runs() {
    let model = objective("quadratic", json!({"eigenvalues": [1.0]}));
    let d = derive("pl", &model);
    let beta = d.params.rate.unwrap();
    let report = almost_sure_decay_probe(
        &model, &d.params, &array![1.0], beta, 0.8, 100, 200, 200, 77, 0.95,
    )
    .unwrap();
    assert!(
        report.holds,
        "only a fraction {} of runs kept decaying",
        report.fraction_decreasing
    );
}

#[test]
fn tail_bound_dominates_empirical_tails() {
    let checks = chernoff_empirical_check(&[5, 20], &[0.5, 0.9], 20_000, 99).unwrap();
    assert_eq!(checks.len(), 4);
    for c in &checks {
        assert!(c.holds, "k = {}, c1 = {}: slack {}", c.k, c.c1, c.slack);
        assert!(c.slack >= 0.0);
    }
}

#[test]
fn path_average_noise_shrinks_with_the_batch() {
    let model = objective("quadratic", json!({"eigenvalues": [1.0, 0.25]}));
    let d = derive("sqc", &model);
    let x0 = array![1.0, 1.0];
    let grid: Vec<f64> = (0..17).map(|i| 0.5 * i as f64).collect();
    let max_se = |m: &MeanTrajectory| {
        m.se_x
            .iter()
            .flat_map(|v| v.iter().copied())
            .fold(0.0, f64::max)
    };
    let small = mean_trajectory(model.as_ref(), &d.params, &x0, 12, 100, 4242, &grid).unwrap();
    let large = mean_trajectory(model.as_ref(), &d.params, &x0, 12, 400, 4242, &grid).unwrap();
    let ratio = max_se(&small) / max_se(&large);
    // Quadrupling the batch should halve the standard error; the window
    // allows for the noise of the noise estimate.
    assert!((1.4..2.9).contains(&ratio), "SE ratio {ratio}");
}
