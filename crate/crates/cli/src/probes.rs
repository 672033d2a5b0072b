//! Named probe suites behind `check`. Each suite is a self-contained
//! protocol with fixed sizes chosen so a failure means a broken invariant,
//! not sampling noise; the seed is the only configurable input.

use std::sync::Arc;

use continuized::analysis::{build_lyapunov, chernoff_empirical_check, supermartingale_probe};
use continuized::geometry::{
    projection_property_suite, AffineSubspace, AxisBox, Ball, ConvexSet, ProjectionSuiteReport,
    PROJECTION_TOL,
};
use continuized::model::{check_descent_lemma, Objective};
use continuized::objectives::{build_objective, ObjectiveSpec};
use continuized::presets::{preset_by_name, Derivation, PresetInputs};
use continuized::process::{flow_closed_form, mean_trajectory, reference_integrate, run_rng};
use continuized::process::ContinuizedParams;
use ndarray::Array1;
use rand::Rng;
use serde::Serialize;

use crate::CliError;

#[derive(Clone, Debug, Serialize)]
pub struct ProbeOutcome {
    pub name: &'static str,
    pub holds: bool,
    pub details: serde_json::Value,
}

pub trait ProbeSuite: Sync {
    fn name(&self) -> &'static str;
    fn run(&self, seed: u64) -> Result<ProbeOutcome, CliError>;
}

pub const PROBE_NAMES: &[&str] = &[
    "oracle-equivalence",
    "chernoff",
    "projection",
    "descent-lemma",
    "supermartingale",
    "figure1-smoothing",
];

pub fn probe_by_name(name: &str) -> Result<&'static dyn ProbeSuite, CliError> {
    match name {
        "oracle-equivalence" => Ok(&OracleEquivalence),
        "chernoff" => Ok(&Chernoff),
        "projection" => Ok(&Projection),
        "descent-lemma" => Ok(&DescentLemma),
        "supermartingale" => Ok(&Supermartingale),
        "figure1-smoothing" => Ok(&Figure1Smoothing),
        other => Err(CliError::Usage(format!(
            "unknown probe '{other}'; available: {}",
            PROBE_NAMES.join(", ")
        ))),
    }
}

fn objective(name: &str, params: serde_json::Value) -> Result<Arc<dyn Objective>, CliError> {
    Ok(build_objective(&ObjectiveSpec {
        name: name.into(),
        params,
    })?)
}

fn derive(scheme: &str, model: &Arc<dyn Objective>) -> Result<Derivation, CliError> {
    Ok(preset_by_name(scheme)?.derive(model.constants(), &PresetInputs::default())?)
}

/// Closed-form inter-jump flow against a Runge-Kutta integration of the
/// same linear system, over random states, coupling signs, and horizons.
struct OracleEquivalence;

const ORACLE_TRIPLES: usize = 1000;
const ORACLE_REL_TOL: f64 = 1e-8;

impl ProbeSuite for OracleEquivalence {
    fn name(&self) -> &'static str {
        "oracle-equivalence"
    }

    fn run(&self, seed: u64) -> Result<ProbeOutcome, CliError> {
        let mut rng = run_rng(seed, 0);
        let mut worst = 0.0_f64;
        for _ in 0..ORACLE_TRIPLES {
            let dim = rng.random_range(1..=4usize);
            let x = Array1::from_iter((0..dim).map(|_| rng.random_range(-5.0..5.0)));
            let z = Array1::from_iter((0..dim).map(|_| rng.random_range(-5.0..5.0)));
            let eta = rng.random_range(0.05..3.0);
            // The sum eta + eta' stays positive while eta' itself may not.
            let sum = rng.random_range(0.05..4.0);
            let params = ContinuizedParams::new(eta, sum - eta, 1.0, 1.0)?;
            let dt = rng.random_range(0.0..5.0);
            let n_substeps = ((200.0 * sum * dt).ceil() as usize).max(32);

            let fast = flow_closed_form(&x, &z, dt, &params);
            let slow = reference_integrate(&x, &z, dt, &params, n_substeps);
            let scale = 1.0 + (x.dot(&x) + z.dot(&z)).sqrt();
            for i in 0..dim {
                worst = worst.max((fast.y[i] - slow.y[i]).abs() / scale);
                worst = worst.max((fast.z_minus[i] - slow.z_minus[i]).abs() / scale);
            }
        }
        Ok(ProbeOutcome {
            name: self.name(),
            holds: worst <= ORACLE_REL_TOL,
            details: serde_json::json!({
                "n_triples": ORACLE_TRIPLES,
                "worst_relative_error": worst,
                "tolerance": ORACLE_REL_TOL,
            }),
        })
    }
}

/// Arrival-time tail bound against empirical Gamma frequencies on a
/// 3 x 3 grid of (k, c1).
struct Chernoff;

const CHERNOFF_KS: [u64; 3] = [10, 50, 100];
const CHERNOFF_C1S: [f64; 3] = [0.3, 0.5, 0.8];
const CHERNOFF_SAMPLES: u64 = 1_000_000;

impl ProbeSuite for Chernoff {
    fn name(&self) -> &'static str {
        "chernoff"
    }

    fn run(&self, seed: u64) -> Result<ProbeOutcome, CliError> {
        let checks =
            chernoff_empirical_check(&CHERNOFF_KS, &CHERNOFF_C1S, CHERNOFF_SAMPLES, seed)?;
        let holds = checks.iter().all(|c| c.holds);
        let spot = checks
            .iter()
            .find(|c| c.k == 50 && c.c1 == 0.5)
            .map(|c| c.bound);
        Ok(ProbeOutcome {
            name: self.name(),
            holds,
            details: serde_json::json!({
                "n_samples": CHERNOFF_SAMPLES,
                "cells": checks,
                "spot_bound_k50_c05": spot,
            }),
        })
    }
}

/// Projection property suite on a ball, a box, and an affine subspace.
struct Projection;

const PROJECTION_PROBES: usize = 10_000;

fn suite_json(name: &str, r: &ProjectionSuiteReport) -> serde_json::Value {
    serde_json::json!({
        "set": name,
        "n_probes": r.n_probes,
        "worst_variational": r.worst_variational,
        "worst_monotonicity": r.worst_monotonicity,
        "worst_expansion_ratio": r.worst_expansion_ratio,
        "worst_directional": r.worst_directional,
        "directional_growth_failures": r.directional_growth_failures,
        "holds": r.holds,
    })
}

impl ProbeSuite for Projection {
    fn name(&self) -> &'static str {
        "projection"
    }

    fn run(&self, seed: u64) -> Result<ProbeOutcome, CliError> {
        let ball = Ball::new(ndarray::array![0.3, -0.2], 1.5)?;
        let axis_box = AxisBox::new(ndarray::array![-1.0, -0.5], ndarray::array![0.5, 2.0])?;
        let affine = AffineSubspace::new(
            ndarray::array![1.0, 0.0, 0.0],
            &[ndarray::array![0.0, 1.0, 0.0], ndarray::array![0.0, 1.0, 1.0]],
        )?;
        let sets: [(&str, &dyn ConvexSet); 3] =
            [("ball", &ball), ("box", &axis_box), ("affine", &affine)];

        let mut reports = Vec::new();
        let mut holds = true;
        for (i, (name, set)) in sets.iter().enumerate() {
            let r = projection_property_suite(*set, PROJECTION_PROBES, seed.wrapping_add(i as u64));
            holds &= r.holds;
            reports.push(suite_json(name, &r));
        }
        Ok(ProbeOutcome {
            name: self.name(),
            holds,
            details: serde_json::json!({
                "tolerance": PROJECTION_TOL,
                "suites": reports,
            }),
        })
    }
}

/// Expected one-step decrease against its closed-form bound, on two cases
/// where the expectation is enumerated and the bound is met with equality.
struct DescentLemma;

impl ProbeSuite for DescentLemma {
    fn name(&self) -> &'static str {
        "descent-lemma"
    }

    fn run(&self, seed: u64) -> Result<ProbeOutcome, CliError> {
        let mut rng = run_rng(seed, 0);

        // gamma = 1/L on a deterministic quadratic: both sides are -1/2.
        let quad = objective("quadratic", serde_json::json!({ "eigenvalues": [1.0] }))?;
        let r1 = check_descent_lemma(quad.as_ref(), 1.0, &ndarray::array![1.0], 1000, &mut rng)?;

        // Two-component sum at the largest admissible step: both sides -0.8.
        let fs = objective(
            "finite_sum_quadratic",
            serde_json::json!({ "coefficients": [1.0, 3.0] }),
        )?;
        let r2 = check_descent_lemma(fs.as_ref(), 0.4, &ndarray::array![1.0], 1000, &mut rng)?;

        let tight1 = (r1.lhs_mean - r1.rhs).abs() <= 1e-12 && (r1.rhs + 0.5).abs() <= 1e-12;
        let tight2 = (r2.lhs_mean - r2.rhs).abs() <= 1e-12 && (r2.rhs + 0.8).abs() <= 1e-12;
        let holds = r1.holds && r1.exact && tight1 && r2.holds && r2.exact && tight2;
        Ok(ProbeOutcome {
            name: self.name(),
            holds,
            details: serde_json::json!({
                "quadratic": { "lhs": r1.lhs_mean, "rhs": r1.rhs, "exact": r1.exact },
                "finite_sum": { "lhs": r2.lhs_mean, "rhs": r2.rhs, "exact": r2.exact },
            }),
        })
    }
}

/// Certified energies are supermartingales on their matched problems, and
/// the check has teeth: doubling the dual step (which the energy does not
/// read) must break it.
struct Supermartingale;

const SUPERMARTINGALE_STEPS: u64 = 100;
const SUPERMARTINGALE_RUNS: u64 = 400;

impl ProbeSuite for Supermartingale {
    fn name(&self) -> &'static str {
        "supermartingale"
    }

    fn run(&self, seed: u64) -> Result<ProbeOutcome, CliError> {
        let quad = objective("quadratic", serde_json::json!({ "eigenvalues": [1.0, 0.25] }))?;
        let degen = objective(
            "degenerate_quadratic",
            serde_json::json!({ "active_eigenvalues": [1.0, 0.01], "free_dims": 1 }),
        )?;
        let pairs: [(&str, &Arc<dyn Objective>); 3] =
            [("pl", &quad), ("sqc", &quad), ("sqc-proj", &degen)];

        let mut reports = Vec::new();
        let mut holds = true;
        let mut sqc_setup = None;
        for (i, (scheme, model)) in pairs.iter().enumerate() {
            let d = derive(scheme, model)?;
            let kind = d.lyapunov.ok_or_else(|| {
                CliError::Config(format!("scheme '{scheme}' carries no certified energy"))
            })?;
            let lyap = build_lyapunov(kind, model, &d.params, d.epsilon)?;
            let x0 = Array1::ones(model.dim());
            let r = supermartingale_probe(
                model,
                &d.params,
                lyap.as_ref(),
                &x0,
                SUPERMARTINGALE_STEPS,
                SUPERMARTINGALE_RUNS,
                seed.wrapping_add(i as u64),
            )?;
            holds &= r.holds;
            reports.push(serde_json::json!({
                "scheme": scheme,
                "energy": kind.name(),
                "worst_excess": r.worst_excess,
                "n_excluded": r.n_excluded,
                "holds": r.holds,
            }));
            if *scheme == "sqc" {
                sqc_setup = Some((Arc::clone(model), d, lyap));
            }
        }

        // Control: same energy, dual step doubled. The energy does not read
        // gamma', so only the trajectory changes; the probe must now fail.
        let (model, d, lyap) = sqc_setup.expect("the sqc pair is in the list above");
        let broken = ContinuizedParams::new(
            d.params.eta,
            d.params.eta_prime,
            d.params.gamma,
            2.0 * d.params.gamma_prime,
        )?;
        let control = supermartingale_probe(
            &model,
            &broken,
            lyap.as_ref(),
            &Array1::ones(model.dim()),
            SUPERMARTINGALE_STEPS,
            SUPERMARTINGALE_RUNS,
            seed.wrapping_add(17),
        )?;
        holds &= !control.holds;

        Ok(ProbeOutcome {
            name: self.name(),
            holds,
            details: serde_json::json!({
                "pairs": reports,
                "control_gamma_prime_doubled": {
                    "worst_excess": control.worst_excess,
                    "holds": control.holds,
                },
            }),
        })
    }
}

/// Grid-evaluated mean paths: the pointwise standard error must shrink
/// like one over the square root of the number of runs.
struct Figure1Smoothing;

const SMOOTHING_RUNS_SMALL: u64 = 100;
const SMOOTHING_RUNS_LARGE: u64 = 10_000;
const SMOOTHING_GRID_POINTS: usize = 50;
const SMOOTHING_HORIZON: f64 = 20.0;
const SMOOTHING_STEPS: u64 = 20;

impl ProbeSuite for Figure1Smoothing {
    fn name(&self) -> &'static str {
        "figure1-smoothing"
    }

    fn run(&self, seed: u64) -> Result<ProbeOutcome, CliError> {
        let model = objective("quadratic", serde_json::json!({ "eigenvalues": [1.0, 1e-4] }))?;
        let d = derive("sqc", &model)?;
        let x0 = ndarray::array![1.0, 1.0];
        let grid: Vec<f64> = (0..SMOOTHING_GRID_POINTS)
            .map(|i| SMOOTHING_HORIZON * i as f64 / (SMOOTHING_GRID_POINTS - 1) as f64)
            .collect();

        let max_se = |n_runs: u64| -> Result<f64, CliError> {
            let m = mean_trajectory(
                model.as_ref(),
                &d.params,
                &x0,
                SMOOTHING_STEPS,
                n_runs,
                seed,
                &grid,
            )?;
            Ok(m.se_x
                .iter()
                .flat_map(|se| se.iter().copied())
                .fold(0.0, f64::max))
        };
        let se_small = max_se(SMOOTHING_RUNS_SMALL)?;
        let se_large = max_se(SMOOTHING_RUNS_LARGE)?;
        let ratio = se_small / se_large;
        let holds = (7.0..=13.0).contains(&ratio);
        Ok(ProbeOutcome {
            name: self.name(),
            holds,
            details: serde_json::json!({
                "grid_points": SMOOTHING_GRID_POINTS,
                "horizon": SMOOTHING_HORIZON,
                "runs": [SMOOTHING_RUNS_SMALL, SMOOTHING_RUNS_LARGE],
                "max_se_small": se_small,
                "max_se_large": se_large,
                "ratio": ratio,
            }),
        })
    }
}
