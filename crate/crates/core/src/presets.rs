//! Parameter schemes: each one maps an objective's declared constants to a
//! certified quadruple (eta, eta', gamma, gamma') with a guaranteed rate
//! `beta` and an initial constant `K0`, meaning
//! `E[e^{beta T_k} (f(x_k) - f*)] <= prefactor * K0` for every k.
//!
//! Schemes are registered by name and selected at runtime; each validates
//! its own hypotheses and refuses to emit parameters outside them.

use crate::analysis::LyapunovKind;
use crate::model::{ConstantKind, Constants, ModelError};
use crate::process::{BoundCoefficients, ContinuizedParams};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PresetError {
    #[error("unknown scheme '{0}'; available: pl, sqc, sqc-wang, sqc-proj")]
    Unknown(String),
    #[error("{source}")]
    Model {
        #[from]
        source: ModelError,
    },
    #[error("scheme '{scheme}': {message}")]
    Hypothesis { scheme: &'static str, message: String },
}

fn hypothesis(scheme: &'static str, message: String) -> PresetError {
    PresetError::Hypothesis { scheme, message }
}

/// Scheme-specific knobs. `gamma` applies only to `pl` (its step size is a
/// free parameter); `epsilon` only to `sqc` (its rate/prefactor trade-off).
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PresetInputs {
    pub gamma: Option<f64>,
    pub epsilon: Option<f64>,
}

/// Default rate/prefactor trade-off for the `sqc` scheme.
pub const DEFAULT_EPSILON: f64 = 0.1;

/// A derived parameter set together with its certificate data.
#[derive(Clone, Debug)]
pub struct Derivation {
    pub scheme: &'static str,
    /// Parameters with `rate` and `bound` populated.
    pub params: ContinuizedParams,
    /// The energy whose supermartingale property certifies the rate, when
    /// this crate carries its proof shape.
    pub lyapunov: Option<LyapunovKind>,
    /// Epsilon actually used (sqc only; after clamping).
    pub epsilon: Option<f64>,
    /// Set when the requested epsilon was below (mu/L)^{1/4} and was raised
    /// to the smallest admissible value.
    pub epsilon_clamped: bool,
    /// Fraction of the minimizer-set distance retained by the projection
    /// scheme (sqc-proj only).
    pub alpha: Option<f64>,
}

/// The certified bound evaluated at a concrete start.
#[derive(Clone, Copy, Debug)]
pub struct GuaranteedBound {
    /// Constant upper bound on `E[e^{rate T_k} (f(x_k) - f*)]`, all k.
    pub bound: f64,
    pub rate: f64,
}

impl Derivation {
    /// Evaluate the certificate at a start with objective gap `f_gap0` and
    /// squared distance `dist0_sq` to the minimizer (point or projection,
    /// per scheme).
    pub fn guaranteed_bound(&self, f_gap0: f64, dist0_sq: f64) -> GuaranteedBound {
        let coeffs = self
            .params
            .bound
            .expect("derivations always populate bound coefficients");
        GuaranteedBound {
            bound: coeffs.bound(f_gap0, dist0_sq),
            rate: self
                .params
                .rate
                .expect("derivations always populate the rate"),
        }
    }
}

pub trait Preset: Send + Sync {
    fn name(&self) -> &'static str;
    /// One-line statement of the hypotheses the scheme needs.
    fn summary(&self) -> &'static str;
    fn derive(&self, constants: &Constants, inputs: &PresetInputs)
        -> Result<Derivation, PresetError>;
}

pub const PRESET_NAMES: &[&str] = &["pl", "sqc", "sqc-wang", "sqc-proj"];

pub fn preset_by_name(name: &str) -> Result<&'static dyn Preset, PresetError> {
    match name {
        "pl" => Ok(&PlScheme),
        "sqc" => Ok(&SqcImprovedScheme),
        "sqc-wang" => Ok(&SqcWangScheme),
        "sqc-proj" => Ok(&SqcProjScheme),
        other => Err(PresetError::Unknown(other.to_string())),
    }
}

pub fn all_presets() -> [&'static dyn Preset; 4] {
    [&PlScheme, &SqcImprovedScheme, &SqcWangScheme, &SqcProjScheme]
}

fn require_positive(
    scheme: &'static str,
    constants: &Constants,
    kind: ConstantKind,
) -> Result<f64, PresetError> {
    let v = constants.require(kind)?;
    if !(v > 0.0 && v.is_finite()) {
        return Err(hypothesis(scheme, format!("requires {kind} > 0, got {v}")));
    }
    Ok(v)
}

fn require_rho(scheme: &'static str, constants: &Constants) -> Result<f64, PresetError> {
    let rho = constants.rho;
    if !(rho >= 1.0 && rho.is_finite()) {
        return Err(hypothesis(
            scheme,
            format!("requires a growth constant rho >= 1, got {rho}"),
        ));
    }
    Ok(rho)
}

fn require_tau(scheme: &'static str, constants: &Constants) -> Result<f64, PresetError> {
    let tau = constants.require(ConstantKind::Tau)?;
    if !(tau > 0.0 && tau <= 1.0) {
        return Err(hypothesis(
            scheme,
            format!("requires tau in (0, 1], got {tau}"),
        ));
    }
    Ok(tau)
}

fn reject_input(
    scheme: &'static str,
    inputs: &PresetInputs,
    allow_gamma: bool,
    allow_epsilon: bool,
) -> Result<(), PresetError> {
    if inputs.gamma.is_some() && !allow_gamma {
        return Err(hypothesis(
            scheme,
            "derives its own step size; the gamma input applies only to 'pl'".into(),
        ));
    }
    if inputs.epsilon.is_some() && !allow_epsilon {
        return Err(hypothesis(
            scheme,
            "has no epsilon trade-off; the epsilon input applies only to 'sqc'".into(),
        ));
    }
    Ok(())
}

/// Gradient-dominated objectives: rate `mu gamma / 2` with the free step
/// size `gamma <= 1/(rho L)`, certified by the pl energy.
pub struct PlScheme;

impl Preset for PlScheme {
    fn name(&self) -> &'static str {
        "pl"
    }
    fn summary(&self) -> &'static str {
        "needs L-smoothness, gradient dominance (mu), growth constant rho; \
         step gamma in (0, 1/(rho L)], default the upper end"
    }
    fn derive(
        &self,
        constants: &Constants,
        inputs: &PresetInputs,
    ) -> Result<Derivation, PresetError> {
        reject_input(self.name(), inputs, true, false)?;
        let l = require_positive(self.name(), constants, ConstantKind::Lipschitz)?;
        let mu = require_positive(self.name(), constants, ConstantKind::Mu)?;
        let rho = require_rho(self.name(), constants)?;
        let gamma_max = 1.0 / (rho * l);
        let gamma = inputs.gamma.unwrap_or(gamma_max);
        if !(gamma > 0.0 && gamma <= gamma_max && gamma.is_finite()) {
            return Err(hypothesis(
                self.name(),
                format!("requires 0 < gamma <= 1/(rho L) = {gamma_max}, got {gamma}"),
            ));
        }
        let eta = (gamma / (2.0 * rho)).sqrt();
        let rate = mu * gamma / 2.0;
        // eta + eta' reduces to the rate exactly, by construction.
        let eta_prime = rate - eta;
        let mut params = ContinuizedParams::new(eta, eta_prime, gamma, gamma + eta)
            .map_err(|e| hypothesis(self.name(), e.to_string()))?;
        params.rate = Some(rate);
        params.bound = Some(BoundCoefficients {
            gap_coeff: 1.0,
            dist_sq_coeff: 0.0,
            prefactor: 1.0,
        });
        Ok(Derivation {
            scheme: self.name(),
            params,
            lyapunov: Some(LyapunovKind::Pl),
            epsilon: None,
            epsilon_clamped: false,
            alpha: None,
        })
    }
}

/// Strongly quasar convex objectives, improved rate: beta carries the
/// sqrt(2)(1 - eps) factor over the baseline scheme, at the price of the
/// 1/eps prefactor, with eps >= (mu/L)^{1/4} required.
pub struct SqcImprovedScheme;

impl Preset for SqcImprovedScheme {
    fn name(&self) -> &'static str {
        "sqc"
    }
    fn summary(&self) -> &'static str {
        "needs L-smoothness, strong quasar convexity (tau, mu), growth \
         constant rho, unique minimizer; epsilon in [(mu/L)^{1/4}, 1)"
    }
    fn derive(
        &self,
        constants: &Constants,
        inputs: &PresetInputs,
    ) -> Result<Derivation, PresetError> {
        reject_input(self.name(), inputs, false, true)?;
        let l = require_positive(self.name(), constants, ConstantKind::Lipschitz)?;
        let mu = require_positive(self.name(), constants, ConstantKind::Mu)?;
        let tau = require_tau(self.name(), constants)?;
        let rho = require_rho(self.name(), constants)?;
        let kappa = mu / l;
        let eps_floor = kappa.powf(0.25);
        if !(eps_floor < 1.0) {
            return Err(hypothesis(
                self.name(),
                format!(
                    "requires (mu/L)^{{1/4}} < 1 so an admissible epsilon exists, \
                     got mu/L = {kappa}"
                ),
            ));
        }
        let requested = inputs.epsilon.unwrap_or(DEFAULT_EPSILON);
        if !(requested > 0.0 && requested < 1.0) {
            return Err(hypothesis(
                self.name(),
                format!("requires epsilon in (0, 1), got {requested}"),
            ));
        }
        let epsilon = requested.max(eps_floor);
        let clamped = epsilon > requested;

        let half = (1.0 / (2.0 * (2.0 - tau))).sqrt();
        let common = kappa.sqrt() / rho;
        let eta = 2.0 * half * common;
        let eta_prime = (1.0 - epsilon) * tau * half * common;
        let gamma = 1.0 / (rho * l);
        let gamma_prime = ((2.0 - tau) / (2.0 * mu * l)).sqrt() / rho;
        let mut params = ContinuizedParams::new(eta, eta_prime, gamma, gamma_prime)
            .map_err(|e| hypothesis(self.name(), e.to_string()))?;
        // The certified rate is exactly twice eta'.
        params.rate = Some(2.0 * eta_prime);
        params.bound = Some(BoundCoefficients {
            gap_coeff: 1.0,
            dist_sq_coeff: mu,
            prefactor: 1.0 / epsilon,
        });
        Ok(Derivation {
            scheme: self.name(),
            params,
            lyapunov: Some(LyapunovKind::Sqc),
            epsilon: Some(epsilon),
            epsilon_clamped: clamped,
            alpha: None,
        })
    }
}

/// Strongly quasar convex objectives, baseline rate `tau sqrt(mu/L)`.
/// Stated for deterministic gradient oracles only; rho > 1 is rejected
/// rather than extrapolated.
pub struct SqcWangScheme;

impl Preset for SqcWangScheme {
    fn name(&self) -> &'static str {
        "sqc-wang"
    }
    fn summary(&self) -> &'static str {
        "needs L-smoothness, strong quasar convexity (tau, mu), unique \
         minimizer, and a deterministic oracle (rho = 1)"
    }
    fn derive(
        &self,
        constants: &Constants,
        inputs: &PresetInputs,
    ) -> Result<Derivation, PresetError> {
        reject_input(self.name(), inputs, false, false)?;
        let l = require_positive(self.name(), constants, ConstantKind::Lipschitz)?;
        let mu = require_positive(self.name(), constants, ConstantKind::Mu)?;
        let tau = require_tau(self.name(), constants)?;
        let rho = require_rho(self.name(), constants)?;
        if rho > 1.0 {
            return Err(hypothesis(
                self.name(),
                format!(
                    "is stated for deterministic gradient oracles only (rho = 1), \
                     got rho = {rho}; use 'sqc' for stochastic gradients"
                ),
            ));
        }
        let sq = (mu / l).sqrt();
        let mut params = ContinuizedParams::new(sq, tau * sq, 1.0 / l, 1.0 / (mu * l).sqrt())
            .map_err(|e| hypothesis(self.name(), e.to_string()))?;
        params.rate = Some(tau * sq);
        params.bound = Some(BoundCoefficients {
            gap_coeff: 1.0,
            dist_sq_coeff: mu,
            prefactor: 1.0,
        });
        Ok(Derivation {
            scheme: self.name(),
            params,
            // The baseline guarantee is quoted without a proof shape this
            // crate carries; its bound is checked through the weighted gap.
            lyapunov: None,
            epsilon: None,
            epsilon_clamped: false,
            alpha: None,
        })
    }
}

/// Set-valued minimizers under strong quasar convexity relative to the
/// projection: rate `eta = (alpha/rho) sqrt(mu/L)` with
/// `alpha = 1 - c (mu/L)^{1/4}`, valid while mu/L < c^{-4}.
pub struct SqcProjScheme;

impl Preset for SqcProjScheme {
    fn name(&self) -> &'static str {
        "sqc-proj"
    }
    fn summary(&self) -> &'static str {
        "needs L-smoothness, projection quasar convexity (mu), growth \
         constant rho, a projectable minimizer set, and \
         mu/L < ((1+sqrt(1+4 rho))/2)^{-4}"
    }
    fn derive(
        &self,
        constants: &Constants,
        inputs: &PresetInputs,
    ) -> Result<Derivation, PresetError> {
        reject_input(self.name(), inputs, false, false)?;
        let l = require_positive(self.name(), constants, ConstantKind::Lipschitz)?;
        let mu = require_positive(self.name(), constants, ConstantKind::Mu)?;
        let rho = require_rho(self.name(), constants)?;
        let kappa = mu / l;
        let c = (1.0 + (1.0 + 4.0 * rho).sqrt()) / 2.0;
        let validity = c.powi(-4);
        if !(kappa < validity) {
            return Err(hypothesis(
                self.name(),
                format!(
                    "requires mu/L < ((1+sqrt(1+4 rho))/2)^{{-4}} = {validity:.6} so \
                     that alpha > 0, got mu/L = {kappa:.6}"
                ),
            ));
        }
        let alpha = 1.0 - c * kappa.powf(0.25);
        let sq = kappa.sqrt() / rho;
        let eta = alpha * sq;
        let mut params =
            ContinuizedParams::new(eta, sq, 1.0 / (rho * l), 1.0 / (rho * (mu * l).sqrt()))
                .map_err(|e| hypothesis(self.name(), e.to_string()))?;
        params.rate = Some(eta);
        params.bound = Some(BoundCoefficients {
            gap_coeff: 1.0,
            dist_sq_coeff: mu * alpha,
            prefactor: 1.0,
        });
        Ok(Derivation {
            scheme: self.name(),
            params,
            lyapunov: Some(LyapunovKind::SqcProj),
            epsilon: None,
            epsilon_clamped: false,
            alpha: Some(alpha),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn consts(l: f64, mu: f64, tau: Option<f64>, rho: f64) -> Constants {
        Constants {
            lipschitz: Some(l),
            mu: Some(mu),
            tau,
            rho,
        }
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn pl_frozen_example() {
        // L=1, rho=1, mu=0.5, gamma=1.
        let d = PlScheme
            .derive(
                &consts(1.0, 0.5, None, 1.0),
                &PresetInputs {
                    gamma: Some(1.0),
                    epsilon: None,
                },
            )
            .unwrap();
        let p = &d.params;
        assert!(rel(p.eta, 0.707106781186547524) < 1e-15);
        assert!(rel(p.eta_prime, -0.457106781186547524) < 1e-15);
        assert!(rel(p.gamma_prime, 1.707106781186547524) < 1e-15);
        assert_eq!(p.gamma, 1.0);
        assert_eq!(p.rate, Some(0.25));
        // The couplings sum to the rate exactly.
        assert_eq!(p.eta + p.eta_prime, 0.25);
        assert_eq!(d.lyapunov, Some(LyapunovKind::Pl));
        let b = p.bound.unwrap();
        assert_eq!((b.gap_coeff, b.dist_sq_coeff, b.prefactor), (1.0, 0.0, 1.0));
        // Bound is just the initial gap.
        assert_eq!(d.guaranteed_bound(2.0, 5.0).bound, 2.0);
    }

    #[test]
    fn pl_default_gamma_is_the_largest_admissible() {
        let d = PlScheme
            .derive(&consts(4.0, 0.5, None, 2.0), &PresetInputs::default())
            .unwrap();
        assert_eq!(d.params.gamma, 1.0 / 8.0);
        // And the rate equals mu gamma / 2.
        assert_eq!(d.params.rate, Some(0.5 * 0.125 / 2.0));
    }

    #[test]
    fn pl_rejects_oversized_gamma() {
        let err = PlScheme
            .derive(
                &consts(1.0, 0.5, None, 1.0),
                &PresetInputs {
                    gamma: Some(1.5),
                    epsilon: None,
                },
            )
            .unwrap_err();
        assert!(err.to_string().contains("1/(rho L)"), "{err}");
        assert!(PlScheme
            .derive(
                &consts(1.0, 0.5, None, 1.0),
                &PresetInputs {
                    gamma: Some(0.0),
                    epsilon: None
                }
            )
            .is_err());
    }

    #[test]
    fn sqc_frozen_example() {
        // L=1, mu=1e-4, tau=1, rho=1, eps=0.1 (kappa^{1/4} = 0.1, boundary).
        let d = SqcImprovedScheme
            .derive(
                &consts(1.0, 1e-4, Some(1.0), 1.0),
                &PresetInputs {
                    gamma: None,
                    epsilon: Some(0.1),
                },
            )
            .unwrap();
        let p = &d.params;
        assert_eq!(p.gamma, 1.0);
        assert!(rel(p.gamma_prime, 70.7106781186547524) < 1e-15);
        assert!(rel(p.eta, 0.0141421356237309505) < 1e-15);
        assert!(rel(p.eta_prime, 0.00636396103067892772) < 1e-15);
        assert!(rel(p.rate.unwrap(), 0.0127279220613578554) < 1e-15);
        // rate = 2 eta' exactly by construction.
        assert_eq!(p.rate.unwrap(), 2.0 * p.eta_prime);
        assert_eq!(p.bound.unwrap().prefactor, 10.0);
        assert_eq!(p.bound.unwrap().dist_sq_coeff, 1e-4);
        assert_eq!(d.epsilon, Some(0.1));
        assert!(!d.epsilon_clamped);
        assert_eq!(d.lyapunov, Some(LyapunovKind::Sqc));
        // Frozen bound example: gap0=1, dist0^2=4 -> 10 * (1 + 4e-4).
        let gb = d.guaranteed_bound(1.0, 4.0);
        assert!(rel(gb.bound, 10.004) < 1e-15);
    }

    #[test]
    fn sqc_clamps_small_epsilon_and_reports_it() {
        // kappa^{1/4} = 0.1; asking for 0.05 raises it to the floor.
        let d = SqcImprovedScheme
            .derive(
                &consts(1.0, 1e-4, Some(1.0), 1.0),
                &PresetInputs {
                    gamma: None,
                    epsilon: Some(0.05),
                },
            )
            .unwrap();
        assert!(d.epsilon_clamped);
        assert!(rel(d.epsilon.unwrap(), 0.1) < 1e-12);
        // Parameters vary continuously through the clamp: requesting the
        // floor exactly gives the same derivation.
        let at_floor = SqcImprovedScheme
            .derive(
                &consts(1.0, 1e-4, Some(1.0), 1.0),
                &PresetInputs {
                    gamma: None,
                    epsilon: Some(d.epsilon.unwrap()),
                },
            )
            .unwrap();
        assert_eq!(d.params.eta_prime, at_floor.params.eta_prime);
        assert!(!at_floor.epsilon_clamped);
    }

    #[test]
    fn sqc_default_epsilon_and_input_rejection() {
        let d = SqcImprovedScheme
            .derive(&consts(1.0, 1e-4, Some(1.0), 1.0), &PresetInputs::default())
            .unwrap();
        assert_eq!(d.epsilon, Some(DEFAULT_EPSILON));
        assert!(SqcImprovedScheme
            .derive(
                &consts(1.0, 1e-4, Some(1.0), 1.0),
                &PresetInputs {
                    gamma: Some(0.5),
                    epsilon: None
                }
            )
            .is_err());
        assert!(SqcImprovedScheme
            .derive(
                &consts(1.0, 1e-4, Some(0.5), 1.0),
                &PresetInputs {
                    gamma: None,
                    epsilon: Some(1.0)
                }
            )
            .is_err());
    }

    #[test]
    fn wang_frozen_example_and_improvement_ratio() {
        let d = SqcWangScheme
            .derive(&consts(1.0, 1e-4, Some(1.0), 1.0), &PresetInputs::default())
            .unwrap();
        let p = &d.params;
        assert_eq!(p.eta, 0.01);
        assert_eq!(p.eta_prime, 0.01);
        assert_eq!(p.gamma, 1.0);
        assert!(rel(p.gamma_prime, 100.0) < 1e-15);
        assert_eq!(p.rate, Some(0.01));
        assert!(d.lyapunov.is_none());

        // The improved scheme beats this rate by sqrt(2)(1 - eps).
        let improved = SqcImprovedScheme
            .derive(
                &consts(1.0, 1e-4, Some(1.0), 1.0),
                &PresetInputs {
                    gamma: None,
                    epsilon: Some(0.1),
                },
            )
            .unwrap();
        let ratio = improved.params.rate.unwrap() / p.rate.unwrap();
        assert!(rel(ratio, 1.27279220613578554) < 1e-14);
    }

    #[test]
    fn wang_rejects_stochastic_oracles() {
        let err = SqcWangScheme
            .derive(&consts(2.0, 1e-4, Some(1.0), 1.25), &PresetInputs::default())
            .unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("rho = 1"), "{msg}");
        assert!(msg.contains("sqc-wang"), "{msg}");
    }

    #[test]
    fn proj_frozen_example() {
        let d = SqcProjScheme
            .derive(&consts(1.0, 1e-4, None, 1.0), &PresetInputs::default())
            .unwrap();
        let p = &d.params;
        assert!(rel(d.alpha.unwrap(), 0.838196601125010515) < 1e-15);
        assert!(rel(p.eta, 0.00838196601125010515) < 1e-15);
        assert_eq!(p.rate, Some(p.eta));
        assert_eq!(p.eta_prime, 0.01);
        assert_eq!(p.gamma, 1.0);
        assert!(rel(p.gamma_prime, 100.0) < 1e-15);
        assert_eq!(d.lyapunov, Some(LyapunovKind::SqcProj));
        // eta / gamma' recovers alpha mu, the energy's distance coefficient.
        assert!(rel(p.eta / p.gamma_prime, d.alpha.unwrap() * 1e-4) < 1e-14);
        assert!(rel(p.bound.unwrap().dist_sq_coeff, d.alpha.unwrap() * 1e-4) < 1e-15);
    }

    #[test]
    fn proj_validity_region() {
        // rho = 1: the validity threshold is the golden ratio to the -4.
        let err = SqcProjScheme
            .derive(&consts(1.0, 0.2, None, 1.0), &PresetInputs::default())
            .unwrap_err();
        assert!(err.to_string().contains("alpha"), "{err}");
        // Just inside the region still works.
        let d = SqcProjScheme
            .derive(&consts(1.0, 0.145, None, 1.0), &PresetInputs::default())
            .unwrap();
        assert!(d.alpha.unwrap() > 0.0);
        // alpha -> 1 as mu/L -> 0.
        let tiny = SqcProjScheme
            .derive(&consts(1.0, 1e-12, None, 1.0), &PresetInputs::default())
            .unwrap();
        assert!(tiny.alpha.unwrap() > 0.99);
    }

    #[test]
    fn rate_monotonicity_in_epsilon_and_tau() {
        let base = consts(1.0, 1e-4, Some(1.0), 1.0);
        let rate = |tau: f64, eps: f64| {
            SqcImprovedScheme
                .derive(
                    &consts(1.0, 1e-4, Some(tau), 1.0),
                    &PresetInputs {
                        gamma: None,
                        epsilon: Some(eps),
                    },
                )
                .unwrap()
                .params
                .rate
                .unwrap()
        };
        let mut prev = f64::INFINITY;
        for eps in [0.1, 0.3, 0.5, 0.7, 0.9] {
            let r = rate(1.0, eps);
            assert!(r < prev, "rate must decrease in epsilon");
            prev = r;
        }
        let mut prev = 0.0;
        for tau in [0.2, 0.4, 0.6, 0.8, 1.0] {
            let r = rate(tau, 0.1);
            assert!(r > prev, "rate must increase in tau");
            prev = r;
        }
        let _ = base;
    }

    #[test]
    fn registry_resolves_all_names() {
        for name in PRESET_NAMES {
            assert_eq!(preset_by_name(name).unwrap().name(), *name);
        }
        assert!(matches!(
            preset_by_name("nesterov"),
            Err(PresetError::Unknown(_))
        ));
        // Every emitted parameter set passes its own invariant.
        for preset in all_presets() {
            let c = if preset.name() == "pl" {
                consts(1.0, 0.5, None, 1.0)
            } else {
                consts(1.0, 1e-4, Some(1.0), 1.0)
            };
            let d = preset.derive(&c, &PresetInputs::default()).unwrap();
            d.params.validate().unwrap();
            assert!(d.params.rate.unwrap() > 0.0);
        }
    }

    #[test]
    fn missing_constants_are_reported() {
        let no_mu = Constants {
            lipschitz: Some(1.0),
            mu: None,
            tau: Some(1.0),
            rho: 1.0,
        };
        assert!(matches!(
            PlScheme.derive(&no_mu, &PresetInputs::default()),
            Err(PresetError::Model { .. })
        ));
        let no_tau = consts(1.0, 1e-4, None, 1.0);
        assert!(SqcImprovedScheme
            .derive(&no_tau, &PresetInputs::default())
            .is_err());
        // sqc-proj never needs tau.
        assert!(SqcProjScheme.derive(&no_tau, &PresetInputs::default()).is_ok());
    }
}
