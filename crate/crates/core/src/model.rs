//! Objective models and sample-based hypothesis checkers.
//!
//! A model bundles an objective with its *declared* analytical constants
//! (smoothness, curvature modulus, quasar parameter, stochastic growth) and
//! its optimum. Constants are declared, never estimated: the parameter
//! schemes consume them as given, and the checkers in this module exist to
//! falsify bad declarations on sampled points rather than to fit values.
//!
//! The optimum data (`f_star` and the minimizer) is diagnostic: iteration
//! code never reads it to steer a trajectory, only to report gaps and to
//! evaluate Lyapunov functions.

use crate::geometry::ConvexSet;
use ndarray::Array1;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::sync::Arc;
use thiserror::Error;

/// Declared analytical constants of an objective.
///
/// `None` means the model makes no claim; operations that need a missing
/// constant fail with [`ModelError::MissingConstant`] instead of guessing.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Constants {
    /// Gradient Lipschitz constant L.
    pub lipschitz: Option<f64>,
    /// Curvature modulus mu of the PL or quasar-convexity inequality.
    pub mu: Option<f64>,
    /// Quasar-convexity parameter tau in (0, 1].
    pub tau: Option<f64>,
    /// Stochastic growth constant rho >= 1; exactly 1 for deterministic
    /// gradient oracles.
    pub rho: f64,
}

impl Constants {
    pub fn deterministic(lipschitz: f64, mu: f64, tau: f64) -> Self {
        Self {
            lipschitz: Some(lipschitz),
            mu: Some(mu),
            tau: Some(tau),
            rho: 1.0,
        }
    }

    pub fn require(&self, which: ConstantKind) -> Result<f64, ModelError> {
        let v = match which {
            ConstantKind::Lipschitz => self.lipschitz,
            ConstantKind::Mu => self.mu,
            ConstantKind::Tau => self.tau,
            ConstantKind::Rho => Some(self.rho),
        };
        v.ok_or(ModelError::MissingConstant(which))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConstantKind {
    Lipschitz,
    Mu,
    Tau,
    Rho,
}

impl fmt::Display for ConstantKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ConstantKind::Lipschitz => "L",
            ConstantKind::Mu => "mu",
            ConstantKind::Tau => "tau",
            ConstantKind::Rho => "rho",
        };
        f.write_str(s)
    }
}

/// Where the objective attains its infimum.
#[derive(Clone)]
pub enum Minimizer {
    /// Unique minimizer point.
    Point(Array1<f64>),
    /// Set of minimizers (degenerate objectives).
    Set(Arc<dyn ConvexSet>),
}

impl Minimizer {
    /// Projection of `x` onto the minimizer (the point itself, or the
    /// metric projection onto the set).
    pub fn project(&self, x: &Array1<f64>) -> Array1<f64> {
        match self {
            Minimizer::Point(p) => p.clone(),
            Minimizer::Set(s) => s.project(x),
        }
    }

    pub fn distance_sq(&self, x: &Array1<f64>) -> f64 {
        let p = self.project(x);
        let d = x - &p;
        d.dot(&d)
    }

    pub fn point(&self) -> Option<&Array1<f64>> {
        match self {
            Minimizer::Point(p) => Some(p),
            Minimizer::Set(_) => None,
        }
    }

    pub fn set(&self) -> Option<&Arc<dyn ConvexSet>> {
        match self {
            Minimizer::Point(_) => None,
            Minimizer::Set(s) => Some(s),
        }
    }
}

impl fmt::Debug for Minimizer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Minimizer::Point(p) => write!(f, "Point({p})"),
            Minimizer::Set(s) => write!(f, "Set(dim={})", s.dim()),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Optimum {
    pub f_star: f64,
    pub minimizer: Minimizer,
}

/// An objective with declared constants and optimum.
///
/// `num_components > 0` marks a finite-sum model whose stochastic oracle
/// returns the gradient of one uniformly drawn component; the full gradient
/// must equal the exact average of the component gradients (unbiasedness is
/// structural, not approximate).
pub trait Objective: Send + Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &Array1<f64>) -> f64;
    fn gradient(&self, x: &Array1<f64>) -> Array1<f64>;
    fn constants(&self) -> &Constants;
    fn optimum(&self) -> &Optimum;

    /// Number of finite-sum components; 0 means the oracle is deterministic.
    fn num_components(&self) -> usize {
        0
    }

    /// Gradient of component `i`. Only meaningful for `i < num_components()`.
    fn component_gradient(&self, _i: usize, x: &Array1<f64>) -> Array1<f64> {
        self.gradient(x)
    }

    fn f_gap(&self, x: &Array1<f64>) -> f64 {
        self.value(x) - self.optimum().f_star
    }
}

/// One stochastic gradient draw.
#[derive(Clone, Debug)]
pub struct GradientSample {
    pub grad: Array1<f64>,
    /// Index of the drawn component; `None` for deterministic oracles.
    pub component: Option<usize>,
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("model does not declare the constant {0}")]
    MissingConstant(ConstantKind),
    #[error("point has dimension {got}, model lives in R^{expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("operation requires a finite-sum model, this oracle is deterministic")]
    NotFiniteSum,
    #[error(
        "declared optimum is not a lower bound: f({x}) = {f_x} < f_star = {f_star}"
    )]
    OptimumInvalid { x: Array1<f64>, f_x: f64, f_star: f64 },
    #[error(
        "growth condition violated at {x}: full gradient vanishes while \
         component gradients have mean square {mean_sq:.3e}"
    )]
    GrowthViolated { x: Array1<f64>, mean_sq: f64 },
    #[error("no probe point had a usable gradient (all vanished)")]
    NoUsableProbes,
    #[error("assumption {kind:?} needs a minimizer {needed}, model declares a {got}")]
    WrongMinimizerKind {
        kind: AssumptionKind,
        needed: &'static str,
        got: &'static str,
    },
    #[error(
        "step size gamma = {gamma} violates the descent hypothesis gamma <= 1/(L rho) = {max}"
    )]
    StepTooLarge { gamma: f64, max: f64 },
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
}

/// Draw one stochastic gradient: the full gradient for deterministic models,
/// or the gradient of a uniformly chosen component for finite sums.
pub fn sample_stochastic_gradient<R: Rng + ?Sized>(
    model: &dyn Objective,
    x: &Array1<f64>,
    rng: &mut R,
) -> Result<GradientSample, ModelError> {
    if x.len() != model.dim() {
        return Err(ModelError::DimensionMismatch {
            expected: model.dim(),
            got: x.len(),
        });
    }
    let n = model.num_components();
    if n == 0 {
        Ok(GradientSample {
            grad: model.gradient(x),
            component: None,
        })
    } else {
        let i = rng.random_range(0..n);
        Ok(GradientSample {
            grad: model.component_gradient(i, x),
            component: Some(i),
        })
    }
}

/// Threshold below which a gradient counts as vanished for growth-ratio
/// purposes, scaled by the declared smoothness and the point's size.
fn vanish_threshold(model: &dyn Objective, x: &Array1<f64>) -> f64 {
    let l = model.constants().lipschitz.unwrap_or(1.0);
    1e-12 * l * (1.0 + x.dot(x).sqrt())
}

/// Empirical growth ratio `max_x mean_i |grad f_i(x)|^2 / |grad f(x)|^2`
/// over the probe points.
///
/// Probes where every gradient vanishes are skipped; a probe where the full
/// gradient vanishes but component gradients do not certifies that no finite
/// growth constant exists and is reported as an error.
pub fn estimate_rho(
    model: &dyn Objective,
    probes: &[Array1<f64>],
) -> Result<f64, ModelError> {
    let n = model.num_components();
    if n == 0 {
        return Err(ModelError::NotFiniteSum);
    }
    let mut best: Option<f64> = None;
    for x in probes {
        if x.len() != model.dim() {
            return Err(ModelError::DimensionMismatch {
                expected: model.dim(),
                got: x.len(),
            });
        }
        let g = model.gradient(x);
        let g_sq = g.dot(&g);
        let mean_sq = (0..n)
            .map(|i| {
                let gi = model.component_gradient(i, x);
                gi.dot(&gi)
            })
            .sum::<f64>()
            / n as f64;
        let thr = vanish_threshold(model, x);
        if g_sq.sqrt() <= thr {
            if mean_sq.sqrt() > thr {
                return Err(ModelError::GrowthViolated {
                    x: x.clone(),
                    mean_sq,
                });
            }
            continue;
        }
        let ratio = mean_sq / g_sq;
        best = Some(best.map_or(ratio, |b: f64| b.max(ratio)));
    }
    // The ratio is >= 1 analytically (Jensen); clamp rounding noise.
    best.map(|r| r.max(1.0)).ok_or(ModelError::NoUsableProbes)
}

/// The pointwise inequalities a model can be checked against.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssumptionKind {
    /// `|grad f(x)|^2 >= 2 mu (f(x) - f_star)`.
    Pl,
    /// `f_star >= f(x) + (1/tau) <grad f(x), x_star - x> + (mu/2) |x - x_star|^2`.
    Sqc,
    /// Projected variant: `x_star` replaced by the projection of `x` onto the
    /// minimizer set, with tau = 1.
    SqcProj,
    /// Quadratic growth `f(x) - f_star >= mu tau / (2 (2 - tau)) dist(x)^2`.
    Qg,
    /// Smoothness upper bound over ordered sample pairs.
    LSmooth,
}

/// Which sample witnessed the worst margin.
#[derive(Clone, Debug)]
pub enum Witness {
    Point(Array1<f64>),
    Pair(Array1<f64>, Array1<f64>),
}

#[derive(Clone, Debug)]
pub struct AssumptionReport {
    pub kind: AssumptionKind,
    pub holds: bool,
    /// Minimum slack of the defining inequality over the samples;
    /// nonnegative (up to the tolerance) when the assumption holds.
    pub worst_margin: f64,
    pub witness: Option<Witness>,
    pub n_checked: usize,
}

/// Check a declared assumption on sampled points.
///
/// `tol` absorbs rounding in equality cases: the assumption holds when the
/// worst margin is at least `-tol`. Samples lying below the declared
/// `f_star` invalidate the optimum and fail the check outright.
pub fn check_assumption(
    model: &dyn Objective,
    kind: AssumptionKind,
    samples: &[Array1<f64>],
    tol: f64,
) -> Result<AssumptionReport, ModelError> {
    let opt = model.optimum();
    let f_star = opt.f_star;
    for x in samples {
        if x.len() != model.dim() {
            return Err(ModelError::DimensionMismatch {
                expected: model.dim(),
                got: x.len(),
            });
        }
        let fx = model.value(x);
        if fx < f_star - 1e-9 * (1.0 + f_star.abs()) {
            return Err(ModelError::OptimumInvalid {
                x: x.clone(),
                f_x: fx,
                f_star,
            });
        }
    }

    let mut worst: Option<(f64, Witness)> = None;
    let mut n_checked = 0usize;
    let mut consider = |margin: f64, w: Witness| {
        n_checked += 1;
        if worst.as_ref().map_or(true, |(m, _)| margin < *m) {
            worst = Some((margin, w));
        }
    };

    match kind {
        AssumptionKind::Pl => {
            let mu = model.constants().require(ConstantKind::Mu)?;
            for x in samples {
                let g = model.gradient(x);
                let margin = g.dot(&g) - 2.0 * mu * (model.value(x) - f_star);
                consider(margin, Witness::Point(x.clone()));
            }
        }
        AssumptionKind::Sqc => {
            let mu = model.constants().require(ConstantKind::Mu)?;
            let tau = model.constants().require(ConstantKind::Tau)?;
            let x_star = opt.minimizer.point().ok_or(ModelError::WrongMinimizerKind {
                kind,
                needed: "point",
                got: "set",
            })?;
            for x in samples {
                let g = model.gradient(x);
                let d = x_star - x;
                let margin = f_star
                    - model.value(x)
                    - g.dot(&d) / tau
                    - 0.5 * mu * d.dot(&d);
                consider(margin, Witness::Point(x.clone()));
            }
        }
        AssumptionKind::SqcProj => {
            let mu = model.constants().require(ConstantKind::Mu)?;
            let set = opt.minimizer.set().ok_or(ModelError::WrongMinimizerKind {
                kind,
                needed: "set",
                got: "point",
            })?;
            for x in samples {
                let g = model.gradient(x);
                let p = set.project(x);
                let d = &p - x;
                let margin = f_star - model.value(x) - g.dot(&d) - 0.5 * mu * d.dot(&d);
                consider(margin, Witness::Point(x.clone()));
            }
        }
        AssumptionKind::Qg => {
            let mu = model.constants().require(ConstantKind::Mu)?;
            let tau = model.constants().require(ConstantKind::Tau)?;
            let c = mu * tau / (2.0 * (2.0 - tau));
            for x in samples {
                let margin =
                    model.value(x) - f_star - c * opt.minimizer.distance_sq(x);
                consider(margin, Witness::Point(x.clone()));
            }
        }
        AssumptionKind::LSmooth => {
            let l = model.constants().require(ConstantKind::Lipschitz)?;
            if samples.len() < 2 {
                return Err(ModelError::TooFewSamples {
                    needed: 2,
                    got: samples.len(),
                });
            }
            // Consecutive pairs in both orders; the inequality is asymmetric.
            for w in samples.windows(2) {
                for (x, y) in [(&w[0], &w[1]), (&w[1], &w[0])] {
                    let gy = model.gradient(y);
                    let d = x - y;
                    let margin = 0.5 * l * d.dot(&d)
                        - (model.value(x) - model.value(y) - gy.dot(&d));
                    consider(margin, Witness::Pair(x.clone(), y.clone()));
                }
            }
        }
    }

    let (worst_margin, witness) = match worst {
        Some((m, w)) => (m, Some(w)),
        None => (f64::INFINITY, None),
    };
    Ok(AssumptionReport {
        kind,
        holds: worst_margin >= -tol,
        worst_margin,
        witness,
        n_checked,
    })
}

pub const DEFAULT_ASSUMPTION_TOL: f64 = 1e-9;

#[derive(Clone, Debug)]
pub struct DescentReport {
    /// Mean of `f(x - gamma g) - f(x)` over the stochastic gradient `g`.
    pub lhs_mean: f64,
    /// Standard error of the mean; 0 when the expectation was enumerated.
    pub lhs_se: f64,
    /// `gamma (L rho gamma / 2 - 1) |grad f(x)|^2`.
    pub rhs: f64,
    pub holds: bool,
    /// True when the expectation was computed exactly (deterministic oracle
    /// or exhaustive enumeration of components).
    pub exact: bool,
    pub n_samples: usize,
}

/// Components up to this count are enumerated exactly; larger finite sums
/// fall back to Monte Carlo.
pub const DESCENT_ENUMERATION_LIMIT: usize = 64;

/// Check the expected one-step descent inequality
/// `E[f(x - gamma g) - f(x)] <= gamma (L rho gamma / 2 - 1) |grad f(x)|^2`
/// at a single point for `gamma <= 1/(L rho)`.
pub fn check_descent_lemma<R: Rng + ?Sized>(
    model: &dyn Objective,
    gamma: f64,
    x: &Array1<f64>,
    mc_samples: usize,
    rng: &mut R,
) -> Result<DescentReport, ModelError> {
    if x.len() != model.dim() {
        return Err(ModelError::DimensionMismatch {
            expected: model.dim(),
            got: x.len(),
        });
    }
    let l = model.constants().require(ConstantKind::Lipschitz)?;
    let rho = model.constants().rho;
    let max_gamma = 1.0 / (l * rho);
    if !(gamma > 0.0) || gamma > max_gamma * (1.0 + 1e-12) {
        return Err(ModelError::StepTooLarge {
            gamma,
            max: max_gamma,
        });
    }

    let fx = model.value(x);
    let step_value = |g: &Array1<f64>| model.value(&(x - &(g * gamma))) - fx;

    let n = model.num_components();
    let (lhs_mean, lhs_se, exact, n_used) = if n == 0 {
        (step_value(&model.gradient(x)), 0.0, true, 1)
    } else if n <= DESCENT_ENUMERATION_LIMIT {
        let mean = (0..n)
            .map(|i| step_value(&model.component_gradient(i, x)))
            .sum::<f64>()
            / n as f64;
        (mean, 0.0, true, n)
    } else {
        if mc_samples < 2 {
            return Err(ModelError::TooFewSamples {
                needed: 2,
                got: mc_samples,
            });
        }
        let mut mean = 0.0;
        let mut m2 = 0.0;
        for j in 0..mc_samples {
            let s = sample_stochastic_gradient(model, x, rng)?;
            let v = step_value(&s.grad);
            let delta = v - mean;
            mean += delta / (j + 1) as f64;
            m2 += delta * (v - mean);
        }
        let var = m2 / (mc_samples - 1) as f64;
        (mean, (var / mc_samples as f64).sqrt(), false, mc_samples)
    };

    let g = model.gradient(x);
    let rhs = gamma * (l * rho * gamma / 2.0 - 1.0) * g.dot(&g);
    // Absolute slack covers the exact-equality case, where lhs == rhs up to
    // rounding and the standard error is zero.
    let holds = lhs_mean <= rhs + 3.0 * lhs_se + 1e-12 * (1.0 + rhs.abs());
    Ok(DescentReport {
        lhs_mean,
        lhs_se,
        rhs,
        holds,
        exact,
        n_samples: n_used,
    })
}
