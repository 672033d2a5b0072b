//! Deterministic reference methods: plain gradient descent and the
//! classical three-line momentum scheme
//!
//!   y_k = alpha_k x_k + (1 - alpha_k) z_k
//!   x_{k+1} = y_k - s grad f(y_k)
//!   z_{k+1} = beta_k z_k + (1 - beta_k) y_k - eta_k grad f(y_k)
//!
//! which reduces to gradient descent when alpha_k = 1 for all k. The random
//! process is compared against these on equal objectives.

use crate::model::Objective;
use ndarray::Array1;
use thiserror::Error;

/// Per-iteration schedule value, indexed by k.
pub type Schedule = Box<dyn Fn(u64) -> f64 + Send + Sync>;

pub enum BaselineMethod {
    GradientDescent,
    Nesterov {
        alpha: Schedule,
        beta: Schedule,
        eta: Schedule,
    },
}

impl BaselineMethod {
    /// Momentum scheme with constant sequences.
    pub fn nesterov_const(alpha: f64, beta: f64, eta: f64) -> Self {
        BaselineMethod::Nesterov {
            alpha: Box::new(move |_| alpha),
            beta: Box::new(move |_| beta),
            eta: Box::new(move |_| eta),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            BaselineMethod::GradientDescent => "gd",
            BaselineMethod::Nesterov { .. } => "nesterov",
        }
    }
}

pub struct BaselineParams {
    pub method: BaselineMethod,
    /// Gradient step size s.
    pub step: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BaselineRecord {
    pub k: u64,
    pub f_gap: f64,
}

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error("invalid baseline parameters: {0}")]
    InvalidParams(String),
    #[error(
        "baseline diverged at step {step} (objective gap {gap:.3e}); partial log retained"
    )]
    Diverged {
        step: u64,
        gap: f64,
        partial: Vec<BaselineRecord>,
    },
}

struct Iterates {
    x: Array1<f64>,
    z: Array1<f64>,
}

fn advance(
    model: &dyn Objective,
    params: &BaselineParams,
    it: &mut Iterates,
    k: u64,
) -> Result<(), BaselineError> {
    match &params.method {
        BaselineMethod::GradientDescent => {
            let g = model.gradient(&it.x);
            it.x = &it.x - &(&g * params.step);
        }
        BaselineMethod::Nesterov { alpha, beta, eta } => {
            let a = alpha(k);
            if !(0.0..=1.0).contains(&a) {
                return Err(BaselineError::InvalidParams(format!(
                    "alpha_{k} = {a} outside [0, 1]"
                )));
            }
            let b = beta(k);
            let e = eta(k);
            let y = &(&it.x * a) + &(&it.z * (1.0 - a));
            let g = model.gradient(&y);
            it.x = &y - &(&g * params.step);
            it.z = &(&it.z * b) + &(&y * (1.0 - b)) - &(&g * e);
        }
    }
    Ok(())
}

/// Iterate `n_steps` times from `x0` (momentum starts with z0 = x0) and log
/// the objective gap at k = 0..=n_steps.
pub fn run_baseline(
    model: &dyn Objective,
    params: &BaselineParams,
    x0: &Array1<f64>,
    n_steps: u64,
) -> Result<Vec<BaselineRecord>, BaselineError> {
    if !(params.step > 0.0 && params.step.is_finite()) {
        return Err(BaselineError::InvalidParams(format!(
            "step size must be positive, got {}",
            params.step
        )));
    }
    let gap0 = model.f_gap(x0);
    let guard = if gap0 > 0.0 {
        crate::process::DIVERGENCE_FACTOR * gap0
    } else {
        f64::INFINITY
    };
    let mut it = Iterates {
        x: x0.clone(),
        z: x0.clone(),
    };
    let mut records = Vec::with_capacity(n_steps as usize + 1);
    records.push(BaselineRecord { k: 0, f_gap: gap0 });
    for k in 0..n_steps {
        advance(model, params, &mut it, k)?;
        let gap = model.f_gap(&it.x);
        if !gap.is_finite() || gap > guard {
            return Err(BaselineError::Diverged {
                step: k + 1,
                gap,
                partial: records,
            });
        }
        records.push(BaselineRecord { k: k + 1, f_gap: gap });
    }
    Ok(records)
}

/// First iteration k with `f_gap <= target_gap`, searching up to
/// `max_steps`; `None` when the target is not reached. Early-stops, so it
/// is cheap even when the answer is far out.
pub fn iterations_to_gap(
    model: &dyn Objective,
    params: &BaselineParams,
    x0: &Array1<f64>,
    target_gap: f64,
    max_steps: u64,
) -> Result<Option<u64>, BaselineError> {
    if !(params.step > 0.0 && params.step.is_finite()) {
        return Err(BaselineError::InvalidParams(format!(
            "step size must be positive, got {}",
            params.step
        )));
    }
    let gap0 = model.f_gap(x0);
    if gap0 <= target_gap {
        return Ok(Some(0));
    }
    let guard = crate::process::DIVERGENCE_FACTOR * gap0;
    let mut it = Iterates {
        x: x0.clone(),
        z: x0.clone(),
    };
    for k in 0..max_steps {
        advance(model, params, &mut it, k)?;
        let gap = model.f_gap(&it.x);
        if !gap.is_finite() || gap > guard {
            return Err(BaselineError::Diverged {
                step: k + 1,
                gap,
                partial: Vec::new(),
            });
        }
        if gap <= target_gap {
            return Ok(Some(k + 1));
        }
    }
    Ok(None)
}
