//! Convergence diagnostics: Lyapunov evaluators, supermartingale Monte Carlo
//! probes, tail-probability calculators, and empirical rate fitting.
//!
//! Each convergence guarantee certifies that some weighted energy
//! `phi(t, x, z) = e^{rate t} * (bracket of state functionals)` is a
//! supermartingale along the process, which gives `E[phi(T_k)] <= phi(0)`.
//! That expectation inequality is the testable consequence; everything here
//! estimates it, transfers it to high-probability statements, or fits
//! observed decay rates against the certified ones.

use crate::geometry::ConvexSet;
use crate::model::{ConstantKind, ModelError, Objective};
use crate::process::{
    cna_step, run_rng, ContinuizedParams, ProcessError, ProcessState,
};
use ndarray::Array1;
use rand::Rng;
use rand_distr::{Distribution, Gamma};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("argument out of domain: {0}")]
    Domain(String),
    #[error("{0}")]
    MissingData(String),
    #[error("rate fit failed: {0}")]
    Fit(String),
    #[error("{source}")]
    Process {
        #[from]
        source: ProcessError,
    },
    #[error("{source}")]
    Model {
        #[from]
        source: ModelError,
    },
}

/// The three energy shapes extracted from the convergence proofs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LyapunovKind {
    /// `e^{(mu gamma/2) t} [f-gap + 1/2 |x-z|^2]`; needs only gradient
    /// dominance, no minimizer location.
    Pl,
    /// Three-term energy with a negative `|x - x*|^2` part; the negative
    /// term is what buys the sqrt(2)(1-eps) rate improvement.
    Sqc,
    /// Projection variant for set-valued minimizers:
    /// `e^{eta t} [f-gap + (alpha mu / 2) |pi(x) - z|^2]`.
    SqcProj,
}

impl LyapunovKind {
    pub fn name(self) -> &'static str {
        match self {
            LyapunovKind::Pl => "pl",
            LyapunovKind::Sqc => "sqc",
            LyapunovKind::SqcProj => "sqc_proj",
        }
    }
}

/// A weighted energy along the process. `value` includes the exponential
/// time weight; `bracket` is the state functional it multiplies.
pub trait Lyapunov: Send + Sync {
    fn kind(&self) -> LyapunovKind;
    /// Exponent of the `e^{rate t}` weight.
    fn rate(&self) -> f64;
    fn bracket(&self, x: &Array1<f64>, z: &Array1<f64>) -> f64;
    fn value(&self, state: &ProcessState) -> f64 {
        (self.rate() * state.t).exp() * self.bracket(&state.x, &state.z)
    }
}

/// `e^{theta t} [f-gap + 1/2 |x - z|^2]` with theta = mu gamma / 2.
pub struct PlLyapunov {
    model: Arc<dyn Objective>,
    pub theta: f64,
}

impl Lyapunov for PlLyapunov {
    fn kind(&self) -> LyapunovKind {
        LyapunovKind::Pl
    }
    fn rate(&self) -> f64 {
        self.theta
    }
    fn bracket(&self, x: &Array1<f64>, z: &Array1<f64>) -> f64 {
        let d = x - z;
        self.model.f_gap(x) + 0.5 * d.dot(&d)
    }
}

/// `e^{2 eta' t} [f-gap + mu/(2-tau) |z-x*|^2 - (1-eps) mu tau/(2(2-tau)) |x-x*|^2]`.
pub struct SqcLyapunov {
    model: Arc<dyn Objective>,
    x_star: Array1<f64>,
    pub eta_prime: f64,
    pub epsilon: f64,
    /// mu / (2 - tau), the coefficient on `|z - x*|^2`.
    pub z_coeff: f64,
    /// (1 - eps) mu tau / (2 (2 - tau)), subtracted with `|x - x*|^2`.
    pub x_coeff: f64,
}

impl SqcLyapunov {
    /// Pointwise lower bound `eps * e^{2 eta' t} * f-gap <= phi`, a
    /// consequence of quadratic growth; exposed so probes can assert the
    /// sandwich on logged states.
    pub fn gap_lower_bound(&self, state: &ProcessState) -> f64 {
        self.epsilon * (self.rate() * state.t).exp() * self.model.f_gap(&state.x)
    }

    /// Pointwise upper bound: the bracket without its negative term.
    pub fn two_term_upper_bound(&self, state: &ProcessState) -> f64 {
        let dz = &state.z - &self.x_star;
        (self.rate() * state.t).exp()
            * (self.model.f_gap(&state.x) + self.z_coeff * dz.dot(&dz))
    }
}

impl Lyapunov for SqcLyapunov {
    fn kind(&self) -> LyapunovKind {
        LyapunovKind::Sqc
    }
    fn rate(&self) -> f64 {
        2.0 * self.eta_prime
    }
    fn bracket(&self, x: &Array1<f64>, z: &Array1<f64>) -> f64 {
        let dz = z - &self.x_star;
        let dx = x - &self.x_star;
        self.model.f_gap(x) + self.z_coeff * dz.dot(&dz) - self.x_coeff * dx.dot(&dx)
    }
}

/// `e^{eta t} [f-gap + (eta / gamma') / 2 |pi(x) - z|^2]`; eta/gamma' equals
/// alpha mu under the projection scheme.
pub struct SqcProjLyapunov {
    model: Arc<dyn Objective>,
    set: Arc<dyn ConvexSet>,
    pub eta: f64,
    /// (eta / gamma') / 2, the coefficient on `|pi(x) - z|^2`.
    pub set_coeff: f64,
}

impl Lyapunov for SqcProjLyapunov {
    fn kind(&self) -> LyapunovKind {
        LyapunovKind::SqcProj
    }
    fn rate(&self) -> f64 {
        self.eta
    }
    fn bracket(&self, x: &Array1<f64>, z: &Array1<f64>) -> f64 {
        let d = &self.set.project(x) - z;
        self.model.f_gap(x) + self.set_coeff * d.dot(&d)
    }
}

/// Build the energy matching `kind` from the model's constants and the
/// process parameters. `epsilon` is required for [`LyapunovKind::Sqc`]; it
/// must be the value the parameters were derived with.
pub fn build_lyapunov(
    kind: LyapunovKind,
    model: &Arc<dyn Objective>,
    params: &ContinuizedParams,
    epsilon: Option<f64>,
) -> Result<Arc<dyn Lyapunov>, AnalysisError> {
    match kind {
        LyapunovKind::Pl => {
            let mu = model.constants().require(ConstantKind::Mu)?;
            Ok(Arc::new(PlLyapunov {
                model: Arc::clone(model),
                theta: mu * params.gamma / 2.0,
            }))
        }
        LyapunovKind::Sqc => {
            let mu = model.constants().require(ConstantKind::Mu)?;
            let tau = model.constants().require(ConstantKind::Tau)?;
            let eps = epsilon.ok_or_else(|| {
                AnalysisError::MissingData(
                    "the sqc energy needs the epsilon the parameters were derived with".into(),
                )
            })?;
            if !(0.0 < eps && eps < 1.0) {
                return Err(AnalysisError::Domain(format!(
                    "epsilon must lie in (0, 1), got {eps}"
                )));
            }
            let x_star = model
                .optimum()
                .minimizer
                .point()
                .ok_or_else(|| {
                    AnalysisError::MissingData(
                        "the sqc energy measures distance to a unique minimizer; this \
                         model declares a minimizer set"
                            .into(),
                    )
                })?
                .clone();
            Ok(Arc::new(SqcLyapunov {
                model: Arc::clone(model),
                x_star,
                eta_prime: params.eta_prime,
                epsilon: eps,
                z_coeff: mu / (2.0 - tau),
                x_coeff: (1.0 - eps) * mu * tau / (2.0 * (2.0 - tau)),
            }))
        }
        LyapunovKind::SqcProj => {
            if !(params.gamma_prime > 0.0) {
                return Err(AnalysisError::Domain(
                    "the projection energy needs gamma' > 0 (its coefficient is eta/gamma')"
                        .into(),
                ));
            }
            let set = Arc::clone(model.optimum().minimizer.set().ok_or_else(|| {
                AnalysisError::MissingData(
                    "the projection energy needs a minimizer set; this model declares \
                     a single point"
                        .into(),
                )
            })?);
            Ok(Arc::new(SqcProjLyapunov {
                model: Arc::clone(model),
                set,
                eta: params.eta,
                set_coeff: params.eta / params.gamma_prime / 2.0,
            }))
        }
    }
}

/// Result of the Monte Carlo supermartingale check `E[phi(T_k)] <= phi(0)`.
#[derive(Clone, Debug, Serialize)]
pub struct SupermartingaleReport {
    pub phi0: f64,
    /// Step indices 1..=n_steps.
    pub ks: Vec<u64>,
    pub mean_phi: Vec<f64>,
    pub se_phi: Vec<f64>,
    pub n_runs: u64,
    /// Diverged runs dropped from the averages.
    pub n_excluded: u64,
    /// Largest violation of `mean <= phi0 + 3 se` over k (negative = slack).
    pub worst_excess: f64,
    pub holds: bool,
}

/// Fraction of diverged runs above which the probe fails outright.
pub const MAX_EXCLUDED_FRACTION: f64 = 0.01;

/// Estimate `E[phi(T_k)]` for k = 1..=n_steps over `n_runs` independent
/// trajectories and test it against `phi(0)` within 3 standard errors at
/// every k. Diverged runs are excluded and counted; more than 1% exclusions
/// fails the probe regardless of the means.
pub fn supermartingale_probe(
    model: &Arc<dyn Objective>,
    params: &ContinuizedParams,
    lyapunov: &dyn Lyapunov,
    x0: &Array1<f64>,
    n_steps: u64,
    n_runs: u64,
    base_seed: u64,
) -> Result<SupermartingaleReport, AnalysisError> {
    params.validate().map_err(AnalysisError::from)?;
    if n_runs == 0 || n_steps == 0 {
        return Err(AnalysisError::Domain(
            "the probe needs n_runs >= 1 and n_steps >= 1".into(),
        ));
    }
    let phi0 = lyapunov.value(&ProcessState::coupled(x0.clone()));
    let guard_base = model.f_gap(x0);

    let per_run: Vec<Option<Vec<f64>>> = (0..n_runs)
        .into_par_iter()
        .map(|run| {
            let mut rng = run_rng(base_seed, run);
            let mut state = ProcessState::coupled(x0.clone());
            let guard = if guard_base > 0.0 {
                crate::process::DIVERGENCE_FACTOR * guard_base
            } else {
                f64::INFINITY
            };
            let mut phis = Vec::with_capacity(n_steps as usize);
            for _ in 0..n_steps {
                if cna_step(&mut state, model.as_ref(), params, &mut rng).is_err() {
                    return None;
                }
                let gap = model.f_gap(&state.x);
                if !gap.is_finite() || gap > guard {
                    return None;
                }
                phis.push(lyapunov.value(&state));
            }
            Some(phis)
        })
        .collect();

    let mut mean = vec![0.0_f64; n_steps as usize];
    let mut m2 = vec![0.0_f64; n_steps as usize];
    let mut included = 0u64;
    let mut excluded = 0u64;
    for run in per_run {
        match run {
            None => excluded += 1,
            Some(phis) => {
                included += 1;
                let n = included as f64;
                for (i, phi) in phis.into_iter().enumerate() {
                    let d = phi - mean[i];
                    mean[i] += d / n;
                    m2[i] += d * (phi - mean[i]);
                }
            }
        }
    }
    if included == 0 {
        return Err(AnalysisError::Domain(
            "every run diverged; nothing to average".into(),
        ));
    }
    let se: Vec<f64> = m2
        .iter()
        .map(|&v| {
            if included > 1 {
                (v / (included - 1) as f64 / included as f64).sqrt()
            } else {
                0.0
            }
        })
        .collect();
    // Absolute slack keeps the trivial phi == 0 start from failing on noise.
    let tol = 1e-12 * (1.0 + phi0.abs());
    let worst_excess = mean
        .iter()
        .zip(&se)
        .map(|(m, s)| m - phi0 - 3.0 * s)
        .fold(f64::NEG_INFINITY, f64::max);
    let exclusions_ok = (excluded as f64) <= MAX_EXCLUDED_FRACTION * (n_runs as f64);
    Ok(SupermartingaleReport {
        phi0,
        ks: (1..=n_steps).collect(),
        mean_phi: mean,
        se_phi: se,
        n_runs,
        n_excluded: excluded,
        worst_excess,
        holds: exclusions_ok && worst_excess <= tol,
    })
}

/// `P(T_k <= c1 k) <= e^{-(c1 - 1 - ln c1) k}` for the k-th arrival time of
/// a unit-rate Poisson clock. Valid for 0 < c1 <= 1; at c1 = 1 the bound is
/// 1 (vacuous) and it tightens rapidly as c1 decreases.
pub fn chernoff_tail_bound(c1: f64, k: u64) -> Result<f64, AnalysisError> {
    if !(c1 > 0.0 && c1 <= 1.0) {
        return Err(AnalysisError::Domain(format!(
            "the tail bound needs c1 in (0, 1], got {c1}"
        )));
    }
    if k == 0 {
        return Err(AnalysisError::Domain("the tail bound needs k >= 1".into()));
    }
    let exponent = (c1 - 1.0 - c1.ln()) * k as f64;
    Ok((-exponent).exp())
}

/// One cell of the empirical tail check.
#[derive(Clone, Debug, Serialize)]
pub struct TailCheck {
    pub k: u64,
    pub c1: f64,
    pub bound: f64,
    pub empirical: f64,
    /// bound - empirical; nonnegative when the bound dominates.
    pub slack: f64,
    pub holds: bool,
}

/// Compare the tail bound against the empirical frequency of
/// `T_k <= c1 k` over `n_samples` draws of T_k (a Gamma(k, 1) variable).
/// One substream per k, so the report is deterministic in `seed`.
pub fn chernoff_empirical_check(
    ks: &[u64],
    c1s: &[f64],
    n_samples: u64,
    seed: u64,
) -> Result<Vec<TailCheck>, AnalysisError> {
    if n_samples == 0 {
        return Err(AnalysisError::Domain("n_samples must be >= 1".into()));
    }
    let per_k: Vec<Result<Vec<TailCheck>, AnalysisError>> = ks
        .par_iter()
        .map(|&k| {
            if k == 0 {
                return Err(AnalysisError::Domain("the tail check needs k >= 1".into()));
            }
            let gamma = Gamma::new(k as f64, 1.0)
                .map_err(|e| AnalysisError::Domain(format!("gamma sampler: {e}")))?;
            let mut rng = run_rng(seed, k);
            let thresholds: Vec<f64> = c1s.iter().map(|&c1| c1 * k as f64).collect();
            let mut counts = vec![0u64; c1s.len()];
            for _ in 0..n_samples {
                let t_k = gamma.sample(&mut rng);
                for (c, &thr) in counts.iter_mut().zip(&thresholds) {
                    if t_k <= thr {
                        *c += 1;
                    }
                }
            }
            c1s.iter()
                .zip(&counts)
                .map(|(&c1, &count)| {
                    let bound = chernoff_tail_bound(c1, k)?;
                    let empirical = count as f64 / n_samples as f64;
                    Ok(TailCheck {
                        k,
                        c1,
                        bound,
                        empirical,
                        slack: bound - empirical,
                        holds: empirical <= bound,
                    })
                })
                .collect()
        })
        .collect();
    let mut out = Vec::with_capacity(ks.len() * c1s.len());
    for cell in per_k {
        out.extend(cell?);
    }
    Ok(out)
}

/// A trajectory-wise consequence of the expectation bound: with probability
/// at least `probability`, the gap at step k is below `bound`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct Certificate {
    pub probability: f64,
    pub bound: f64,
    /// Set when the probability term is nonpositive: the certificate says
    /// nothing at this (c0, c1, k).
    pub vacuous: bool,
}

/// Combine the Markov step (confidence 1 - 1/c0) with the arrival-time tail
/// (the Chernoff term): with probability 1 - 1/c0 - e^{-(c1-1-ln c1)k},
/// the step-k gap is at most c0 K0 e^{-beta c1 k}.
pub fn high_prob_certificate(
    beta: f64,
    k0: f64,
    c0: f64,
    c1: f64,
    k: u64,
) -> Result<Certificate, AnalysisError> {
    if !(beta > 0.0) {
        return Err(AnalysisError::Domain(format!(
            "the certificate needs a positive rate, got beta = {beta}"
        )));
    }
    if !(k0 >= 0.0) {
        return Err(AnalysisError::Domain(format!(
            "the initial constant must be nonnegative, got {k0}"
        )));
    }
    if !(c0 > 1.0) {
        return Err(AnalysisError::Domain(format!(
            "the certificate needs c0 > 1 (its confidence term is 1 - 1/c0), got {c0}"
        )));
    }
    let tail = chernoff_tail_bound(c1, k)?;
    let probability = 1.0 - 1.0 / c0 - tail;
    Ok(Certificate {
        probability,
        bound: c0 * k0 * (-beta * c1 * k as f64).exp(),
        vacuous: probability <= 0.0,
    })
}

/// Least-squares fit of `ln(gap_k) = intercept - slope * k`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct RateFit {
    /// Decay exponent per step; positive means the series shrinks.
    pub slope: f64,
    pub intercept: f64,
    /// 1.96 standard errors of the slope, from the residual variance.
    pub ci95: f64,
    pub n_used: usize,
}

/// Minimum number of points a rate fit needs.
pub const MIN_FIT_POINTS: usize = 5;

/// Fit a per-step exponential decay rate to a positive gap series. The
/// series is truncated at the first nonpositive or non-finite entry (the
/// log is undefined past it).
pub fn empirical_rate_fit(ks: &[u64], gaps: &[f64]) -> Result<RateFit, AnalysisError> {
    if ks.len() != gaps.len() {
        return Err(AnalysisError::Fit(format!(
            "{} indices against {} gaps",
            ks.len(),
            gaps.len()
        )));
    }
    let usable = gaps
        .iter()
        .position(|&g| !(g > 0.0 && g.is_finite()))
        .unwrap_or(gaps.len());
    if usable < MIN_FIT_POINTS {
        return Err(AnalysisError::Fit(format!(
            "only {usable} positive points before truncation; need at least {MIN_FIT_POINTS}"
        )));
    }
    let n = usable as f64;
    let xs: Vec<f64> = ks[..usable].iter().map(|&k| k as f64).collect();
    let ys: Vec<f64> = gaps[..usable].iter().map(|&g| g.ln()).collect();
    let x_mean = xs.iter().sum::<f64>() / n;
    let y_mean = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - x_mean).powi(2)).sum();
    if sxx == 0.0 {
        return Err(AnalysisError::Fit(
            "all points share one step index; slope undefined".into(),
        ));
    }
    let sxy: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (x - x_mean) * (y - y_mean))
        .sum();
    // ln gap = intercept - slope k, so the regression coefficient is -slope.
    let slope = -sxy / sxx;
    let intercept = y_mean + slope * x_mean;
    let resid_var: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let fitted = intercept - slope * x;
            (y - fitted).powi(2)
        })
        .sum::<f64>()
        / (n - 2.0);
    Ok(RateFit {
        slope,
        intercept,
        ci95: 1.96 * (resid_var / sxx).sqrt(),
        n_used: usable,
    })
}

/// Report of the finite-horizon falsification probe for almost-sure decay.
#[derive(Clone, Debug, Serialize)]
pub struct DecayProbeReport {
    pub c: f64,
    pub k_small: u64,
    pub k_large: u64,
    pub fraction_decreasing: f64,
    pub n_runs: u64,
    pub n_excluded: u64,
    pub holds: bool,
}

/// Finite-horizon probe of the almost-sure statement `gap_k = o(e^{-beta c k})`
/// for c in (0, 1): per run, compare `M(K) = max over k in [K/2, K] of
/// gap_k e^{beta c k}` between two horizons; decay predicts the late-window
/// maximum drops for almost every run. `holds` when the decreasing fraction
/// exceeds `threshold`. Diverged runs count as non-decreasing.
pub fn almost_sure_decay_probe(
    model: &Arc<dyn Objective>,
    params: &ContinuizedParams,
    x0: &Array1<f64>,
    beta: f64,
    c: f64,
    k_small: u64,
    k_large: u64,
    n_runs: u64,
    base_seed: u64,
    threshold: f64,
) -> Result<DecayProbeReport, AnalysisError> {
    params.validate().map_err(AnalysisError::from)?;
    if !(c > 0.0 && c < 1.0) {
        return Err(AnalysisError::Domain(format!(
            "the probe constant must lie in (0, 1), got {c}"
        )));
    }
    if !(beta > 0.0) {
        return Err(AnalysisError::Domain(format!(
            "the probe needs a positive rate, got beta = {beta}"
        )));
    }
    if k_small < 2 || k_large <= k_small {
        return Err(AnalysisError::Domain(
            "horizons must satisfy 2 <= k_small < k_large".into(),
        ));
    }
    if n_runs == 0 {
        return Err(AnalysisError::Domain("n_runs must be >= 1".into()));
    }
    let guard_base = model.f_gap(x0);
    let window_max = |gaps: &[f64], horizon: u64| -> f64 {
        let lo = horizon / 2;
        (lo..=horizon)
            .map(|k| gaps[k as usize - 1] * (beta * c * k as f64).exp())
            .fold(f64::NEG_INFINITY, f64::max)
    };
    let outcomes: Vec<Option<bool>> = (0..n_runs)
        .into_par_iter()
        .map(|run| {
            let mut rng = run_rng(base_seed, run);
            let mut state = ProcessState::coupled(x0.clone());
            let guard = if guard_base > 0.0 {
                crate::process::DIVERGENCE_FACTOR * guard_base
            } else {
                f64::INFINITY
            };
            let mut gaps = Vec::with_capacity(k_large as usize);
            for _ in 0..k_large {
                if cna_step(&mut state, model.as_ref(), params, &mut rng).is_err() {
                    return None;
                }
                let gap = model.f_gap(&state.x);
                if !gap.is_finite() || gap > guard {
                    return None;
                }
                gaps.push(gap);
            }
            let early = window_max(&gaps, k_small);
            let late = window_max(&gaps, k_large);
            Some(late < early || (late == 0.0 && early == 0.0))
        })
        .collect();
    let n_excluded = outcomes.iter().filter(|o| o.is_none()).count() as u64;
    let n_decreasing = outcomes.iter().filter(|o| **o == Some(true)).count() as u64;
    let fraction = n_decreasing as f64 / n_runs as f64;
    Ok(DecayProbeReport {
        c,
        k_small,
        k_large,
        fraction_decreasing: fraction,
        n_runs,
        n_excluded,
        holds: fraction > threshold,
    })
}

/// Mean of `n` unit-exponential arrival sums T_k; the sample analogue of
/// `E[T_k] = k`. Used by tests and the clock diagnostics.
pub fn mean_arrival_time<R: Rng + ?Sized>(k: u64, n: u64, rng: &mut R) -> f64 {
    let mut total = 0.0;
    for _ in 0..n {
        let mut t = 0.0;
        for _ in 0..k {
            t += crate::process::sample_interarrival(rng);
        }
        total += t;
    }
    total / n as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::{build_objective, ObjectiveSpec, Quadratic};
    use ndarray::array;
    use serde_json::json;

    fn quadratic(eigs: Vec<f64>) -> Arc<dyn Objective> {
        Arc::new(Quadratic::new(eigs).unwrap())
    }

    #[test]
    fn pl_energy_hand_value() {
        // theta = mu gamma / 2 = 0.25 with mu = 1, gamma = 0.5; at t = 4,
        // gap 1 and |x-z|^2 = 2 give phi = e * 2.
        let model = quadratic(vec![1.0]);
        let params = ContinuizedParams::new(1.0, 0.0, 0.5, 1.0).unwrap();
        let lyap = build_lyapunov(LyapunovKind::Pl, &model, &params, None).unwrap();
        let state = ProcessState {
            x: array![std::f64::consts::SQRT_2],
            z: array![0.0],
            t: 4.0,
            k: 3,
        };
        let expected = 5.43656365691809047; // 2e
        assert!((lyap.value(&state) - expected).abs() < 1e-12 * expected);
        assert_eq!(lyap.rate(), 0.25);
    }

    #[test]
    fn sqc_energy_hand_value() {
        // tau = 1, eps = 0.5, mu = 1, x* = 0, x = z = 2, gap = 2, t = 0:
        // phi = 2 + 1*4 - 0.25*4 = 5.
        let model = quadratic(vec![1.0]);
        let params = ContinuizedParams::new(1.0, 0.1, 1.0, 1.0).unwrap();
        let lyap = build_lyapunov(LyapunovKind::Sqc, &model, &params, Some(0.5)).unwrap();
        let state = ProcessState {
            x: array![2.0],
            z: array![2.0],
            t: 0.0,
            k: 0,
        };
        assert!((lyap.value(&state) - 5.0).abs() < 1e-12);
        // Weight exponent is 2 eta'.
        assert!((lyap.rate() - 0.2).abs() < 1e-15);
    }

    #[test]
    fn sqc_energy_needs_epsilon_and_a_point_minimizer() {
        let model = quadratic(vec![1.0]);
        let params = ContinuizedParams::new(1.0, 0.1, 1.0, 1.0).unwrap();
        assert!(build_lyapunov(LyapunovKind::Sqc, &model, &params, None).is_err());

        let set_model = build_objective(&ObjectiveSpec {
            name: "dist_sq_ball".into(),
            params: json!({"radius": 1.0, "dim": 2}),
        })
        .unwrap();
        assert!(build_lyapunov(LyapunovKind::Sqc, &set_model, &params, Some(0.5)).is_err());
    }

    #[test]
    fn projection_energy_hand_value() {
        // Ball of radius 1 in 1-D: x = 2 projects to 1, gap = 0.5. With
        // eta = 0.2, gamma' = 4 the coefficient is 0.025; z = 0.5 gives
        // phi = 0.5 + 0.025 * 0.25 = 0.50625.
        let model = build_objective(&ObjectiveSpec {
            name: "dist_sq_ball".into(),
            params: json!({"radius": 1.0, "dim": 1}),
        })
        .unwrap();
        let params = ContinuizedParams::new(0.2, 0.1, 1.0, 4.0).unwrap();
        let lyap = build_lyapunov(LyapunovKind::SqcProj, &model, &params, None).unwrap();
        let state = ProcessState {
            x: array![2.0],
            z: array![0.5],
            t: 0.0,
            k: 0,
        };
        assert!((lyap.value(&state) - 0.50625).abs() < 1e-15);
        assert_eq!(lyap.rate(), 0.2);
    }

    #[test]
    fn every_energy_vanishes_at_the_optimum() {
        let params = ContinuizedParams::new(1.0, 0.1, 0.5, 1.0).unwrap();
        let model = quadratic(vec![1.0, 2.0]);
        let at_star = ProcessState::coupled(Array1::zeros(2));
        for (kind, eps) in [(LyapunovKind::Pl, None), (LyapunovKind::Sqc, Some(0.5))] {
            let lyap = build_lyapunov(kind, &model, &params, eps).unwrap();
            assert_eq!(lyap.value(&at_star), 0.0, "{:?}", kind);
        }
        let set_model = build_objective(&ObjectiveSpec {
            name: "dist_sq_ball".into(),
            params: json!({"radius": 1.0, "dim": 2}),
        })
        .unwrap();
        let lyap = build_lyapunov(LyapunovKind::SqcProj, &set_model, &params, None).unwrap();
        // Any interior point of the ball is a minimizer with z = x = pi(x).
        let inside = ProcessState::coupled(array![0.3, -0.2]);
        assert_eq!(lyap.value(&inside), 0.0);
    }

    #[test]
    fn chernoff_bound_frozen_values() {
        assert_eq!(chernoff_tail_bound(1.0, 5).unwrap(), 1.0);
        let v = chernoff_tail_bound(0.5, 50).unwrap();
        let expected = 6.39531977041460e-5;
        assert!((v - expected).abs() < 1e-12 * expected, "got {v:e}");
        assert!(chernoff_tail_bound(0.0, 5).is_err());
        assert!(chernoff_tail_bound(1.2, 5).is_err());
        assert!(chernoff_tail_bound(0.5, 0).is_err());
        // c1 -> 0+ drives the bound to zero.
        assert!(chernoff_tail_bound(1e-12, 3).unwrap() < 1e-30);
    }

    #[test]
    fn certificate_frozen_values() {
        let cert = high_prob_certificate(0.1, 1.0, 2.0, 0.5, 50).unwrap();
        let p_expected = 0.499936046802296;
        let b_expected = 0.164169997247798; // 2 e^{-2.5}
        assert!((cert.probability - p_expected).abs() < 1e-12);
        assert!((cert.bound - b_expected).abs() < 1e-12 * b_expected);
        assert!(!cert.vacuous);

        let boundary = high_prob_certificate(0.1, 1.0, 2.0, 1.0, 50).unwrap();
        assert!(boundary.vacuous);
        assert!((boundary.probability + 0.5).abs() < 1e-15);

        assert!(high_prob_certificate(0.1, 1.0, 1.0, 0.5, 50).is_err());
        assert!(high_prob_certificate(-0.1, 1.0, 2.0, 0.5, 50).is_err());
    }

    #[test]
    fn certificate_monotonicity() {
        let mut prev_p = f64::NEG_INFINITY;
        let mut prev_b = f64::INFINITY;
        for k in [10, 50, 100, 500] {
            let c = high_prob_certificate(0.1, 1.0, 2.0, 0.5, k).unwrap();
            assert!(c.probability >= prev_p);
            assert!(c.bound <= prev_b);
            prev_p = c.probability;
            prev_b = c.bound;
        }
        let loose = high_prob_certificate(0.1, 1.0, 4.0, 0.5, 50).unwrap();
        let tight = high_prob_certificate(0.1, 1.0, 2.0, 0.5, 50).unwrap();
        assert!(loose.probability > tight.probability);
        // Large k: probability approaches 1 - 1/c0.
        let limit = high_prob_certificate(0.1, 1.0, 2.0, 0.5, 5000).unwrap();
        assert!((limit.probability - 0.5).abs() < 1e-12);
    }

    #[test]
    fn rate_fit_recovers_exact_series() {
        let ks: Vec<u64> = (0..30).collect();
        let gaps: Vec<f64> = ks.iter().map(|&k| 7.0 * (-0.3 * k as f64).exp()).collect();
        let fit = empirical_rate_fit(&ks, &gaps).unwrap();
        assert!((fit.slope - 0.3).abs() < 1e-12);
        assert!((fit.intercept - 7.0_f64.ln()).abs() < 1e-12);
        assert!(fit.ci95 < 1e-10);
        assert_eq!(fit.n_used, 30);
    }

    #[test]
    fn rate_fit_constant_series_and_truncation() {
        let ks: Vec<u64> = (0..10).collect();
        let flat = vec![2.5; 10];
        let fit = empirical_rate_fit(&ks, &flat).unwrap();
        assert!(fit.slope.abs() < 1e-14);

        let mut truncated = flat.clone();
        truncated[7] = 0.0;
        let fit = empirical_rate_fit(&ks, &truncated).unwrap();
        assert_eq!(fit.n_used, 7);

        let short = vec![1.0, 0.5, -1.0, 0.2, 0.1, 0.05];
        assert!(empirical_rate_fit(&ks[..6], &short).is_err());
    }

    #[test]
    fn probe_is_trivial_at_the_optimum() {
        let model = quadratic(vec![1.0]);
        let params = ContinuizedParams::new(1.0, 0.1, 0.5, 1.0).unwrap();
        let lyap = build_lyapunov(LyapunovKind::Pl, &model, &params, None).unwrap();
        let report = supermartingale_probe(
            &model,
            &params,
            lyap.as_ref(),
            &array![0.0],
            20,
            50,
            11,
        )
        .unwrap();
        assert_eq!(report.phi0, 0.0);
        assert!(report.holds);
        assert_eq!(report.n_excluded, 0);
        assert!(report.mean_phi.iter().all(|&m| m == 0.0));
    }

    #[test]
    fn arrival_times_average_to_k() {
        let mut rng = run_rng(3, 0);
        let k = 7;
        let n = 20_000;
        let mean = mean_arrival_time(k, n, &mut rng);
        // SE of the mean is sqrt(k/n).
        let se = (k as f64 / n as f64).sqrt();
        assert!((mean - k as f64).abs() < 4.0 * se, "mean {mean}");
    }
}
