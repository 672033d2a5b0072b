//! The coupled jump process and its exact discretization.
//!
//! Between arrivals of a unit-rate Poisson clock the pair (x, z) follows the
//! linear flow dx = eta (z - x) dt, dz = eta' (x - z) dt, which has a closed
//! form; at each arrival both variables take a gradient step evaluated at
//! the flowed x. One `cna_step` is therefore exact in distribution: no
//! integration error enters, only the two random draws (interarrival time,
//! stochastic gradient index).
//!
//! Negative eta' is allowed (and produced by the PL scheme) as long as
//! eta + eta' > 0; the closed form below stays well conditioned there, which
//! is why the z-update is computed from the flowed z rather than from the
//! algebraically equivalent ratio form whose denominator eta' + eta e^{-a dt}
//! can vanish.

use crate::model::{sample_stochastic_gradient, Objective};
use ndarray::Array1;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Joint state of the pair process after `k` gradient steps at time `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct ProcessState {
    pub x: Array1<f64>,
    pub z: Array1<f64>,
    /// Physical time: sum of the interarrival draws so far.
    pub t: f64,
    /// Number of gradient steps taken.
    pub k: u64,
}

impl ProcessState {
    /// Standard start: both variables at `x0`, clock at zero.
    pub fn coupled(x0: Array1<f64>) -> Self {
        Self {
            z: x0.clone(),
            x: x0,
            t: 0.0,
            k: 0,
        }
    }

    pub fn dist_xz(&self) -> f64 {
        let d = &self.x - &self.z;
        d.dot(&d).sqrt()
    }
}

/// Multiplies an initial-state functional `c_gap * f_gap0 + c_dist * dist0^2`
/// into the guaranteed expectation bound; schemes fill it in.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundCoefficients {
    /// Coefficient on the initial objective gap.
    pub gap_coeff: f64,
    /// Coefficient on the squared initial distance to the minimizer.
    pub dist_sq_coeff: f64,
    /// Multiplier in front of the whole initial constant (>= 1).
    pub prefactor: f64,
}

impl BoundCoefficients {
    /// The initial constant the rate multiplies.
    pub fn initial_constant(&self, f_gap0: f64, dist0_sq: f64) -> f64 {
        self.gap_coeff * f_gap0 + self.dist_sq_coeff * dist0_sq
    }

    /// Guaranteed bound on `E[e^{rate T_k} (f(x_k) - f_star)]`, constant in k.
    pub fn bound(&self, f_gap0: f64, dist0_sq: f64) -> f64 {
        self.prefactor * self.initial_constant(f_gap0, dist0_sq)
    }
}

/// Parameters of the process: flow couplings and gradient step sizes, plus
/// the certified rate and bound when derived from a scheme.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContinuizedParams {
    pub eta: f64,
    pub eta_prime: f64,
    pub gamma: f64,
    pub gamma_prime: f64,
    /// Certified exponential rate beta, when known.
    pub rate: Option<f64>,
    /// Coefficients of the certified initial constant, when known.
    pub bound: Option<BoundCoefficients>,
}

impl ContinuizedParams {
    pub fn new(eta: f64, eta_prime: f64, gamma: f64, gamma_prime: f64) -> Result<Self, ProcessError> {
        let p = Self {
            eta,
            eta_prime,
            gamma,
            gamma_prime,
            rate: None,
            bound: None,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), ProcessError> {
        let vals = [self.eta, self.eta_prime, self.gamma, self.gamma_prime];
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(ProcessError::InvalidParams(
                "parameters must be finite".into(),
            ));
        }
        if !(self.eta > 0.0) {
            return Err(ProcessError::InvalidParams(format!(
                "eta must be positive, got {}",
                self.eta
            )));
        }
        if !(self.eta + self.eta_prime > 0.0) {
            return Err(ProcessError::InvalidParams(format!(
                "eta + eta' must be positive for the flow to contract, got {}",
                self.eta + self.eta_prime
            )));
        }
        if self.gamma < 0.0 || self.gamma_prime < 0.0 {
            return Err(ProcessError::InvalidParams(
                "step sizes must be nonnegative".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum ProcessError {
    #[error("invalid process parameters: {0}")]
    InvalidParams(String),
    #[error("{source}")]
    Model {
        #[from]
        source: crate::model::ModelError,
    },
    #[error(
        "trajectory diverged at step {step} (objective gap {gap:.3e} against \
         a guard of {guard:.3e}); partial log retained"
    )]
    Diverged {
        step: u64,
        gap: f64,
        guard: f64,
        /// Records accumulated before the blowup.
        partial: Vec<TrajectoryRecord>,
    },
    #[error("gradient produced a non-finite entry at step {step}")]
    NonFiniteGradient { step: u64 },
}

/// Interarrival time from a uniform draw: the exponential inverse CDF.
/// `u` must lie in (0, 1]; u = 1 maps to 0.
pub fn interarrival_from_uniform(u: f64) -> f64 {
    assert!(u > 0.0 && u <= 1.0, "uniform draw {u} outside (0, 1]");
    -u.ln()
}

/// Draw a unit-rate exponential interarrival time.
pub fn sample_interarrival<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    // random::<f64>() covers [0, 1); reflecting to (0, 1] keeps ln finite.
    interarrival_from_uniform(1.0 - rng.random::<f64>())
}

/// The pair after flowing for `dt` with no jump: the pre-jump point
/// (y, z_minus).
#[derive(Clone, Debug)]
pub struct FlowPoint {
    pub y: Array1<f64>,
    pub z_minus: Array1<f64>,
}

/// Closed form of the no-jump flow over an interval of length `dt`:
///
/// y       = x + eta/(eta+eta') (1 - e^{-(eta+eta') dt}) (z - x)
/// z_minus = z + eta'/(eta+eta') (1 - e^{-(eta+eta') dt}) (x - z)
///
/// `1 - e^{-a dt}` is evaluated with `exp_m1` so small `a dt` loses no
/// precision. The mixture eta' y + eta z_minus equals eta' x + eta z exactly
/// in real arithmetic (the flow preserves it); tests pin that conservation.
pub fn flow_closed_form(x: &Array1<f64>, z: &Array1<f64>, dt: f64, params: &ContinuizedParams) -> FlowPoint {
    assert!(dt >= 0.0, "flow interval must be nonnegative, got {dt}");
    let a = params.eta + params.eta_prime;
    let w = -(-a * dt).exp_m1(); // 1 - e^{-a dt}
    let diff = z - x;
    let y = x + &(&diff * (params.eta / a * w));
    let z_minus = z - &(&diff * (params.eta_prime / a * w));
    FlowPoint { y, z_minus }
}

/// Advance one arrival with an externally supplied interarrival time.
///
/// Test hook and building block of [`cna_step`]: flows both variables by
/// `delta`, then applies the gradient kicks x' = y - gamma g and
/// z' = z_minus - gamma' g with g sampled at y.
pub fn cna_step_with_interarrival<R: Rng + ?Sized>(
    state: &mut ProcessState,
    model: &dyn Objective,
    params: &ContinuizedParams,
    delta: f64,
    rng: &mut R,
) -> Result<(), ProcessError> {
    let flow = flow_closed_form(&state.x, &state.z, delta, params);
    let sample = sample_stochastic_gradient(model, &flow.y, rng)?;
    if sample.grad.iter().any(|g| !g.is_finite()) {
        return Err(ProcessError::NonFiniteGradient { step: state.k + 1 });
    }
    state.x = &flow.y - &(&sample.grad * params.gamma);
    state.z = &flow.z_minus - &(&sample.grad * params.gamma_prime);
    state.t += delta;
    state.k += 1;
    Ok(())
}

/// Advance one arrival of the Poisson clock: draw the interarrival time,
/// flow, and take the gradient step. Draw order is fixed (time first, then
/// the gradient index) so runs are reproducible from the seed alone.
pub fn cna_step<R: Rng + ?Sized>(
    state: &mut ProcessState,
    model: &dyn Objective,
    params: &ContinuizedParams,
    rng: &mut R,
) -> Result<(), ProcessError> {
    let delta = sample_interarrival(rng);
    cna_step_with_interarrival(state, model, params, delta, rng)
}

/// One logged row of a trajectory: state functionals after the k-th step.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryRecord {
    pub k: u64,
    /// Arrival time T_k of the k-th gradient step.
    pub t: f64,
    pub f_gap: f64,
    /// Distance |x - z| between the coupled variables.
    pub dist_xz: f64,
    /// Logged Lyapunov value, when an observable was attached.
    pub lyapunov: Option<f64>,
}

/// Optional per-step observable (used to log Lyapunov values).
pub type StateObservable<'a> = &'a (dyn Fn(&ProcessState) -> f64 + Sync);

/// Factor over the initial gap beyond which a trajectory counts as diverged.
pub const DIVERGENCE_FACTOR: f64 = 1e12;

/// Deterministic per-run generator: runs are independent substreams keyed by
/// (base seed, run index), so a Monte Carlo batch is reproducible regardless
/// of how runs are scheduled across threads.
pub fn run_rng(base_seed: u64, run_index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix64(base_seed, run_index))
}

/// SplitMix64-style finalizer over the (seed, index) pair. Fixed for all
/// time: changing it would silently re-randomize every recorded experiment.
pub fn mix64(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_add(0x9E37_79B9_7F4A_7C15).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Simulate `n_steps` arrivals from `x0` (both variables start there) and
/// log one record per step. Divergence (non-finite values, or an objective
/// gap exceeding [`DIVERGENCE_FACTOR`] times the initial gap) aborts with
/// the partial log attached.
pub fn run_trajectory(
    model: &dyn Objective,
    params: &ContinuizedParams,
    x0: &Array1<f64>,
    n_steps: u64,
    seed: u64,
    observable: Option<StateObservable<'_>>,
) -> Result<Vec<TrajectoryRecord>, ProcessError> {
    params.validate()?;
    // Substream 0 of the seed: a single trajectory is run 0 of the batch
    // with the same base seed.
    let mut rng = run_rng(seed, 0);
    run_trajectory_with_rng(model, params, x0, n_steps, &mut rng, observable)
}

fn divergence_guard(gap0: f64) -> f64 {
    if gap0 > 0.0 {
        DIVERGENCE_FACTOR * gap0
    } else {
        f64::INFINITY
    }
}

pub fn run_trajectory_with_rng<R: Rng + ?Sized>(
    model: &dyn Objective,
    params: &ContinuizedParams,
    x0: &Array1<f64>,
    n_steps: u64,
    rng: &mut R,
    observable: Option<StateObservable<'_>>,
) -> Result<Vec<TrajectoryRecord>, ProcessError> {
    let mut state = ProcessState::coupled(x0.clone());
    let guard = divergence_guard(model.f_gap(x0));
    let mut records = Vec::with_capacity(n_steps as usize);
    for _ in 0..n_steps {
        cna_step(&mut state, model, params, rng).map_err(|e| match e {
            // The state blew up mid-step; report it as divergence with the
            // log gathered so far.
            ProcessError::NonFiniteGradient { step } => ProcessError::Diverged {
                step,
                gap: f64::NAN,
                guard,
                partial: records.clone(),
            },
            other => other,
        })?;
        let gap = model.f_gap(&state.x);
        if !gap.is_finite() || gap > guard {
            return Err(ProcessError::Diverged {
                step: state.k,
                gap,
                guard,
                partial: records,
            });
        }
        records.push(TrajectoryRecord {
            k: state.k,
            t: state.t,
            f_gap: gap,
            dist_xz: state.dist_xz(),
            lyapunov: observable.map(|f| f(&state)),
        });
    }
    Ok(records)
}

/// Classical fixed-step RK4 on the linear inter-jump field. Deliberately
/// shares no code with [`flow_closed_form`]; it is the independent reference
/// the closed form is validated against (error is O(dt^5 / n_substeps^4)).
pub fn reference_integrate(
    x: &Array1<f64>,
    z: &Array1<f64>,
    dt: f64,
    params: &ContinuizedParams,
    n_substeps: usize,
) -> FlowPoint {
    assert!(dt >= 0.0 && n_substeps > 0);
    let h = dt / n_substeps as f64;
    let field = |x: &Array1<f64>, z: &Array1<f64>| {
        let d = z - x;
        (&d * params.eta, &d * (-params.eta_prime))
    };
    let mut cx = x.clone();
    let mut cz = z.clone();
    for _ in 0..n_substeps {
        let (k1x, k1z) = field(&cx, &cz);
        let (k2x, k2z) = field(&(&cx + &(&k1x * (h / 2.0))), &(&cz + &(&k1z * (h / 2.0))));
        let (k3x, k3z) = field(&(&cx + &(&k2x * (h / 2.0))), &(&cz + &(&k2z * (h / 2.0))));
        let (k4x, k4z) = field(&(&cx + &(&k3x * h)), &(&cz + &(&k3z * h)));
        cx = &cx + &((k1x + &k2x * 2.0 + &k3x * 2.0 + k4x) * (h / 6.0));
        cz = &cz + &((k1z + &k2z * 2.0 + &k3z * 2.0 + k4z) * (h / 6.0));
    }
    FlowPoint {
        y: cx,
        z_minus: cz,
    }
}

/// Mean and standard error of the x-path over a common time grid.
#[derive(Clone, Debug)]
pub struct MeanTrajectory {
    pub grid: Vec<f64>,
    pub mean_x: Vec<Array1<f64>>,
    /// Per-coordinate standard error of the mean (zero vector for a single run).
    pub se_x: Vec<Array1<f64>>,
    pub n_runs: u64,
}

/// Average independent trajectories on a shared grid of physical times.
///
/// Each run stores its post-jump states; a grid time is evaluated by flowing
/// forward from the last jump at or before it, which reproduces the path
/// exactly (the inter-jump dynamics is the closed-form flow). Runs whose
/// final arrival lands before the last grid point are extended with further
/// steps until they cover it.
pub fn mean_trajectory(
    model: &dyn Objective,
    params: &ContinuizedParams,
    x0: &Array1<f64>,
    n_steps: u64,
    n_runs: u64,
    base_seed: u64,
    grid: &[f64],
) -> Result<MeanTrajectory, ProcessError> {
    use rayon::prelude::*;
    params.validate()?;
    if n_runs == 0 {
        return Err(ProcessError::InvalidParams("n_runs must be >= 1".into()));
    }
    if grid.windows(2).any(|w| w[0] > w[1]) || grid.iter().any(|&t| t < 0.0) {
        return Err(ProcessError::InvalidParams(
            "grid times must be nonnegative and sorted".into(),
        ));
    }
    let grid_max = grid.last().copied().unwrap_or(0.0);

    let per_run: Vec<Result<Vec<Array1<f64>>, ProcessError>> = (0..n_runs)
        .into_par_iter()
        .map(|run| {
            let mut rng = run_rng(base_seed, run);
            let mut state = ProcessState::coupled(x0.clone());
            let guard = divergence_guard(model.f_gap(x0));
            // Jump times and post-jump states, starting with the initial state.
            let mut times = vec![0.0_f64];
            let mut states = vec![state.clone()];
            // Unit-rate arrivals: needing 100x + slack more steps than the
            // horizon has probability indistinguishable from zero.
            let step_cap = n_steps + 100 * (grid_max.ceil() as u64 + 10);
            let mut steps = 0u64;
            while steps < n_steps || state.t < grid_max {
                if steps >= step_cap {
                    return Err(ProcessError::InvalidParams(format!(
                        "run {run} needed more than {step_cap} steps to cover the grid"
                    )));
                }
                cna_step(&mut state, model, params, &mut rng)?;
                let gap = model.f_gap(&state.x);
                if !gap.is_finite() || gap > guard {
                    return Err(ProcessError::Diverged {
                        step: state.k,
                        gap,
                        guard,
                        partial: Vec::new(),
                    });
                }
                times.push(state.t);
                states.push(state.clone());
                steps += 1;
            }
            let values: Vec<Array1<f64>> = grid
                .iter()
                .map(|&t| {
                    // Last jump at or before t; partition_point gives the
                    // first index with time > t, never 0 since times[0] = 0.
                    let idx = times.partition_point(|&tj| tj <= t) - 1;
                    let s = &states[idx];
                    flow_closed_form(&s.x, &s.z, t - times[idx], params).y
                })
                .collect();
            Ok(values)
        })
        .collect();

    let dim = x0.len();
    let mut mean: Vec<Array1<f64>> = vec![Array1::zeros(dim); grid.len()];
    let mut m2: Vec<Array1<f64>> = vec![Array1::zeros(dim); grid.len()];
    let mut count = 0u64;
    for run in per_run {
        let values = run?;
        count += 1;
        for (g, v) in values.into_iter().enumerate() {
            // Welford in each coordinate; runs are merged in index order so
            // the result is identical for any thread count.
            let delta = &v - &mean[g];
            mean[g] = &mean[g] + &(&delta / count as f64);
            let delta2 = &v - &mean[g];
            m2[g] = &m2[g] + &(delta * delta2);
        }
    }
    let se: Vec<Array1<f64>> = m2
        .into_iter()
        .map(|m| {
            if count > 1 {
                (m / (count - 1) as f64 / count as f64).mapv(f64::sqrt)
            } else {
                Array1::zeros(dim)
            }
        })
        .collect();
    Ok(MeanTrajectory {
        grid: grid.to_vec(),
        mean_x: mean,
        se_x: se,
        n_runs: count,
    })
}
