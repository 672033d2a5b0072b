//! Nesterov acceleration in continuous time with gradient steps at the
//! arrivals of a unit-rate Poisson clock.
//!
//! Between arrivals the pair (x, z) relaxes toward each other along a linear
//! flow with couplings (eta, eta'); at each arrival both take a gradient
//! step (sizes gamma, gamma') evaluated at the flowed x. Because the flow
//! integrates in closed form, the process is simulated exactly: the only
//! randomness is the jump times and the choice of stochastic gradient.
//!
//! The crate provides
//! - [`process`]: the exact simulator, an independent integrator oracle for
//!   the flow, and deterministic parallel Monte Carlo utilities;
//! - [`presets`]: named parameter schemes with certified rates of the form
//!   `E[e^{beta T_k} (f(x_k) - f*)] <= prefactor * K0`;
//! - [`analysis`]: the Lyapunov energies behind those certificates,
//!   supermartingale probes, tail bounds, and rate fitting;
//! - [`model`] and [`objectives`]: gradient oracles with declared constants
//!   plus sample-based checkers for the assumptions the schemes need;
//! - [`geometry`]: projectable minimizer sets;
//! - [`baselines`]: gradient descent and classical momentum for comparison.

pub mod analysis;
pub mod baselines;
pub mod geometry;
pub mod model;
pub mod objectives;
pub mod presets;
pub mod process;
