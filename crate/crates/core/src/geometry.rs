//! Closed convex sets with exact Euclidean projections.
//!
//! Minimizer sets of degenerate objectives are represented here, and the
//! projection operator is what the projected quasar-convexity inequality and
//! its Lyapunov function are built from. Every implementation computes the
//! exact metric projection, so the variational inequality
//! `<x - y, y - P(x)> <= 0` for `y` in the set holds up to rounding only.

use ndarray::Array1;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("dimension mismatch: set lives in R^{expected}, point has dimension {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("ball radius must be positive, got {0}")]
    InvalidRadius(f64),
    #[error("box has lower[{index}] = {lower} > upper[{index}] = {upper}")]
    EmptyBox {
        index: usize,
        lower: f64,
        upper: f64,
    },
    #[error("affine subspace basis vector {index} has dimension {got}, expected {expected}")]
    BasisDimensionMismatch {
        index: usize,
        expected: usize,
        got: usize,
    },
    #[error("set descriptor has empty dimension")]
    EmptyDimension,
}

/// A closed convex set supporting exact Euclidean projection.
pub trait ConvexSet: Send + Sync {
    fn dim(&self) -> usize;

    /// The point of the set closest to `x` in Euclidean norm.
    fn project(&self, x: &Array1<f64>) -> Array1<f64>;

    /// Distance from `x` to the set.
    fn distance(&self, x: &Array1<f64>) -> f64 {
        let p = self.project(x);
        let d = x - &p;
        d.dot(&d).sqrt()
    }

    /// Membership up to a distance tolerance.
    fn contains(&self, x: &Array1<f64>, tol: f64) -> bool {
        self.distance(x) <= tol
    }

    /// Distance from `x` to the set where the projection is not
    /// differentiable. Directional-derivative probes stay away from it.
    /// The default claims smoothness everywhere, which is correct for
    /// affine subspaces (their projection is globally affine).
    fn kink_distance(&self, _x: &Array1<f64>) -> f64 {
        f64::INFINITY
    }
}

impl fmt::Debug for dyn ConvexSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ConvexSet(dim={})", self.dim())
    }
}

/// Euclidean ball `{x : |x - center| <= radius}`.
#[derive(Clone, Debug)]
pub struct Ball {
    center: Array1<f64>,
    radius: f64,
}

impl Ball {
    pub fn new(center: Array1<f64>, radius: f64) -> Result<Self, GeometryError> {
        if center.is_empty() {
            return Err(GeometryError::EmptyDimension);
        }
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(GeometryError::InvalidRadius(radius));
        }
        Ok(Self { center, radius })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn center(&self) -> &Array1<f64> {
        &self.center
    }
}

impl ConvexSet for Ball {
    fn dim(&self) -> usize {
        self.center.len()
    }

    fn project(&self, x: &Array1<f64>) -> Array1<f64> {
        let d = x - &self.center;
        let n = d.dot(&d).sqrt();
        if n <= self.radius {
            x.clone()
        } else {
            &self.center + &(d * (self.radius / n))
        }
    }

    // The projection is smooth except on the sphere itself.
    fn kink_distance(&self, x: &Array1<f64>) -> f64 {
        let d = x - &self.center;
        (d.dot(&d).sqrt() - self.radius).abs()
    }
}

/// Axis-aligned box `{x : lower_i <= x_i <= upper_i}`.
#[derive(Clone, Debug)]
pub struct AxisBox {
    lower: Array1<f64>,
    upper: Array1<f64>,
}

impl AxisBox {
    pub fn new(lower: Array1<f64>, upper: Array1<f64>) -> Result<Self, GeometryError> {
        if lower.is_empty() {
            return Err(GeometryError::EmptyDimension);
        }
        if lower.len() != upper.len() {
            return Err(GeometryError::DimensionMismatch {
                expected: lower.len(),
                got: upper.len(),
            });
        }
        for (i, (&lo, &hi)) in lower.iter().zip(upper.iter()).enumerate() {
            if lo > hi {
                return Err(GeometryError::EmptyBox {
                    index: i,
                    lower: lo,
                    upper: hi,
                });
            }
        }
        Ok(Self { lower, upper })
    }
}

impl ConvexSet for AxisBox {
    fn dim(&self) -> usize {
        self.lower.len()
    }

    fn project(&self, x: &Array1<f64>) -> Array1<f64> {
        Array1::from_iter(
            x.iter()
                .zip(self.lower.iter().zip(self.upper.iter()))
                .map(|(&v, (&lo, &hi))| v.clamp(lo, hi)),
        )
    }

    // Clamping kinks where any coordinate sits exactly at its bound.
    fn kink_distance(&self, x: &Array1<f64>) -> f64 {
        x.iter()
            .zip(self.lower.iter().zip(self.upper.iter()))
            .map(|(&v, (&lo, &hi))| (v - lo).abs().min((v - hi).abs()))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Affine subspace `offset + span(basis)`.
///
/// The basis is orthonormalized at construction (modified Gram-Schmidt);
/// dependent input vectors are dropped, which leaves the span unchanged.
#[derive(Clone, Debug)]
pub struct AffineSubspace {
    offset: Array1<f64>,
    basis: Vec<Array1<f64>>,
}

impl AffineSubspace {
    pub fn new(offset: Array1<f64>, raw_basis: &[Array1<f64>]) -> Result<Self, GeometryError> {
        let dim = offset.len();
        if dim == 0 {
            return Err(GeometryError::EmptyDimension);
        }
        let mut basis: Vec<Array1<f64>> = Vec::with_capacity(raw_basis.len());
        for (index, v) in raw_basis.iter().enumerate() {
            if v.len() != dim {
                return Err(GeometryError::BasisDimensionMismatch {
                    index,
                    expected: dim,
                    got: v.len(),
                });
            }
            let scale = v.dot(v).sqrt();
            let mut u = v.clone();
            for b in &basis {
                let c = u.dot(b);
                u = &u - &(b * c);
            }
            // Re-orthogonalize once; plain Gram-Schmidt loses orthogonality
            // for nearly dependent inputs.
            for b in &basis {
                let c = u.dot(b);
                u = &u - &(b * c);
            }
            let n = u.dot(&u).sqrt();
            if n > 1e-12 * scale.max(1.0) {
                basis.push(u / n);
            }
        }
        Ok(Self { offset, basis })
    }

    /// Subspace through the origin spanned by the given coordinate axes.
    pub fn coordinate_span(dim: usize, axes: &[usize]) -> Result<Self, GeometryError> {
        let basis: Vec<Array1<f64>> = axes
            .iter()
            .map(|&j| {
                let mut e = Array1::zeros(dim);
                e[j] = 1.0;
                e
            })
            .collect();
        Self::new(Array1::zeros(dim), &basis)
    }

    pub fn rank(&self) -> usize {
        self.basis.len()
    }
}

impl ConvexSet for AffineSubspace {
    fn dim(&self) -> usize {
        self.offset.len()
    }

    fn project(&self, x: &Array1<f64>) -> Array1<f64> {
        let d = x - &self.offset;
        let mut p = self.offset.clone();
        for b in &self.basis {
            let c = d.dot(b);
            p = p + b * c;
        }
        p
    }
}

/// Rounding allowance on the projection identities: inequalities that hold
/// exactly in real arithmetic may miss by this much.
pub const PROJECTION_TOL: f64 = 1e-12;

/// Directional-derivative probes reject points closer than this to the
/// projection's kink set, so no difference quotient straddles a kink
/// (the largest probe step is 1e-3 along a unit direction).
const KINK_MARGIN: f64 = 1e-2;

/// Worst observed values of the projection inequalities over random probes.
///
/// Sign conventions follow the exact-arithmetic statements: the variational
/// product is at most zero, the monotonicity product at least zero, the
/// expansion ratio at most one, and the directional quotient shrinks with
/// the step and ends below 1e-3 relative to `|x - P(x)| |d|`.
#[derive(Clone, Debug)]
pub struct ProjectionSuiteReport {
    pub n_probes: usize,
    /// max over probes of `<x - y, y - P(x)>` with `y` in the set.
    pub worst_variational: f64,
    /// min over probes of `<P(x + d) - P(x), d>`.
    pub worst_monotonicity: f64,
    /// max over pairs of `|P(x) - P(y)| / |x - y|`.
    pub worst_expansion_ratio: f64,
    /// max over probes of the h = 1e-5 quotient `|<x - P(x), (P(x + h d) - P(x)) / h>|`
    /// relative to `|x - P(x)| |d|`.
    pub worst_directional: f64,
    /// Probes where the quotient grew as h shrank from 1e-3 to 1e-5.
    pub directional_growth_failures: usize,
    pub holds: bool,
}

/// Check the variational inequality, monotonicity, nonexpansiveness, and
/// the vanishing directional quotient of the projection on random probes.
///
/// Probes are Gaussian around the projection of the origin with spread a
/// few times unity, so the reported products are order-one numbers and the
/// absolute tolerance is meaningful.
pub fn projection_property_suite(
    set: &dyn ConvexSet,
    n_probes: usize,
    seed: u64,
) -> ProjectionSuiteReport {
    assert!(n_probes > 0, "the suite needs at least one probe");
    let dim = set.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let anchor = set.project(&Array1::zeros(dim));
    let gaussian = |rng: &mut ChaCha8Rng, spread: f64| -> Array1<f64> {
        &anchor
            + &Array1::from_iter(
                (0..dim).map(|_| spread * rng.sample::<f64, _>(rand_distr::StandardNormal)),
            )
    };

    let mut worst_variational = f64::NEG_INFINITY;
    let mut worst_monotonicity = f64::INFINITY;
    let mut worst_expansion_ratio = 0.0_f64;
    let mut worst_directional = 0.0_f64;
    let mut directional_growth_failures = 0usize;

    for _ in 0..n_probes {
        let x = gaussian(&mut rng, 2.0);
        let px = set.project(&x);

        // <x - y, y - P(x)> <= 0 for y in the set.
        let y = set.project(&gaussian(&mut rng, 2.0));
        let ip = (&x - &y).dot(&(&y - &px));
        worst_variational = worst_variational.max(ip);

        // <P(x + d) - P(x), d> >= 0.
        let d = gaussian(&mut rng, 2.0) - &anchor;
        let ip = (&set.project(&(&x + &d)) - &px).dot(&d);
        worst_monotonicity = worst_monotonicity.min(ip);

        // |P(x) - P(y)| <= |x - y|.
        let x2 = gaussian(&mut rng, 2.0);
        let sep = {
            let d = &x - &x2;
            d.dot(&d).sqrt()
        };
        if sep > 0.0 {
            let px2 = set.project(&x2);
            let psep = {
                let d = &px - &px2;
                d.dot(&d).sqrt()
            };
            worst_expansion_ratio = worst_expansion_ratio.max(psep / sep);
        }

        // <x - P(x), (P(x + h d) - P(x)) / h> -> 0 as h -> 0, away from kinks.
        // Sets whose kink set fills space (a box collapsed to a face) admit
        // no valid probe point; give up on this property after a bounded
        // number of rejections rather than spin.
        let mut xd = None;
        for _ in 0..100 {
            let cand = gaussian(&mut rng, 2.0);
            if set.kink_distance(&cand) >= KINK_MARGIN {
                xd = Some(cand);
                break;
            }
        }
        let Some(xd) = xd else { continue };
        let pxd = set.project(&xd);
        let residual = &xd - &pxd;
        let res_norm = residual.dot(&residual).sqrt();
        let mut unit = gaussian(&mut rng, 1.0) - &anchor;
        let n = unit.dot(&unit).sqrt();
        if n == 0.0 {
            continue;
        }
        unit /= n;
        let quotient = |h: f64| -> f64 {
            let moved = set.project(&(&xd + &(&unit * h)));
            residual.dot(&(&moved - &pxd)) / h
        };
        let q_coarse = quotient(1e-3).abs();
        let q_fine = quotient(1e-5).abs();
        // The fine quotient divides a cancellation of order eps * |x| by
        // 1e-5, so its rounding floor is about 1e-10 times the point scale;
        // a decrease below that floor is not observable.
        let noise_floor = 1e-9 * (1.0 + res_norm + xd.dot(&xd).sqrt());
        if q_fine > q_coarse + noise_floor {
            directional_growth_failures += 1;
        }
        if res_norm > 0.0 {
            worst_directional = worst_directional.max(q_fine / res_norm);
        }
    }

    let holds = worst_variational <= PROJECTION_TOL
        && worst_monotonicity >= -PROJECTION_TOL
        && worst_expansion_ratio <= 1.0 + PROJECTION_TOL
        && worst_directional <= 1e-3
        && directional_growth_failures == 0;
    ProjectionSuiteReport {
        n_probes,
        worst_variational,
        worst_monotonicity,
        worst_expansion_ratio,
        worst_directional,
        directional_growth_failures,
        holds,
    }
}

/// Serializable description of a convex set, as it appears in config files.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SetSpec {
    Ball {
        center: Vec<f64>,
        radius: f64,
    },
    Box {
        lower: Vec<f64>,
        upper: Vec<f64>,
    },
    AffineSubspace {
        offset: Vec<f64>,
        basis: Vec<Vec<f64>>,
    },
}

impl SetSpec {
    pub fn build(&self) -> Result<Arc<dyn ConvexSet>, GeometryError> {
        match self {
            SetSpec::Ball { center, radius } => Ok(Arc::new(Ball::new(
                Array1::from_vec(center.clone()),
                *radius,
            )?)),
            SetSpec::Box { lower, upper } => Ok(Arc::new(AxisBox::new(
                Array1::from_vec(lower.clone()),
                Array1::from_vec(upper.clone()),
            )?)),
            SetSpec::AffineSubspace { offset, basis } => {
                let vecs: Vec<Array1<f64>> =
                    basis.iter().map(|v| Array1::from_vec(v.clone())).collect();
                Ok(Arc::new(AffineSubspace::new(
                    Array1::from_vec(offset.clone()),
                    &vecs,
                )?))
            }
        }
    }
}
