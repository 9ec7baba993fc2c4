//! Proximal library for `g_X = g + δ_X`.
//!
//! The shipped functions are coordinatewise: a regulariser (`0`, weighted `ℓ1`,
//! or a diagonal quadratic) restricted to the whole space, a box, or (for the
//! zero regulariser only) a half-space. For a one-dimensional convex term the
//! prox over an interval is the clipped unconstrained prox, which is how boxes
//! are handled.

use std::fmt::Debug;

use crate::error::{check_len, ApdError, Result};
use crate::linalg::Vector;

/// Closed proper convex function with a computable proximal map.
pub trait ProxableFunction: Send + Sync + Debug {
    /// Fixed dimension, or `None` when the function applies to any length.
    fn dim(&self) -> Option<usize>;

    /// `g(x)` plus the indicator of `X` (so `+∞` outside the set).
    fn value(&self, x: &Vector) -> f64;

    /// `argmin_u g(u) + δ_X(u) + ‖u − x‖²/(2η)`.
    fn prox(&self, eta: f64, x: &Vector) -> Result<Vector>;

    /// Convex conjugate of `g_X`.
    fn conjugate_value(&self, _y: &Vector) -> Result<f64> {
        Err(ApdError::Unsupported("conjugate of this function".into()))
    }

    /// Diagonal of an element of the generalized Jacobian of `prox(eta, ·)` at `u`.
    fn gen_jacobian(&self, _eta: f64, _u: &Vector) -> Result<Vector> {
        Err(ApdError::Unsupported(
            "generalized Jacobian of a non-separable prox".into(),
        ))
    }

    /// Euclidean projection onto `X`.
    fn project(&self, x: &Vector) -> Result<Vector>;

    fn contains(&self, x: &Vector, tol: f64) -> bool;

    /// True when `g = 0` and `X = ℝⁿ`.
    fn is_zero_unconstrained(&self) -> bool {
        false
    }

    fn as_separable(&self) -> Option<&SeparableProx> {
        None
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Regularizer {
    Zero,
    L1 { weight: f64 },
    /// `½Σ dᵢxᵢ²` with `d ≥ 0`.
    Quadratic { curvature: Vector },
}

#[derive(Debug, Clone, PartialEq)]
pub enum FeasibleSet {
    Whole,
    Box { lower: Vector, upper: Vector },
    /// `{x : aᵀx ≤ c}`.
    HalfSpace { normal: Vector, offset: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeparableProx {
    term: Regularizer,
    set: FeasibleSet,
}

const MEMBERSHIP_TOL: f64 = 1e-9;

impl SeparableProx {
    pub fn new(term: Regularizer, set: FeasibleSet) -> Result<Self> {
        match &term {
            Regularizer::L1 { weight } if !(*weight >= 0.0) => {
                return Err(ApdError::InvalidInput("ℓ1 weight must be nonnegative".into()))
            }
            Regularizer::Quadratic { curvature } if curvature.iter().any(|&d| !(d >= 0.0)) => {
                return Err(ApdError::InvalidInput(
                    "quadratic regulariser needs nonnegative curvature".into(),
                ))
            }
            _ => {}
        }
        match &set {
            FeasibleSet::Box { lower, upper } => {
                check_len("box bounds", lower.len(), upper.len())?;
                if lower.iter().zip(upper.iter()).any(|(l, u)| !(l <= u)) {
                    return Err(ApdError::InvalidInput("box needs lower ≤ upper".into()));
                }
            }
            FeasibleSet::HalfSpace { normal, .. } => {
                if normal.norm() == 0.0 {
                    return Err(ApdError::InvalidInput("half-space normal is zero".into()));
                }
            }
            FeasibleSet::Whole => {}
        }
        let out = Self { term, set };
        if let (Some(a), Some(b)) = (out.term_dim(), out.set_dim()) {
            check_len("regulariser and feasible set", a, b)?;
        }
        Ok(out)
    }

    pub fn zero() -> Self {
        Self {
            term: Regularizer::Zero,
            set: FeasibleSet::Whole,
        }
    }

    pub fn l1(weight: f64) -> Result<Self> {
        Self::new(Regularizer::L1 { weight }, FeasibleSet::Whole)
    }

    pub fn box_indicator(lower: Vector, upper: Vector) -> Result<Self> {
        Self::new(Regularizer::Zero, FeasibleSet::Box { lower, upper })
    }

    pub fn half_space(normal: Vector, offset: f64) -> Result<Self> {
        Self::new(Regularizer::Zero, FeasibleSet::HalfSpace { normal, offset })
    }

    pub fn quadratic(curvature: Vector) -> Result<Self> {
        Self::new(Regularizer::Quadratic { curvature }, FeasibleSet::Whole)
    }

    pub fn term(&self) -> &Regularizer {
        &self.term
    }

    pub fn set(&self) -> &FeasibleSet {
        &self.set
    }

    fn term_dim(&self) -> Option<usize> {
        match &self.term {
            Regularizer::Quadratic { curvature } => Some(curvature.len()),
            _ => None,
        }
    }

    fn set_dim(&self) -> Option<usize> {
        match &self.set {
            FeasibleSet::Whole => None,
            FeasibleSet::Box { lower, .. } => Some(lower.len()),
            FeasibleSet::HalfSpace { normal, .. } => Some(normal.len()),
        }
    }

    fn check_dim(&self, n: usize) -> Result<()> {
        match self.dim() {
            Some(d) => check_len("prox argument", d, n),
            None => Ok(()),
        }
    }

    /// Whether the prox acts coordinate by coordinate.
    pub fn is_coordinatewise(&self) -> bool {
        !matches!(self.set, FeasibleSet::HalfSpace { .. })
    }

    /// Scalar prox of the regulariser alone, with step `eta`, at coordinate `i`.
    fn term_prox(&self, eta: f64, u: f64, i: usize) -> f64 {
        match &self.term {
            Regularizer::Zero => u,
            Regularizer::L1 { weight } => soft_threshold(u, eta * weight),
            Regularizer::Quadratic { curvature } => u / (1.0 + eta * curvature[i]),
        }
    }

    fn term_slope(&self, eta: f64, u: f64, i: usize) -> f64 {
        match &self.term {
            Regularizer::Zero => 1.0,
            Regularizer::L1 { weight } => {
                if u.abs() > eta * weight {
                    1.0
                } else {
                    0.0
                }
            }
            Regularizer::Quadratic { curvature } => 1.0 / (1.0 + eta * curvature[i]),
        }
    }

    fn term_value_at(&self, u: f64, i: usize) -> f64 {
        match &self.term {
            Regularizer::Zero => 0.0,
            Regularizer::L1 { weight } => weight * u.abs(),
            Regularizer::Quadratic { curvature } => 0.5 * curvature[i] * u * u,
        }
    }

    /// Coordinatewise prox with a separate step per coordinate.
    ///
    /// Used to fold a diagonal quadratic smooth part into the prox.
    pub fn prox_coordinatewise(&self, etas: &Vector, x: &Vector) -> Result<Vector> {
        self.check_dim(x.len())?;
        check_len("per-coordinate steps", x.len(), etas.len())?;
        if !self.is_coordinatewise() {
            return Err(ApdError::Unsupported(
                "coordinatewise prox over a half-space".into(),
            ));
        }
        Ok(Vector::from_fn(x.len(), |i, _| {
            let p = self.term_prox(etas[i], x[i], i);
            self.clip(p, i)
        }))
    }

    /// Generalized Jacobian diagonal matching [`Self::prox_coordinatewise`].
    pub fn jacobian_coordinatewise(&self, etas: &Vector, x: &Vector) -> Result<Vector> {
        self.check_dim(x.len())?;
        check_len("per-coordinate steps", x.len(), etas.len())?;
        if !self.is_coordinatewise() {
            return Err(ApdError::Unsupported(
                "generalized Jacobian of a half-space projection".into(),
            ));
        }
        Ok(Vector::from_fn(x.len(), |i, _| {
            let p = self.term_prox(etas[i], x[i], i);
            let inside = match &self.set {
                FeasibleSet::Box { lower, upper } => lower[i] < p && p < upper[i],
                _ => true,
            };
            if inside {
                self.term_slope(etas[i], x[i], i)
            } else {
                0.0
            }
        }))
    }

    fn clip(&self, p: f64, i: usize) -> f64 {
        match &self.set {
            FeasibleSet::Box { lower, upper } => p.max(lower[i]).min(upper[i]),
            _ => p,
        }
    }
}

pub fn soft_threshold(u: f64, t: f64) -> f64 {
    if u > t {
        u - t
    } else if u < -t {
        u + t
    } else {
        0.0
    }
}

impl ProxableFunction for SeparableProx {
    fn dim(&self) -> Option<usize> {
        self.term_dim().or_else(|| self.set_dim())
    }

    fn value(&self, x: &Vector) -> f64 {
        if !self.contains(x, MEMBERSHIP_TOL) {
            return f64::INFINITY;
        }
        (0..x.len()).map(|i| self.term_value_at(x[i], i)).sum()
    }

    fn prox(&self, eta: f64, x: &Vector) -> Result<Vector> {
        self.check_dim(x.len())?;
        if !(eta > 0.0) || !eta.is_finite() {
            return Err(ApdError::InvalidInput(format!("prox step must be positive, got {eta}")));
        }
        match &self.set {
            FeasibleSet::HalfSpace { .. } => match self.term {
                Regularizer::Zero => self.project(x),
                _ => Err(ApdError::Unsupported(
                    "prox of a nonzero regulariser over a half-space".into(),
                )),
            },
            _ => self.prox_coordinatewise(&Vector::from_element(x.len(), eta), x),
        }
    }

    fn conjugate_value(&self, y: &Vector) -> Result<f64> {
        self.check_dim(y.len())?;
        let inf = f64::INFINITY;
        match (&self.term, &self.set) {
            (Regularizer::Zero, FeasibleSet::Whole) => {
                Ok(if y.amax() <= 1e-12 { 0.0 } else { inf })
            }
            (Regularizer::L1 { weight }, FeasibleSet::Whole) => {
                Ok(if y.amax() <= weight * (1.0 + 1e-12) + 1e-15 { 0.0 } else { inf })
            }
            (Regularizer::Quadratic { curvature }, FeasibleSet::Whole) => {
                let mut s = 0.0;
                for (yi, d) in y.iter().zip(curvature.iter()) {
                    if *d > 0.0 {
                        s += yi * yi / (2.0 * d);
                    } else if yi.abs() > 1e-12 {
                        return Ok(inf);
                    }
                }
                Ok(s)
            }
            (Regularizer::Zero, FeasibleSet::Box { lower, upper }) => {
                // Support function of the box.
                let mut s = 0.0;
                for i in 0..y.len() {
                    let yi = y[i];
                    if yi > 0.0 {
                        s += yi * upper[i];
                    } else if yi < 0.0 {
                        s += yi * lower[i];
                    }
                }
                Ok(if s.is_nan() { inf } else { s })
            }
            (Regularizer::Zero, FeasibleSet::HalfSpace { normal, offset }) => {
                // Finite only on the ray {s·a : s ≥ 0}, where it equals s·c.
                let s = y.dot(normal) / normal.norm_squared();
                let off_ray = (y - normal * s).norm();
                if s >= -1e-12 && off_ray <= 1e-10 * (1.0 + y.norm()) {
                    Ok(s.max(0.0) * offset)
                } else {
                    Ok(inf)
                }
            }
            _ => Err(ApdError::Unsupported(
                "conjugate of a regulariser restricted to a set".into(),
            )),
        }
    }

    fn gen_jacobian(&self, eta: f64, u: &Vector) -> Result<Vector> {
        self.jacobian_coordinatewise(&Vector::from_element(u.len(), eta), u)
    }

    fn project(&self, x: &Vector) -> Result<Vector> {
        self.check_dim(x.len())?;
        Ok(match &self.set {
            FeasibleSet::Whole => x.clone(),
            FeasibleSet::Box { .. } => Vector::from_fn(x.len(), |i, _| self.clip(x[i], i)),
            FeasibleSet::HalfSpace { normal, offset } => {
                let excess = normal.dot(x) - offset;
                if excess > 0.0 {
                    x - normal * (excess / normal.norm_squared())
                } else {
                    x.clone()
                }
            }
        })
    }

    fn contains(&self, x: &Vector, tol: f64) -> bool {
        match &self.set {
            FeasibleSet::Whole => true,
            FeasibleSet::Box { lower, upper } => (0..x.len()).all(|i| {
                let scale = 1.0 + x[i].abs();
                x[i] >= lower[i] - tol * scale && x[i] <= upper[i] + tol * scale
            }),
            FeasibleSet::HalfSpace { normal, offset } => {
                normal.dot(x) <= offset + tol * (1.0 + offset.abs() + normal.norm() * x.norm())
            }
        }
    }

    fn is_zero_unconstrained(&self) -> bool {
        self.term == Regularizer::Zero && self.set == FeasibleSet::Whole
    }

    fn as_separable(&self) -> Option<&SeparableProx> {
        Some(self)
    }
}
