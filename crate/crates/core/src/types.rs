use std::ops::Deref;

use crate::error::{check_dim, Error, Result};

/// A fixed-length vector of finite reals.
#[derive(Debug, Clone, PartialEq)]
pub struct Vector(pub(crate) Vec<f64>);

impl Vector {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::Domain("vector must have at least one coordinate".into()));
        }
        if let Some(i) = coords.iter().position(|c| !c.is_finite()) {
            return Err(Error::Domain(format!("coordinate {i} is not finite")));
        }
        Ok(Self(coords))
    }

    pub fn zeros(len: usize) -> Self {
        assert!(len >= 1, "vector length must be at least 1");
        Self(vec![0.0; len])
    }

    /// `(0, …, 0, value)` of length `len`.
    pub fn last_axis(len: usize, value: f64) -> Self {
        let mut v = Self::zeros(len);
        v.0[len - 1] = value;
        v
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        norm(&self.0)
    }

    pub fn dot(&self, other: &[f64]) -> f64 {
        dot(&self.0, other)
    }

    pub fn sub(&self, other: &Vector) -> Result<Vector> {
        check_dim(self.len(), other.len())?;
        Ok(Vector(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect()))
    }
}

impl Deref for Vector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for Vector {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Vector::new(v)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Regression-unit parameters `θ = (w, b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamPoint {
    pub w: Vector,
    pub b: f64,
}

impl ParamPoint {
    pub fn new(w: Vector, b: f64) -> Result<Self> {
        if !b.is_finite() {
            return Err(Error::Domain("bias is not finite".into()));
        }
        Ok(Self { w, b })
    }

    /// Parameters with all weight mass on the last axis, the reduced
    /// two-dimensional setting `w = (0, …, 0, w_L)`.
    pub fn axis_aligned(dim: usize, w_last: f64, b: f64) -> Self {
        Self { w: Vector::last_axis(dim, w_last), b }
    }

    pub fn dim(&self) -> usize {
        self.w.len()
    }

    /// The ratio `b/‖w‖` that controls the active probability.
    ///
    /// Returns `±∞` (or `0` for `b = 0`) when `‖w‖` is at or below `w_floor`.
    pub fn ratio(&self, w_floor: f64) -> f64 {
        let n = self.w.norm();
        if n <= w_floor {
            if self.b > 0.0 {
                f64::INFINITY
            } else if self.b < 0.0 {
                f64::NEG_INFINITY
            } else {
                0.0
            }
        } else {
            self.b / n
        }
    }
}

/// Ground-truth target `y(x) = Γᵀx + Δ` in canonical form `Γ = (0, …, 0, γ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetSpec {
    pub gamma: f64,
    pub delta: f64,
    pub dim: usize,
}

impl TargetSpec {
    pub fn new(gamma: f64, delta: f64, dim: usize) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::Domain(format!("gamma must be positive, got {gamma}")));
        }
        if !delta.is_finite() {
            return Err(Error::Domain("delta is not finite".into()));
        }
        if dim == 0 {
            return Err(Error::Domain("dimension must be at least 1".into()));
        }
        Ok(Self { gamma, delta, dim })
    }

    /// The canonical weight vector `Γ`.
    pub fn gamma_vector(&self) -> Vector {
        Vector::last_axis(self.dim, self.gamma)
    }

    /// Parameters of the global optimum `(Γ, Δ)`.
    pub fn optimum(&self) -> ParamPoint {
        ParamPoint { w: self.gamma_vector(), b: self.delta }
    }

    /// `Γᵀx + Δ`.
    pub fn linear(&self, x: &[f64]) -> f64 {
        self.gamma * x[self.dim - 1] + self.delta
    }

    /// Shorthands `a = w − Γ` and `c = b − Δ`.
    pub fn residual(&self, theta: &ParamPoint) -> Result<(Vector, f64)> {
        check_dim(self.dim, theta.dim())?;
        let a = theta.w.sub(&self.gamma_vector())?;
        Ok((a, theta.b - self.delta))
    }
}
