//! Expected loss gradient of the single-ReLU model `ŷ_f = max(wᵀx + b, 0)`
//! under `x ~ N(0, I)`, with the linear target `y = Γᵀx + Δ` standing in for
//! the ReLU-activated one.
//!
//! Everything is closed form in `Φ` and `φ` at the ratio `r = b/‖w‖`, after
//! rotating into the frame where `w` lies on the last axis. Dead and linear
//! cones are the level sets `Φ(r) < ε` and `Φ(r) > 1 − ε`.

use std::fmt;
use std::io::Write;

use crate::error::{check_dim, Error, Result};
use crate::householder::householder_rotation;
use crate::output::fmt_f64;
use crate::special::{std_normal_cdf, std_normal_pdf, std_normal_quantile};
use crate::types::{ParamPoint, TargetSpec, Vector};

/// Weight norms at or below this are treated as zero; the ratio `b/‖w‖`
/// then becomes `sign(b)·∞`.
pub const W_FLOOR: f64 = 1e-12;

/// `b/‖w‖` below which a unit counts as a practical saddle, since
/// `φ(±4) ≈ 1e-4`.
pub const SADDLE_RATIO: f64 = -4.0;

/// Default dead-cone threshold `ε = Φ(−4) ≈ 3.17e-5`.
pub fn default_epsilon() -> f64 {
    std_normal_cdf(SADDLE_RATIO)
}

/// `P(wᵀx + b > 0) = Φ(b/‖w‖)`.
pub fn active_probability(theta: &ParamPoint) -> f64 {
    std_normal_cdf(theta.ratio(W_FLOOR))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Cone {
    Dead,
    Linear,
    Intermediate,
}

impl Cone {
    pub fn as_str(&self) -> &'static str {
        match self {
            Cone::Dead => "Dead",
            Cone::Linear => "Linear",
            Cone::Intermediate => "Intermediate",
        }
    }
}

impl fmt::Display for Cone {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConeLabel {
    pub label: Cone,
    pub ratio: f64,
    pub epsilon: f64,
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon > 0.0 && epsilon < 0.5 {
        Ok(())
    } else {
        Err(Error::Domain(format!("epsilon must lie in (0, 0.5), got {epsilon}")))
    }
}

/// Dead iff `Φ(r) < ε`, Linear iff `Φ(r) > 1 − ε`.
pub fn classify_cone(theta: &ParamPoint, epsilon: f64) -> Result<ConeLabel> {
    check_epsilon(epsilon)?;
    let ratio = theta.ratio(W_FLOOR);
    Ok(ConeLabel { label: cone_of_ratio(ratio, epsilon), ratio, epsilon })
}

fn cone_of_ratio(ratio: f64, epsilon: f64) -> Cone {
    let p = std_normal_cdf(ratio);
    if p < epsilon {
        Cone::Dead
    } else if p > 1.0 - epsilon {
        Cone::Linear
    } else {
        Cone::Intermediate
    }
}

/// Ratio thresholds `(Φ⁻¹(ε), Φ⁻¹(1 − ε))` bounding the dead and linear cones.
pub fn cone_thresholds(epsilon: f64) -> Result<(f64, f64)> {
    check_epsilon(epsilon)?;
    Ok((std_normal_quantile(epsilon)?, std_normal_quantile(1.0 - epsilon)?))
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradientValue {
    pub dw: Vector,
    pub db: f64,
}

impl GradientValue {
    pub fn norm(&self) -> f64 {
        (self.dw.norm().powi(2) + self.db * self.db).sqrt()
    }
}

/// Closed-form expected gradient in `L` dimensions.
///
/// With `ã = U(w − Γ)`, `c = b − Δ` and `r = b/‖w‖`, the rotated weight
/// gradient is `ãᵢΦ(r)` off the last axis and `ã_LΦ(r) + (c − ã_L r)φ(r)`
/// on it; `∂L/∂b = ã_Lφ(r) + cΦ(r)`. The weight gradient is rotated back
/// with `Uᵀ`.
pub fn expected_gradient_full(theta: &ParamPoint, target: &TargetSpec) -> Result<GradientValue> {
    check_dim(target.dim, theta.dim())?;
    let wn = theta.w.norm();
    if wn <= W_FLOOR {
        return Err(Error::Singular(format!("‖w‖ = {wn:e} is below the floor")));
    }
    let u = householder_rotation(&theta.w)?;
    let (a, c) = target.residual(theta)?;
    let mut at = u.apply(&a)?;
    let r = theta.b / wn;
    let (cdf, pdf) = (std_normal_cdf(r), std_normal_pdf(r));
    let l = at.len() - 1;
    let a_last = at[l];
    for ai in &mut at[..l] {
        *ai *= cdf;
    }
    at[l] = a_last * cdf + (c - a_last * r) * pdf;
    let db = a_last * pdf + c * cdf;
    Ok(GradientValue { dw: Vector(u.apply_transpose(&at)?), db })
}

/// Expected gradient `(∂L/∂w_L, ∂L/∂b)` in the reduced setting where `w` and
/// `w − Γ` both lie on the last axis. `ρ = sign(w_L)` absorbs the
/// orientation of the rotation.
pub fn expected_gradient_2d(w_last: f64, b: f64, target: &TargetSpec) -> Result<(f64, f64)> {
    if !(w_last.abs() > W_FLOOR) {
        return Err(Error::Singular(format!("|w_L| = {w_last:e} is below the floor")));
    }
    Ok(gradient_2d_unchecked(w_last, b, target.gamma, target.delta))
}

#[inline]
pub(crate) fn gradient_2d_unchecked(w_last: f64, b: f64, gamma: f64, delta: f64) -> (f64, f64) {
    let rho = w_last.signum();
    let a = w_last - gamma;
    let c = b - delta;
    let r = b / w_last.abs();
    let (cdf, pdf) = (std_normal_cdf(r), std_normal_pdf(r));
    // r·φ(r) → 0 as |r| → ∞, but ∞·0 would give NaN.
    let r_pdf = if pdf == 0.0 { 0.0 } else { r * pdf };
    let dw = a * cdf + rho * c * pdf - a * r_pdf;
    let db = rho * a * pdf + c * cdf;
    (dw, db)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CriticalLabel {
    GlobalOptimum,
    DeadSaddle,
    NonCritical,
}

/// Critical-point label using the default practical-saddle ratio `−4`.
pub fn classify_critical(theta: &ParamPoint, target: &TargetSpec, tol: f64) -> CriticalLabel {
    classify_critical_with(theta, target, tol, SADDLE_RATIO)
}

pub fn classify_critical_with(
    theta: &ParamPoint,
    target: &TargetSpec,
    tol: f64,
    saddle_ratio: f64,
) -> CriticalLabel {
    let wn = theta.w.norm();
    let at_optimum = match target.residual(theta) {
        Ok((a, c)) => a.norm() <= tol && c.abs() <= tol,
        Err(_) => false,
    };
    if at_optimum {
        CriticalLabel::GlobalOptimum
    } else if (wn <= tol && theta.b < -tol) || (wn > tol && theta.b / wn < saddle_ratio) {
        CriticalLabel::DeadSaddle
    } else {
        CriticalLabel::NonCritical
    }
}

/// How the gradient weight under the linear-target approximation relates to
/// the exact one at a single input.
///
/// Both are gated by the unit's activity: the exact weight is
/// `1[wᵀx+b>0]·(ŷ_f − y_f)`, the approximation `1[wᵀx+b>0]·(ŷ_f − y)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ErrorRelation {
    Identical,
    /// `0 ≤ exact ≤ approximate`.
    SameSignNonNegative,
    /// Neither of the above; never produced for finite inputs.
    SignMismatch,
}

pub fn error_sign_relation(
    x: &[f64],
    theta: &ParamPoint,
    target: &TargetSpec,
) -> Result<ErrorRelation> {
    check_dim(target.dim, x.len())?;
    check_dim(target.dim, theta.dim())?;
    let pre = theta.w.dot(x) + theta.b;
    if pre <= 0.0 {
        return Ok(ErrorRelation::Identical);
    }
    let y = target.linear(x);
    let y_f = y.max(0.0);
    let exact = pre - y_f;
    let approx = pre - y;
    Ok(if exact == approx {
        ErrorRelation::Identical
    } else if exact >= 0.0 && exact <= approx {
        ErrorRelation::SameSignNonNegative
    } else {
        ErrorRelation::SignMismatch
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldSample {
    pub w_last: f64,
    pub b: f64,
    /// `NaN` on the singular ray `w_L = 0`, `b ≥ 0`.
    pub g_w: f64,
    pub g_b: f64,
    pub cone: Cone,
}

/// Reduced two-dimensional gradient field sampled on a grid that includes
/// both range endpoints, rows ordered by `b` then `w_L`.
pub fn vector_field(
    w_range: (f64, f64),
    b_range: (f64, f64),
    resolution: (usize, usize),
    target: &TargetSpec,
    epsilon: f64,
) -> Result<Vec<FieldSample>> {
    check_epsilon(epsilon)?;
    let (nw, nb) = resolution;
    if nw < 2 || nb < 2 || !(w_range.0 < w_range.1) || !(b_range.0 < b_range.1) {
        return Err(Error::Domain("field grid needs lo < hi and at least 2×2 points".into()));
    }
    let mut out = Vec::with_capacity(nw * nb);
    for j in 0..nb {
        let b = b_range.0 + (b_range.1 - b_range.0) * j as f64 / (nb - 1) as f64;
        for i in 0..nw {
            let w = w_range.0 + (w_range.1 - w_range.0) * i as f64 / (nw - 1) as f64;
            let (g_w, g_b) = if w.abs() > W_FLOOR {
                gradient_2d_unchecked(w, b, target.gamma, target.delta)
            } else if b < 0.0 {
                (0.0, 0.0)
            } else {
                (f64::NAN, f64::NAN)
            };
            let theta = ParamPoint::axis_aligned(1, w, b);
            let cone = cone_of_ratio(theta.ratio(W_FLOOR), epsilon);
            out.push(FieldSample { w_last: w, b, g_w, g_b, cone });
        }
    }
    Ok(out)
}

pub const FIELD_HEADER: &str = "w_L,b,g_w,g_b,cone";

pub fn write_field_csv<W: Write>(out: &mut W, field: &[FieldSample]) -> Result<()> {
    writeln!(out, "{FIELD_HEADER}")?;
    for s in field {
        writeln!(
            out,
            "{},{},{},{},{}",
            fmt_f64(s.w_last),
            fmt_f64(s.b),
            fmt_f64(s.g_w),
            fmt_f64(s.g_b),
            s.cone
        )?;
    }
    Ok(())
}
