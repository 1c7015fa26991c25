//! Momentum gradient descent on the affine regressor `ŷ = wᵀx + b`.
//!
//! Under standard-normal inputs the expected gradient is `(w − Γ, b − Δ)`,
//! so every (momentum, parameter) pair evolves independently through the
//! same 2×2 companion matrix
//!
//! ```text
//!     A = | β        1 − β       |
//!         | −ηβ      1 − η(1 − β) |
//! ```
//!
//! acting on `(m_i, a_i)` with `a = w − Γ` and on `(m_{L+1}, c)` with
//! `c = b − Δ`. The eigenvalues of `A` alone decide convergence, oscillation
//! and sign-alternating "ripples".

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use num_complex::Complex64;

use crate::error::{check_dim, Error, Result};
use crate::output::fmt_f64;
use crate::types::{ParamPoint, TargetSpec, Vector};

/// Tolerance used to call a spectral radius exactly one.
pub const MARGINAL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimConfig {
    pub eta: f64,
    pub beta: f64,
    pub stop_norm: f64,
    pub max_iter: usize,
}

impl OptimConfig {
    pub const DEFAULT_STOP_NORM: f64 = 1e-6;

    pub fn new(eta: f64, beta: f64, stop_norm: f64, max_iter: usize) -> Result<Self> {
        check_eta_beta(eta, beta, false)?;
        if !(stop_norm > 0.0) {
            return Err(Error::Domain(format!("stop_norm must be positive, got {stop_norm}")));
        }
        if max_iter == 0 {
            return Err(Error::Domain("max_iter must be positive".into()));
        }
        Ok(Self { eta, beta, stop_norm, max_iter })
    }

    /// `stop_norm = 1e-6`.
    pub fn with_defaults(eta: f64, beta: f64, max_iter: usize) -> Result<Self> {
        Self::new(eta, beta, Self::DEFAULT_STOP_NORM, max_iter)
    }
}

fn check_eta_beta(eta: f64, beta: f64, allow_beta_one: bool) -> Result<()> {
    if !(eta > 0.0 && eta < 2.0) {
        return Err(Error::Domain(format!("eta must lie in (0, 2), got {eta}")));
    }
    let beta_ok = if allow_beta_one {
        (0.0..=1.0).contains(&beta)
    } else {
        (0.0..1.0).contains(&beta)
    };
    if !beta_ok {
        return Err(Error::Domain(format!("beta out of range, got {beta}")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompanionMatrix {
    pub entries: [[f64; 2]; 2],
}

impl CompanionMatrix {
    pub fn trace(&self) -> f64 {
        self.entries[0][0] + self.entries[1][1]
    }

    pub fn det(&self) -> f64 {
        self.entries[0][0] * self.entries[1][1] - self.entries[0][1] * self.entries[1][0]
    }

    /// `A·(m, p)`.
    pub fn apply(&self, s: [f64; 2]) -> [f64; 2] {
        let e = &self.entries;
        [e[0][0] * s[0] + e[0][1] * s[1], e[1][0] * s[0] + e[1][1] * s[1]]
    }
}

/// Companion matrix for `η ∈ (0, 2)`, `β ∈ [0, 1)`.
pub fn companion_matrix(eta: f64, beta: f64) -> Result<CompanionMatrix> {
    check_eta_beta(eta, beta, false)?;
    Ok(companion_unchecked(eta, beta))
}

/// Like [`companion_matrix`] but also admits the boundary `β = 1`, which is
/// meaningful for eigenvalue analysis even though descent never settles.
pub fn companion_matrix_for_analysis(eta: f64, beta: f64) -> Result<CompanionMatrix> {
    check_eta_beta(eta, beta, true)?;
    Ok(companion_unchecked(eta, beta))
}

fn companion_unchecked(eta: f64, beta: f64) -> CompanionMatrix {
    CompanionMatrix {
        entries: [[beta, 1.0 - beta], [-eta * beta, 1.0 - eta * (1.0 - beta)]],
    }
}

/// Roots of `λ² − tr(A)λ + det(A)`, ordered by real part, then imaginary part.
pub fn eigenvalues(a: &CompanionMatrix) -> (Complex64, Complex64) {
    let t = a.trace();
    let d = a.det();
    let disc = t * t - 4.0 * d;
    if disc >= 0.0 {
        let sq = disc.sqrt();
        // Larger-magnitude root first, the other through Vieta to avoid
        // cancellation.
        let big = 0.5 * (t + if t >= 0.0 { sq } else { -sq });
        let small = if big != 0.0 { d / big } else { 0.0 };
        let (l1, l2) = if big <= small { (big, small) } else { (small, big) };
        (Complex64::new(l1, 0.0), Complex64::new(l2, 0.0))
    } else {
        let re = 0.5 * t;
        let im = 0.5 * (-disc).sqrt();
        (Complex64::new(re, -im), Complex64::new(re, im))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Regime {
    ConvergentReal,
    ConvergentOscillatory,
    Ripples,
    Marginal,
    Divergent,
}

impl Regime {
    pub fn as_str(&self) -> &'static str {
        match self {
            Regime::ConvergentReal => "ConvergentReal",
            Regime::ConvergentOscillatory => "ConvergentOscillatory",
            Regime::Ripples => "Ripples",
            Regime::Marginal => "Marginal",
            Regime::Divergent => "Divergent",
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "ConvergentReal" => Regime::ConvergentReal,
            "ConvergentOscillatory" => Regime::ConvergentOscillatory,
            "Ripples" => Regime::Ripples,
            "Marginal" => Regime::Marginal,
            "Divergent" => Regime::Divergent,
            other => return Err(Error::Parse(format!("unknown regime {other:?}"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenReport {
    pub lambda1: Complex64,
    pub lambda2: Complex64,
    pub spectral_radius: f64,
    pub regime: Regime,
}

pub fn eigen_report(a: &CompanionMatrix) -> EigenReport {
    let (l1, l2) = eigenvalues(a);
    let spectral_radius = l1.norm().max(l2.norm());
    let complex = l1.im != 0.0;
    let regime = if spectral_radius > 1.0 + MARGINAL_TOL {
        Regime::Divergent
    } else if (spectral_radius - 1.0).abs() <= MARGINAL_TOL {
        Regime::Marginal
    } else if complex {
        Regime::ConvergentOscillatory
    } else if l1.re < 0.0 || l2.re < 0.0 {
        Regime::Ripples
    } else {
        Regime::ConvergentReal
    };
    EigenReport { lambda1: l1, lambda2: l2, spectral_radius, regime }
}

/// Regime of momentum descent at `(η, β)`; `β = 1` is accepted for analysis.
pub fn classify_regime(eta: f64, beta: f64) -> Result<Regime> {
    Ok(eigen_report(&companion_matrix_for_analysis(eta, beta)?).regime)
}

/// Discriminant `tr(A)² − 4 det(A)` as a function of `β`.
pub fn discriminant(eta: f64, beta: f64) -> f64 {
    let t = beta + 1.0 - eta * (1.0 - beta);
    t * t - 4.0 * beta
}

/// Smallest `β ∈ [0, 1)` at which the eigenvalues of `A` turn complex.
///
/// Scans a uniform grid for the first negative discriminant and refines the
/// bracket by bisection to `1e-12`.
pub fn complex_onset_beta(eta: f64) -> Result<f64> {
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::Domain(format!("eta must lie in (0, 1), got {eta}")));
    }
    const SCAN: usize = 10_000;
    let mut prev = 0.0;
    if discriminant(eta, prev) < 0.0 {
        return Ok(0.0);
    }
    for k in 1..SCAN {
        let beta = k as f64 / SCAN as f64;
        if discriminant(eta, beta) < 0.0 {
            let (mut lo, mut hi) = (prev, beta);
            while hi - lo > 1e-12 {
                let mid = 0.5 * (lo + hi);
                if discriminant(eta, mid) < 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            return Ok(hi);
        }
        prev = beta;
    }
    Err(Error::NotFound(format!("no complex eigenvalues for beta in [0, 1) at eta = {eta}")))
}

/// Root-locus samples `β_k = k/steps`, `k = 0..steps`.
pub fn root_locus(eta: f64, steps: usize) -> Result<Vec<(f64, EigenReport)>> {
    if steps == 0 {
        return Err(Error::Domain("root locus needs at least one step".into()));
    }
    (0..steps)
        .map(|k| {
            let beta = k as f64 / steps as f64;
            Ok((beta, eigen_report(&companion_matrix(eta, beta)?)))
        })
        .collect()
}

pub const ROOT_LOCUS_HEADER: &str = "beta,re_lambda1,im_lambda1,re_lambda2,im_lambda2,regime";

pub fn write_root_locus_csv<W: Write>(out: &mut W, locus: &[(f64, EigenReport)]) -> Result<()> {
    writeln!(out, "{ROOT_LOCUS_HEADER}")?;
    for (beta, r) in locus {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            fmt_f64(*beta),
            fmt_f64(r.lambda1.re),
            fmt_f64(r.lambda1.im),
            fmt_f64(r.lambda2.re),
            fmt_f64(r.lambda2.im),
            r.regime
        )?;
    }
    Ok(())
}

/// Expected affine-model gradient `(w − Γ, b − Δ)`.
pub fn affine_gradient(theta: &ParamPoint, target: &TargetSpec) -> Result<(Vector, f64)> {
    target.residual(theta)
}

/// Parameter and momentum vectors for momentum descent, flattened as
/// `(w_1, …, w_L, b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentumState {
    pub theta: Vec<f64>,
    pub m: Vec<f64>,
}

impl MomentumState {
    pub fn new(theta: Vec<f64>, m: Vec<f64>) -> Result<Self> {
        check_dim(theta.len(), m.len())?;
        Ok(Self { theta, m })
    }

    /// `m ← βm + (1−β)g`, `θ ← θ − ηm`. Returns `‖η·m‖₂` of the new momentum.
    ///
    /// An update whose norm is below `stop_norm` is not applied to `θ`.
    pub fn step(&mut self, grad: &[f64], cfg: &OptimConfig) -> f64 {
        debug_assert_eq!(grad.len(), self.m.len());
        let mut sq = 0.0;
        for (m, g) in self.m.iter_mut().zip(grad) {
            *m = cfg.beta * *m + (1.0 - cfg.beta) * g;
            let u = cfg.eta * *m;
            sq += u * u;
        }
        let norm = sq.sqrt();
        if norm >= cfg.stop_norm {
            for (p, m) in self.theta.iter_mut().zip(&self.m) {
                *p -= cfg.eta * m;
            }
        }
        norm
    }

    pub fn is_finite(&self) -> bool {
        self.theta.iter().chain(&self.m).all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryPoint {
    pub t: usize,
    pub theta: ParamPoint,
    pub m: Vec<f64>,
}

/// Recorded descent path. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    points: Vec<TrajectoryPoint>,
    converged: bool,
}

impl Trajectory {
    pub fn points(&self) -> &[TrajectoryPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn last(&self) -> &TrajectoryPoint {
        self.points.last().expect("trajectory holds at least the initial point")
    }

    /// True when the update norm fell below `stop_norm` before `max_iter`.
    pub fn converged(&self) -> bool {
        self.converged
    }
}

/// Runs momentum descent with a caller-supplied gradient on the flattened
/// `(w, b)` vector, recording every `stride`-th state plus the final one.
///
/// `grad` may displace the iterate it is handed (used to step off singular
/// sets) before returning the gradient there.
///
/// `t` counts applied updates; a run that starts at a stationary point
/// (`‖η·m₁‖ < stop_norm`) stops at `t = 0` with a single recorded point.
pub fn run_momentum<G>(
    state: MomentumState,
    cfg: &OptimConfig,
    stride: usize,
    mut grad: G,
) -> Result<Trajectory>
where
    G: FnMut(&mut [f64]) -> Result<Vec<f64>>,
{
    let stride = stride.max(1);
    let dim = state.theta.len() - 1;
    let to_point = |t: usize, s: &MomentumState| TrajectoryPoint {
        t,
        theta: ParamPoint { w: Vector(s.theta[..dim].to_vec()), b: s.theta[dim] },
        m: s.m.clone(),
    };
    let mut s = state;
    let mut points = vec![to_point(0, &s)];
    let mut converged = false;
    let mut t = 0;
    while t < cfg.max_iter {
        let g = grad(&mut s.theta)?;
        let norm = s.step(&g, cfg);
        if !s.is_finite() || !norm.is_finite() {
            return Err(Error::Divergence { step: t + 1 });
        }
        if norm < cfg.stop_norm {
            converged = true;
            break;
        }
        t += 1;
        if t % stride == 0 {
            points.push(to_point(t, &s));
        }
    }
    if points.last().map(|p| p.t) != Some(t) {
        points.push(to_point(t, &s));
    }
    Ok(Trajectory { points, converged })
}

/// Momentum descent on the affine model using its exact expected gradient.
///
/// `m0` defaults to zero; `stride` thins the stored path (1 keeps every step).
pub fn simulate_affine(
    theta0: &ParamPoint,
    m0: Option<&[f64]>,
    target: &TargetSpec,
    cfg: &OptimConfig,
    stride: usize,
) -> Result<Trajectory> {
    check_dim(target.dim, theta0.dim())?;
    let n = theta0.dim() + 1;
    let m = match m0 {
        Some(m) => {
            check_dim(n, m.len())?;
            m.to_vec()
        }
        None => vec![0.0; n],
    };
    let mut theta = theta0.w.as_slice().to_vec();
    theta.push(theta0.b);
    let gamma = target.gamma_vector();
    let delta = target.delta;
    run_momentum(MomentumState::new(theta, m)?, cfg, stride, |p| {
        let mut g: Vec<f64> = p[..n - 1].iter().zip(gamma.iter()).map(|(w, g)| w - g).collect();
        g.push(p[n - 1] - delta);
        Ok(g)
    })
}
