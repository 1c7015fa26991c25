//! Monte-Carlo ground truth for losses and gradients under `x ~ N(0, I)`.
//!
//! Batches come from [`crate::rng::Stream`]: sample `i`, coordinate `j`
//! is normal number `i·L + j` of the stream for the batch seed. Every
//! estimator is a pure function of the batch, so reusing one batch across
//! parameter points gives common random numbers.

use crate::error::{check_dim, Error, Result};
use crate::rng::Stream;
use crate::types::{ParamPoint, TargetSpec};

/// Oracle batch size used by the consistency checks.
pub const DEFAULT_SAMPLES: usize = 1_000_000;
/// Acceptance margin in standard errors.
pub const DEFAULT_Z_MARGIN: f64 = 4.0;

#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch {
    dim: usize,
    seed: u64,
    data: Vec<f64>,
}

impl SampleBatch {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn count(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }
}

/// `n` i.i.d. standard-normal vectors in `R^L`, deterministic per seed.
pub fn sample_inputs(dim: usize, n: usize, seed: u64) -> Result<SampleBatch> {
    if dim == 0 || n == 0 {
        return Err(Error::Domain(format!("need L ≥ 1 and n ≥ 1, got L={dim}, n={n}")));
    }
    let mut data = vec![0.0; dim * n];
    Stream::new(seed).fill_normal(&mut data);
    Ok(SampleBatch { dim, seed, data })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateWithError {
    pub value: Vec<f64>,
    pub std_error: Vec<f64>,
}

impl EstimateWithError {
    /// `(value, std_error)` of a one-component estimate.
    pub fn scalar(&self) -> (f64, f64) {
        (self.value[0], self.std_error[0])
    }

    /// Per-component `(value − reference)/std_error`; `0` when both the
    /// difference and the standard error vanish, `±∞` when only the error does.
    pub fn z_scores(&self, reference: &[f64]) -> Vec<f64> {
        self.value
            .iter()
            .zip(&self.std_error)
            .zip(reference)
            .map(|((v, se), r)| {
                let d = v - r;
                if d == 0.0 {
                    0.0
                } else {
                    d / se
                }
            })
            .collect()
    }
}

// Welford accumulators over a fixed number of components.
struct Moments {
    n: usize,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl Moments {
    fn new(k: usize) -> Self {
        Self { n: 0, mean: vec![0.0; k], m2: vec![0.0; k] }
    }

    fn push(&mut self, x: &[f64]) {
        self.n += 1;
        let n = self.n as f64;
        for ((mean, m2), v) in self.mean.iter_mut().zip(&mut self.m2).zip(x) {
            let d = v - *mean;
            *mean += d / n;
            *m2 += d * (v - *mean);
        }
    }

    fn finish(self) -> EstimateWithError {
        let n = self.n as f64;
        let std_error = self
            .m2
            .iter()
            .map(|m2| if self.n > 1 { (m2 / (n - 1.0) / n).sqrt() } else { 0.0 })
            .collect();
        EstimateWithError { value: self.mean, std_error }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Model {
    Affine,
    Relu,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TargetKind {
    Linear,
    ReluActivated,
}

fn pointwise_error(
    x: &[f64],
    theta: &ParamPoint,
    a: &[f64],
    c: f64,
    target: &TargetSpec,
    model: Model,
    kind: TargetKind,
) -> f64 {
    match (model, kind) {
        // Residual form keeps the optimum exactly zero.
        (Model::Affine, TargetKind::Linear) => crate::types::dot(a, x) + c,
        _ => {
            let pre = theta.w.dot(x) + theta.b;
            let y_hat = match model {
                Model::Affine => pre,
                Model::Relu => pre.max(0.0),
            };
            let y = target.linear(x);
            let y = match kind {
                TargetKind::Linear => y,
                TargetKind::ReluActivated => y.max(0.0),
            };
            y_hat - y
        }
    }
}

/// Batch estimate of `E[½ε(x)²]` for the chosen model and target kind.
pub fn mc_loss(
    theta: &ParamPoint,
    target: &TargetSpec,
    model: Model,
    kind: TargetKind,
    batch: &SampleBatch,
) -> Result<EstimateWithError> {
    check_dim(target.dim, batch.dim())?;
    let (a, c) = target.residual(theta)?;
    let mut acc = Moments::new(1);
    for x in batch.rows() {
        let e = pointwise_error(x, theta, &a, c, target, model, kind);
        acc.push(&[0.5 * e * e]);
    }
    Ok(acc.finish())
}

/// Batch estimate of the single-ReLU gradient with the linear target,
/// `E[1(wᵀx + b > 0)(aᵀx + c)·(x, 1)]`. Components are `(∂w_1, …, ∂w_L, ∂b)`.
///
/// A pre-activation of exactly zero counts as inactive.
pub fn mc_gradient(
    theta: &ParamPoint,
    target: &TargetSpec,
    batch: &SampleBatch,
) -> Result<EstimateWithError> {
    check_dim(target.dim, batch.dim())?;
    let (a, c) = target.residual(theta)?;
    let l = target.dim;
    let mut acc = Moments::new(l + 1);
    let mut buf = vec![0.0; l + 1];
    for x in batch.rows() {
        let active = theta.w.dot(x) + theta.b > 0.0;
        if active {
            let e = a.dot(x) + c;
            for (bi, xi) in buf.iter_mut().zip(x) {
                *bi = e * xi;
            }
            buf[l] = e;
        } else {
            buf.fill(0.0);
        }
        acc.push(&buf);
    }
    Ok(acc.finish())
}

/// Central finite differences of [`mc_loss`] in each of the `L + 1`
/// parameters, all evaluated on the same batch.
pub fn fd_gradient(
    theta: &ParamPoint,
    target: &TargetSpec,
    model: Model,
    kind: TargetKind,
    batch: &SampleBatch,
    h: f64,
) -> Result<Vec<f64>> {
    if !(h > 0.0) {
        return Err(Error::Domain(format!("step must be positive, got {h}")));
    }
    check_dim(target.dim, theta.dim())?;
    let l = theta.dim();
    let loss = |p: &ParamPoint| -> Result<f64> { Ok(mc_loss(p, target, model, kind, batch)?.value[0]) };
    (0..=l)
        .map(|k| {
            let mut plus = theta.clone();
            let mut minus = theta.clone();
            if k < l {
                plus.w.0[k] += h;
                minus.w.0[k] -= h;
            } else {
                plus.b += h;
                minus.b -= h;
            }
            Ok((loss(&plus)? - loss(&minus)?) / (2.0 * h))
        })
        .collect()
}

/// Settings of the analytic-vs-Monte-Carlo gradient suite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientCheckConfig {
    pub dim: usize,
    pub trials: usize,
    pub samples: usize,
    pub seed: u64,
    /// Points are drawn with `|b/‖w‖| ≤ max_abs_ratio`.
    pub max_abs_ratio: f64,
    pub margin: f64,
}

impl Default for GradientCheckConfig {
    fn default() -> Self {
        Self { dim: 3, trials: 50, samples: DEFAULT_SAMPLES, seed: 1, max_abs_ratio: 3.0, margin: DEFAULT_Z_MARGIN }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradientTrial {
    pub theta: ParamPoint,
    pub target: TargetSpec,
    pub analytic: Vec<f64>,
    pub estimate: EstimateWithError,
    pub z: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradientCheckReport {
    pub trials: Vec<GradientTrial>,
    pub margin: f64,
}

impl GradientCheckReport {
    fn all_z(&self) -> impl Iterator<Item = f64> + '_ {
        self.trials.iter().flat_map(|t| t.z.iter().copied())
    }

    pub fn max_abs_z(&self) -> f64 {
        self.all_z().map(f64::abs).fold(0.0, f64::max)
    }

    /// Share of components with `|z| ≤ k`.
    pub fn fraction_within(&self, k: f64) -> f64 {
        let n = self.all_z().count();
        self.all_z().filter(|z| z.abs() <= k).count() as f64 / n as f64
    }

    /// `(trial, component, z)` for every component outside the margin.
    pub fn failures(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        for (i, t) in self.trials.iter().enumerate() {
            for (j, &z) in t.z.iter().enumerate() {
                if !(z.abs() <= self.margin) {
                    out.push((i, j, z));
                }
            }
        }
        out
    }

    pub fn passed(&self) -> bool {
        self.failures().is_empty()
    }
}

/// Compares `expected_gradient_full` with [`mc_gradient`] at random points,
/// all on one batch drawn from `seed`. Points come from a separate stream:
/// `w ~ N(0, I)`, `b = r‖w‖` with `r ~ U(−R, R)`, `γ ~ U(0.1, 2)`,
/// `Δ ~ U(−1, 1)`.
pub fn gradient_check(cfg: &GradientCheckConfig) -> Result<GradientCheckReport> {
    if cfg.trials == 0 || !(cfg.max_abs_ratio > 0.0) || !(cfg.margin > 0.0) {
        return Err(Error::Domain("gradient check needs trials ≥ 1 and positive ratio bound and margin".into()));
    }
    let batch = sample_inputs(cfg.dim, cfg.samples, cfg.seed)?;
    let mut points = Stream::new(cfg.seed.wrapping_add(0x5EED));
    let mut trials = Vec::with_capacity(cfg.trials);
    for _ in 0..cfg.trials {
        let mut w = vec![0.0; cfg.dim];
        points.fill_normal(&mut w);
        let r = points.uniform_in(-cfg.max_abs_ratio, cfg.max_abs_ratio);
        let b = r * crate::types::norm(&w);
        let target = TargetSpec::new(points.uniform_in(0.1, 2.0), points.uniform_in(-1.0, 1.0), cfg.dim)?;
        let theta = ParamPoint::new(crate::types::Vector::new(w)?, b)?;
        let g = crate::relu_field::expected_gradient_full(&theta, &target)?;
        let mut analytic = g.dw.into_inner();
        analytic.push(g.db);
        let estimate = mc_gradient(&theta, &target, &batch)?;
        let z = estimate.z_scores(&analytic);
        trials.push(GradientTrial { theta, target, analytic, estimate, z });
    }
    Ok(GradientCheckReport { trials, margin: cfg.margin })
}
