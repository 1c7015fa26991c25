use std::io::Write;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rayon::prelude::*;

use super::optim::apply;
use super::{backward, census_dead_relus, init_mlp, AdamState, Dataset, Mlp, Optimizer, ReluCensus, TrainConfig};
use crate::error::{Error, Result};
use crate::output::fmt_f64;
use crate::rng::Stream;
use crate::types::ParamPoint;

/// Offset separating the mini-batch order stream from the init stream.
const ORDER_STREAM: u64 = 0x9E37_79B9_7F4A_7C15;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub step: usize,
    pub mse: f64,
    /// `None` once training has diverged.
    pub census: Option<ReluCensus>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub checkpoints: Vec<Checkpoint>,
    /// Mini-batch loss of every step.
    pub losses: Vec<f64>,
    pub diverged_at: Option<usize>,
}

/// Full-data mean squared error, multiplied by `scale`.
fn scaled_mse(mlp: &Mlp, data: &Dataset, scale: f64) -> Result<f64> {
    let pred = mlp.predict_batch(data.x.view())?;
    Ok((&pred - &data.y).mapv(|e| e * e).sum() / data.len() as f64 * scale)
}

/// Trains `mlp` in place on `data` with epoch-shuffled mini-batches. At
/// every checkpoint the full-data MSE (times `mse_scale`) and a census over
/// `probes` are recorded. A non-finite loss stops training; remaining
/// checkpoints carry `NaN` and no census.
pub fn train(
    mlp: &mut Mlp,
    data: &Dataset,
    cfg: &TrainConfig,
    probes: ArrayView2<f64>,
    epsilon: f64,
    mse_scale: f64,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    crate::error::check_dim(mlp.input_dim(), data.dim())?;
    let bs = cfg.batch_size.min(data.len());
    let mut order_rng = Stream::new(cfg.seed.wrapping_add(ORDER_STREAM));
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.shuffle(order_rng.rng_mut());
    let mut cursor = 0;
    let mut adam = AdamState::new(mlp);
    let schedule = cfg.checkpoints();
    let mut next_cp = schedule.iter().peekable();
    let mut checkpoints = Vec::with_capacity(schedule.len());
    let mut losses = Vec::with_capacity(cfg.steps);
    let mut diverged_at = None;

    for step in 0..=cfg.steps {
        if next_cp.peek() == Some(&&step) {
            next_cp.next();
            checkpoints.push(Checkpoint {
                step,
                mse: scaled_mse(mlp, data, mse_scale)?,
                census: Some(census_dead_relus(mlp, probes, epsilon)?),
            });
        }
        if step == cfg.steps {
            break;
        }
        if cursor + bs > order.len() {
            order.shuffle(order_rng.rng_mut());
            cursor = 0;
        }
        let idx = &order[cursor..cursor + bs];
        cursor += bs;
        let x = data.x.select(Axis(0), idx);
        let y = data.y.select(Axis(0), idx);
        let (loss, grads) = backward(mlp, x.view(), y.view())?;
        losses.push(loss);
        if !loss.is_finite() {
            diverged_at = Some(step);
            break;
        }
        apply(&cfg.optimizer, mlp, &grads, &mut adam)?;
    }
    for &step in next_cp {
        checkpoints.push(Checkpoint { step, mse: f64::NAN, census: None });
    }
    Ok(TrainOutcome { checkpoints, losses, diverged_at })
}

/// Data and census settings shared by the sweeps. `data` holds raw
/// (un-normalized) targets.
#[derive(Debug, Clone)]
pub struct ExperimentSetup {
    pub data: Dataset,
    pub probes: Array2<f64>,
    pub epsilon: f64,
}

impl ExperimentSetup {
    pub const REFERENCE_DIM: usize = 13;
    pub const REFERENCE_SIZE: usize = 4096;
    pub const REFERENCE_NOISE: f64 = 0.2;
    pub const REFERENCE_DATA_SEED: u64 = 1;
    pub const REFERENCE_PROBE_SEED: u64 = 7;

    /// Default regression task: 4096 samples in `L = 13` of the 16-unit
    /// mixture with noise sd 0.2, 10 000 census probes, `ε = 1%`.
    pub fn reference() -> Result<Self> {
        let data = super::synthetic_dataset(
            Self::REFERENCE_DIM,
            Self::REFERENCE_SIZE,
            &super::DatasetShape::default_mixture(),
            Self::REFERENCE_NOISE,
            Self::REFERENCE_DATA_SEED,
        )?;
        Ok(Self::new(data, super::DEFAULT_PROBE_SIZE, Self::REFERENCE_PROBE_SEED, super::DEFAULT_CENSUS_EPSILON))
    }

    /// Probe inputs `x ~ N(0, I_L)` from their own seed.
    pub fn new(data: Dataset, probe_size: usize, probe_seed: u64, epsilon: f64) -> Self {
        let probes = gaussian_probes(probe_size, data.dim(), 1.0, probe_seed);
        Self { data, probes, epsilon }
    }
}

/// `n × dim` matrix of `N(0, sd²)` entries, row-major from `seed`.
pub fn gaussian_probes(n: usize, dim: usize, sd: f64, seed: u64) -> Array2<f64> {
    let mut s = Stream::new(seed);
    Array2::from_shape_simple_fn((n, dim), || sd * s.normal())
}

/// One row per checkpoint. `mse` is measured after undoing `γ` and `δ`,
/// i.e. against the zero-mean unit-variance targets, so runs with
/// different normalizations are comparable.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub gamma: f64,
    pub delta: f64,
    pub optimizer: String,
    pub seed: u64,
    pub step: usize,
    pub mse: f64,
    pub max_dead_fraction: f64,
    pub layer_dead_fractions: Vec<f64>,
}

fn run_normalized(
    setup: &ExperimentSetup,
    dims: &[usize],
    gamma: f64,
    delta: f64,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    let raw = setup.data.y.as_slice().ok_or_else(|| Error::Domain("non-contiguous targets".into()))?;
    let (y, _) = super::normalize_targets(raw, gamma, delta)?;
    let data = setup.data.with_targets(y)?;
    let mut mlp = init_mlp(dims, cfg.seed)?;
    train(&mut mlp, &data, cfg, setup.probes.view(), setup.epsilon, 1.0 / (gamma * gamma))
}

fn census_fields(cp: &Checkpoint, hidden: usize) -> (f64, Vec<f64>) {
    match &cp.census {
        Some(c) => (c.max_layer_dead_fraction, c.per_layer_dead_fraction.clone()),
        None => (f64::NAN, vec![f64::NAN; hidden]),
    }
}

/// Trains one network per `(γ, δ, optimizer, seed)`; seeds are
/// `base.seed + i` for `i < n_seeds`. Runs execute on the current rayon
/// pool; row order is fixed by the loop nesting.
pub fn gamma_sweep_experiment(
    gammas: &[f64],
    deltas: &[f64],
    optimizers: &[Optimizer],
    base: &TrainConfig,
    hidden: &[usize],
    setup: &ExperimentSetup,
    n_seeds: usize,
) -> Result<Vec<SweepRow>> {
    if gammas.is_empty() || deltas.is_empty() || optimizers.is_empty() || n_seeds == 0 {
        return Err(Error::Domain("sweep lists must be nonempty".into()));
    }
    let mut dims = vec![setup.data.dim()];
    dims.extend_from_slice(hidden);
    dims.push(1);
    let mut jobs = Vec::new();
    for &g in gammas {
        for &d in deltas {
            for opt in optimizers {
                for i in 0..n_seeds as u64 {
                    jobs.push((g, d, *opt, base.seed + i));
                }
            }
        }
    }
    let runs: Vec<Result<Vec<SweepRow>>> = jobs
        .par_iter()
        .map(|&(gamma, delta, optimizer, seed)| {
            let cfg = TrainConfig { optimizer, seed, ..base.clone() };
            let out = run_normalized(setup, &dims, gamma, delta, &cfg)?;
            Ok(out
                .checkpoints
                .iter()
                .map(|cp| {
                    let (max, layers) = census_fields(cp, hidden.len());
                    SweepRow {
                        gamma,
                        delta,
                        optimizer: optimizer.name().to_string(),
                        seed,
                        step: cp.step,
                        mse: cp.mse,
                        max_dead_fraction: max,
                        layer_dead_fractions: layers,
                    }
                })
                .collect())
        })
        .collect();
    let mut rows = Vec::new();
    for r in runs {
        rows.extend(r?);
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DepthRow {
    pub depth: usize,
    pub seed: u64,
    pub step: usize,
    pub mse: f64,
    pub max_dead_fraction: f64,
    pub layer_dead_fractions: Vec<f64>,
}

/// Trains MLPs with `depth` hidden layers of `width` units at `(γ, δ = 0)`.
pub fn depth_sweep_experiment(
    depths: &[usize],
    width: usize,
    base: &TrainConfig,
    gamma: f64,
    setup: &ExperimentSetup,
    n_seeds: usize,
) -> Result<Vec<DepthRow>> {
    if depths.is_empty() || depths.contains(&0) || n_seeds == 0 || width == 0 {
        return Err(Error::Domain("depths must be ≥ 1 with a nonzero width and seed count".into()));
    }
    let jobs: Vec<(usize, u64)> =
        depths.iter().flat_map(|&d| (0..n_seeds as u64).map(move |i| (d, base.seed + i))).collect();
    let runs: Vec<Result<Vec<DepthRow>>> = jobs
        .par_iter()
        .map(|&(depth, seed)| {
            let mut dims = vec![setup.data.dim()];
            dims.extend(std::iter::repeat_n(width, depth));
            dims.push(1);
            let cfg = TrainConfig { seed, ..base.clone() };
            let out = run_normalized(setup, &dims, gamma, 0.0, &cfg)?;
            Ok(out
                .checkpoints
                .iter()
                .map(|cp| {
                    let (max, layers) = census_fields(cp, depth);
                    DepthRow { depth, seed, step: cp.step, mse: cp.mse, max_dead_fraction: max, layer_dead_fractions: layers }
                })
                .collect())
        })
        .collect();
    let mut rows = Vec::new();
    for r in runs {
        rows.extend(r?);
    }
    Ok(rows)
}

pub const SWEEP_HEADER: &str = "gamma,delta,optimizer,seed,step,mse,max_dead_fraction,layer_dead_fractions";
pub const DEPTH_HEADER: &str = "depth,seed,step,mse,max_dead_fraction,layer_dead_fractions";

/// Quoted JSON array; non-finite entries become `null`.
fn json_array(v: &[f64]) -> String {
    let items: Vec<String> =
        v.iter().map(|&x| if x.is_finite() { fmt_f64(x) } else { "null".to_string() }).collect();
    format!("\"[{}]\"", items.join(","))
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], out: &mut W) -> Result<()> {
    writeln!(out, "{SWEEP_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            fmt_f64(r.gamma),
            fmt_f64(r.delta),
            r.optimizer,
            r.seed,
            r.step,
            fmt_f64(r.mse),
            fmt_f64(r.max_dead_fraction),
            json_array(&r.layer_dead_fractions)
        )?;
    }
    Ok(())
}

pub fn write_depth_csv<W: Write>(rows: &[DepthRow], out: &mut W) -> Result<()> {
    writeln!(out, "{DEPTH_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.depth,
            r.seed,
            r.step,
            fmt_f64(r.mse),
            fmt_f64(r.max_dead_fraction),
            json_array(&r.layer_dead_fractions)
        )?;
    }
    Ok(())
}

/// Multiplies every weight and bias by `nu`.
pub fn rescale_params(mlp: &Mlp, nu: f64) -> Result<Mlp> {
    if !(nu > 0.0 && nu.is_finite()) {
        return Err(Error::Domain(format!("nu must be positive, got {nu}")));
    }
    let mut out = mlp.clone();
    for l in out.layers_mut() {
        l.weight.mapv_inplace(|v| v * nu);
        l.bias.mapv_inplace(|v| v * nu);
    }
    Ok(out)
}

/// `max_x |γ·ŷ(x; θ) − ŷ(x; ν·θ)|` over the probe rows.
pub fn rescaling_check(mlp: &Mlp, gamma: f64, nu: f64, probes: ArrayView2<f64>) -> Result<f64> {
    if probes.nrows() == 0 {
        return Err(Error::Domain("rescaling check needs probes".into()));
    }
    let base = mlp.predict_batch(probes)?;
    let scaled = rescale_params(mlp, nu)?.predict_batch(probes)?;
    Ok(max_abs_gap(&(base * gamma), &scaled))
}

fn max_abs_gap(a: &Array1<f64>, b: &Array1<f64>) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Smallest [`rescaling_check`] gap over `nus`, with the minimizing `ν`.
pub fn min_rescaling_gap(mlp: &Mlp, gamma: f64, nus: &[f64], probes: ArrayView2<f64>) -> Result<(f64, f64)> {
    let mut best = (f64::NAN, f64::INFINITY);
    for &nu in nus {
        let gap = rescaling_check(mlp, gamma, nu, probes)?;
        if gap < best.1 {
            best = (nu, gap);
        }
    }
    if best.0.is_nan() {
        return Err(Error::Domain("empty ν grid".into()));
    }
    Ok(best)
}

/// Homogeneity gap of a single ReLU unit: `max_x |γ·f(wᵀx + b) − f(γwᵀx + γb)|`.
pub fn single_unit_rescaling_gap(theta: &ParamPoint, gamma: f64, probes: ArrayView2<f64>) -> Result<f64> {
    crate::error::check_dim(theta.dim(), probes.ncols())?;
    let gw: Vec<f64> = theta.w.iter().map(|w| gamma * w).collect();
    let gb = gamma * theta.b;
    let mut gap: f64 = 0.0;
    for row in probes.rows() {
        let x = row.to_vec();
        let base = (theta.w.dot(&x) + theta.b).max(0.0);
        let scaled = (crate::types::dot(&gw, &x) + gb).max(0.0);
        gap = gap.max((gamma * base - scaled).abs());
    }
    Ok(gap)
}
