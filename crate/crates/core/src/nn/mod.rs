//! Small fully connected regression networks trained from scratch.
//!
//! Hidden layers use ReLU, the output layer is affine with a single unit.
//! The loss is the mean over the batch of `½(ŷ − y)²`.

mod census;
mod data;
mod experiment;
mod optim;

pub use census::{census_dead_relus, ReluCensus, DEFAULT_CENSUS_EPSILON, DEFAULT_PROBE_SIZE};
pub use data::{
    normalize_targets, read_dataset_csv, synthetic_dataset, write_dataset_csv, Dataset,
    DatasetShape, NormalizationParams,
};
pub use experiment::{
    depth_sweep_experiment, gamma_sweep_experiment, gaussian_probes, min_rescaling_gap, rescale_params,
    rescaling_check, single_unit_rescaling_gap, train, write_depth_csv, write_sweep_csv,
    Checkpoint, DepthRow, ExperimentSetup, SweepRow, TrainOutcome, DEPTH_HEADER, SWEEP_HEADER,
};
pub use optim::{adam_step, sgd_step, AdamState, Optimizer, TrainConfig};

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{Error, Result};
use crate::rng::Stream;

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    /// `out × in`.
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Layer {
    pub fn zeros(n_in: usize, n_out: usize) -> Self {
        Self { weight: Array2::zeros((n_out, n_in)), bias: Array1::zeros(n_out) }
    }

    pub fn n_in(&self) -> usize {
        self.weight.ncols()
    }

    pub fn n_out(&self) -> usize {
        self.weight.nrows()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layers: Vec<Layer>,
}

/// Gradients share the layer layout of the network.
pub type Gradients = Vec<Layer>;

impl Mlp {
    pub fn from_layers(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Domain("network needs at least one layer".into()));
        }
        for pair in layers.windows(2) {
            if pair[0].n_out() != pair[1].n_in() {
                return Err(Error::Shape { expected: pair[0].n_out(), got: pair[1].n_in() });
            }
        }
        for l in &layers {
            if l.bias.len() != l.n_out() {
                return Err(Error::Shape { expected: l.n_out(), got: l.bias.len() });
            }
        }
        let out = layers.last().map(Layer::n_out).unwrap_or(0);
        if out != 1 {
            return Err(Error::Shape { expected: 1, got: out });
        }
        Ok(Self { layers })
    }

    pub fn zeros(dims: &[usize]) -> Result<Self> {
        check_dims(dims)?;
        Self::from_layers(dims.windows(2).map(|d| Layer::zeros(d[0], d[1])).collect())
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn layer_dims(&self) -> Vec<usize> {
        let mut dims = vec![self.input_dim()];
        dims.extend(self.layers.iter().map(Layer::n_out));
        dims
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].n_in()
    }

    pub fn hidden_layers(&self) -> usize {
        self.layers.len() - 1
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weight.len() + l.bias.len()).sum()
    }

    pub fn predict_batch(&self, x: ArrayView2<f64>) -> Result<Array1<f64>> {
        let acts = forward_batch(self, x)?;
        Ok(acts.prediction())
    }
}

fn check_dims(dims: &[usize]) -> Result<()> {
    if dims.len() < 2 || dims.iter().any(|&d| d == 0) {
        return Err(Error::Domain(format!("invalid layer dims {dims:?}")));
    }
    if dims[dims.len() - 1] != 1 {
        return Err(Error::Shape { expected: 1, got: dims[dims.len() - 1] });
    }
    Ok(())
}

/// Uniform `(−1/√n_in, 1/√n_in)` initialization of every weight and bias.
/// Draw order: layer by layer, weights row-major, then biases.
pub fn init_mlp(dims: &[usize], seed: u64) -> Result<Mlp> {
    check_dims(dims)?;
    let mut s = Stream::new(seed);
    let layers = dims
        .windows(2)
        .map(|d| {
            let a = 1.0 / (d[0] as f64).sqrt();
            let weight = Array2::from_shape_simple_fn((d[1], d[0]), || s.uniform_in(-a, a));
            let bias = Array1::from_shape_simple_fn(d[1], || s.uniform_in(-a, a));
            Layer { weight, bias }
        })
        .collect();
    Mlp::from_layers(layers)
}

/// Per-layer pre-activations `z` and outputs `a` for a single input. The
/// last entry of `post` holds the prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct Activations {
    pub pre: Vec<Array1<f64>>,
    pub post: Vec<Array1<f64>>,
}

pub fn forward(mlp: &Mlp, x: &[f64]) -> Result<(f64, Activations)> {
    let view = ArrayView2::from_shape((1, x.len()), x)
        .map_err(|_| Error::Shape { expected: mlp.input_dim(), got: x.len() })?;
    let acts = forward_batch(mlp, view)?;
    let pred = acts.post[acts.post.len() - 1][[0, 0]];
    let row = |m: &Array2<f64>| m.row(0).to_owned();
    Ok((
        pred,
        Activations {
            pre: acts.pre.iter().map(row).collect(),
            post: acts.post.iter().map(row).collect(),
        },
    ))
}

/// Batched activations, `batch × width` per layer.
#[derive(Debug, Clone)]
pub struct BatchActivations {
    pub pre: Vec<Array2<f64>>,
    pub post: Vec<Array2<f64>>,
}

impl BatchActivations {
    pub fn prediction(&self) -> Array1<f64> {
        self.post[self.post.len() - 1].column(0).to_owned()
    }
}

pub fn forward_batch(mlp: &Mlp, x: ArrayView2<f64>) -> Result<BatchActivations> {
    crate::error::check_dim(mlp.input_dim(), x.ncols())?;
    let n = mlp.layers.len();
    let mut pre = Vec::with_capacity(n);
    let mut post: Vec<Array2<f64>> = Vec::with_capacity(n);
    for (k, layer) in mlp.layers.iter().enumerate() {
        let input = if k == 0 { x } else { post[k - 1].view() };
        let z = input.dot(&layer.weight.t()) + &layer.bias;
        let a = if k + 1 < n { z.mapv(|v| v.max(0.0)) } else { z.clone() };
        pre.push(z);
        post.push(a);
    }
    Ok(BatchActivations { pre, post })
}

/// Mean `½(ŷ − y)²` over the batch.
pub fn batch_loss(mlp: &Mlp, x: ArrayView2<f64>, y: ArrayView1<f64>) -> Result<f64> {
    crate::error::check_dim(x.nrows(), y.len())?;
    let pred = mlp.predict_batch(x)?;
    Ok(0.5 * (&pred - &y).mapv(|e| e * e).sum() / y.len() as f64)
}

/// Exact mini-batch gradients of [`batch_loss`]. Returns the loss as well.
pub fn backward(mlp: &Mlp, x: ArrayView2<f64>, y: ArrayView1<f64>) -> Result<(f64, Gradients)> {
    if y.is_empty() {
        return Err(Error::Domain("empty batch".into()));
    }
    crate::error::check_dim(x.nrows(), y.len())?;
    let acts = forward_batch(mlp, x)?;
    let bsz = y.len() as f64;
    let err = acts.prediction() - &y;
    let loss = 0.5 * err.mapv(|e| e * e).sum() / bsz;

    let n = mlp.layers.len();
    let mut grads: Gradients = Vec::with_capacity(n);
    let mut delta = (err / bsz).insert_axis(Axis(1));
    for k in (0..n).rev() {
        let input = if k == 0 { x } else { acts.post[k - 1].view() };
        let weight = delta.t().dot(&input);
        let bias = delta.sum_axis(Axis(0));
        if k > 0 {
            let mut up = delta.dot(&mlp.layers[k].weight);
            up.zip_mut_with(&acts.pre[k - 1], |d, &z| {
                if z <= 0.0 {
                    *d = 0.0;
                }
            });
            delta = up;
        }
        grads.push(Layer { weight, bias });
    }
    grads.reverse();
    Ok((loss, grads))
}
