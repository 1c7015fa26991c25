use ndarray::{s, ArrayView2, Axis};

use super::{forward_batch, Mlp};
use crate::error::{Error, Result};

/// A unit counts as dead when it is active on fewer than 1% of probes.
pub const DEFAULT_CENSUS_EPSILON: f64 = 0.01;
pub const DEFAULT_PROBE_SIZE: usize = 10_000;

const CHUNK: usize = 2048;

#[derive(Debug, Clone, PartialEq)]
pub struct ReluCensus {
    pub per_layer_dead_fraction: Vec<f64>,
    pub max_layer_dead_fraction: f64,
    pub epsilon: f64,
    pub probe_size: usize,
}

/// Counts, per hidden layer, the units whose activation frequency over
/// `probes` is below `epsilon`. Networks without hidden layers report an
/// empty list and a maximum of 0.
pub fn census_dead_relus(mlp: &Mlp, probes: ArrayView2<f64>, epsilon: f64) -> Result<ReluCensus> {
    if probes.nrows() == 0 {
        return Err(Error::Domain("census needs a nonempty probe set".into()));
    }
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::Domain(format!("epsilon must lie in [0, 1], got {epsilon}")));
    }
    let hidden = mlp.hidden_layers();
    let mut active: Vec<Vec<usize>> = mlp.layers()[..hidden].iter().map(|l| vec![0; l.n_out()]).collect();
    let n = probes.nrows();
    for start in (0..n).step_by(CHUNK) {
        let chunk = probes.slice(s![start..(start + CHUNK).min(n), ..]);
        let acts = forward_batch(mlp, chunk)?;
        for (k, counts) in active.iter_mut().enumerate() {
            for row in acts.pre[k].axis_iter(Axis(0)) {
                for (c, &z) in counts.iter_mut().zip(row) {
                    if z > 0.0 {
                        *c += 1;
                    }
                }
            }
        }
    }
    let per_layer: Vec<f64> = active
        .iter()
        .map(|counts| {
            let dead = counts.iter().filter(|&&c| (c as f64) < epsilon * n as f64).count();
            dead as f64 / counts.len() as f64
        })
        .collect();
    let max = per_layer.iter().copied().fold(0.0, f64::max);
    Ok(ReluCensus { per_layer_dead_fraction: per_layer, max_layer_dead_fraction: max, epsilon, probe_size: n })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{init_mlp, Layer};
    use crate::rng::Stream;
    use ndarray::{array, Array2};

    fn probes(dim: usize, n: usize, seed: u64) -> Array2<f64> {
        let mut s = Stream::new(seed);
        Array2::from_shape_simple_fn((n, dim), || s.normal())
    }

    #[test]
    fn hugely_negative_bias_is_dead() {
        let mut mlp = init_mlp(&[4, 3, 1], 1).unwrap();
        mlp.layers_mut()[0].weight.row_mut(1).fill(1e-3);
        mlp.layers_mut()[0].bias[1] = -1e6;
        let c = census_dead_relus(&mlp, probes(4, 500, 2).view(), 0.01).unwrap();
        assert!(c.per_layer_dead_fraction[0] >= 1.0 / 3.0);
        assert_eq!(c.max_layer_dead_fraction, c.per_layer_dead_fraction[0]);
        assert_eq!(c.probe_size, 500);
    }

    #[test]
    fn threshold_arithmetic() {
        // Unit active only on the first probe.
        let mlp = Mlp::from_layers(vec![
            Layer { weight: array![[1.0]], bias: array![-0.5] },
            Layer { weight: array![[1.0]], bias: array![0.0] },
        ])
        .unwrap();
        let mut p = Array2::zeros((10_000, 1));
        p[[0, 0]] = 1.0;
        let c = census_dead_relus(&mlp, p.view(), 1e-3).unwrap();
        assert_eq!(c.per_layer_dead_fraction, vec![1.0]);
        let c = census_dead_relus(&mlp, p.view(), 1e-4).unwrap();
        assert_eq!(c.per_layer_dead_fraction, vec![0.0]);
    }

    #[test]
    fn fresh_shallow_net_is_alive() {
        let mlp = init_mlp(&[13, 200, 1], 3).unwrap();
        let c = census_dead_relus(&mlp, probes(13, 10_000, 4).view(), DEFAULT_CENSUS_EPSILON).unwrap();
        assert!(c.max_layer_dead_fraction < 0.05);
    }

    #[test]
    fn no_hidden_layer() {
        let mlp = init_mlp(&[3, 1], 3).unwrap();
        let c = census_dead_relus(&mlp, probes(3, 10, 4).view(), 0.01).unwrap();
        assert!(c.per_layer_dead_fraction.is_empty());
        assert_eq!(c.max_layer_dead_fraction, 0.0);
        assert!(census_dead_relus(&mlp, probes(3, 0, 4).view(), 0.01).is_err());
    }
}
