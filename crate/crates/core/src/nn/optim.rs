use std::fmt;

use super::{Gradients, Layer, Mlp};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Optimizer {
    Sgd { lr: f64 },
    Adam { lr: f64, b1: f64, b2: f64, eps_hat: f64 },
}

impl Optimizer {
    pub const ADAM_LR: f64 = 1e-3;
    pub const SGD_LR: f64 = 1e-2;

    /// Adam with `(b1, b2, eps_hat) = (0.9, 0.999, 1e-8)`.
    pub fn adam(lr: f64) -> Self {
        Optimizer::Adam { lr, b1: 0.9, b2: 0.999, eps_hat: 1e-8 }
    }

    pub fn lr(&self) -> f64 {
        match *self {
            Optimizer::Sgd { lr } | Optimizer::Adam { lr, .. } => lr,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Optimizer::Sgd { .. } => "sgd",
            Optimizer::Adam { .. } => "adam",
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lr() > 0.0 && self.lr().is_finite()) {
            return Err(Error::Domain(format!("learning rate must be positive, got {}", self.lr())));
        }
        if let Optimizer::Adam { b1, b2, eps_hat, .. } = *self {
            if !(0.0..1.0).contains(&b1) || !(0.0..1.0).contains(&b2) || !(eps_hat >= 0.0) {
                return Err(Error::Domain("Adam needs b1, b2 in [0, 1) and eps_hat ≥ 0".into()));
            }
        }
        Ok(())
    }
}

impl fmt::Display for Optimizer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub optimizer: Optimizer,
    pub batch_size: usize,
    pub steps: usize,
    pub seed: u64,
    pub checkpoint_every: usize,
}

impl TrainConfig {
    pub const DEFAULT_STEPS: usize = 50_000;
    pub const LONG_STEPS: usize = 250_000;
    pub const DEFAULT_BATCH: usize = 64;
    pub const DEFAULT_CHECKPOINT: usize = 1000;

    pub fn new(optimizer: Optimizer, seed: u64) -> Self {
        Self {
            optimizer,
            batch_size: Self::DEFAULT_BATCH,
            steps: Self::DEFAULT_STEPS,
            seed,
            checkpoint_every: Self::DEFAULT_CHECKPOINT,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.optimizer.validate()?;
        if self.batch_size == 0 || self.checkpoint_every == 0 {
            return Err(Error::Domain("batch_size and checkpoint_every must be ≥ 1".into()));
        }
        Ok(())
    }

    /// Steps at which the census runs: 0, every `checkpoint_every`, and the
    /// last step.
    pub fn checkpoints(&self) -> Vec<usize> {
        let mut c: Vec<usize> = (0..=self.steps).step_by(self.checkpoint_every).collect();
        if c.last() != Some(&self.steps) {
            c.push(self.steps);
        }
        c
    }
}

fn check_shapes(mlp: &Mlp, grads: &Gradients) -> Result<()> {
    crate::error::check_dim(mlp.layers().len(), grads.len())?;
    for (l, g) in mlp.layers().iter().zip(grads) {
        if l.weight.dim() != g.weight.dim() || l.bias.len() != g.bias.len() {
            return Err(Error::Shape { expected: l.weight.len(), got: g.weight.len() });
        }
    }
    Ok(())
}

pub fn sgd_step(mlp: &mut Mlp, grads: &Gradients, lr: f64) -> Result<()> {
    check_shapes(mlp, grads)?;
    for (l, g) in mlp.layers_mut().iter_mut().zip(grads) {
        l.weight.scaled_add(-lr, &g.weight);
        l.bias.scaled_add(-lr, &g.bias);
    }
    Ok(())
}

/// First and second moment estimates plus the step count.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Gradients,
    pub v: Gradients,
    pub t: u64,
}

impl AdamState {
    pub fn new(mlp: &Mlp) -> Self {
        let zeros: Gradients = mlp.layers().iter().map(|l| Layer::zeros(l.n_in(), l.n_out())).collect();
        Self { m: zeros.clone(), v: zeros, t: 0 }
    }
}

/// Bias-corrected Adam; `eps_hat` is added to `√v̂`.
pub fn adam_step(
    mlp: &mut Mlp,
    grads: &Gradients,
    state: &mut AdamState,
    lr: f64,
    b1: f64,
    b2: f64,
    eps_hat: f64,
) -> Result<()> {
    check_shapes(mlp, grads)?;
    check_shapes(mlp, &state.m)?;
    state.t += 1;
    let c1 = 1.0 - b1.powf(state.t as f64);
    let c2 = 1.0 - b2.powf(state.t as f64);
    let update = |p: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
        *m = b1 * *m + (1.0 - b1) * g;
        *v = b2 * *v + (1.0 - b2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *p -= lr * m_hat / (v_hat.sqrt() + eps_hat);
    };
    let layers = mlp.layers_mut().iter_mut().zip(grads).zip(state.m.iter_mut().zip(state.v.iter_mut()));
    for ((l, g), (m, v)) in layers {
        ndarray::Zip::from(&mut l.weight)
            .and(&g.weight)
            .and(&mut m.weight)
            .and(&mut v.weight)
            .for_each(|p, &g, m, v| update(p, g, m, v));
        ndarray::Zip::from(&mut l.bias)
            .and(&g.bias)
            .and(&mut m.bias)
            .and(&mut v.bias)
            .for_each(|p, &g, m, v| update(p, g, m, v));
    }
    Ok(())
}

/// Applies one optimizer update.
pub(crate) fn apply(opt: &Optimizer, mlp: &mut Mlp, grads: &Gradients, state: &mut AdamState) -> Result<()> {
    match *opt {
        Optimizer::Sgd { lr } => sgd_step(mlp, grads, lr),
        Optimizer::Adam { lr, b1, b2, eps_hat } => adam_step(mlp, grads, state, lr, b1, b2, eps_hat),
    }
}
