use std::io::{BufRead, Write};

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::output::{fmt_f64, parse_f64};
use crate::rng::Stream;

/// Parameters of `y = γ·(y* − μ̂)/σ̂ + δ` with population `σ̂`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizationParams {
    pub gamma: f64,
    pub delta: f64,
    pub mu_hat: f64,
    pub sigma_hat: f64,
}

impl NormalizationParams {
    pub fn normalize(&self, raw: f64) -> f64 {
        self.gamma * (raw - self.mu_hat) / self.sigma_hat + self.delta
    }

    pub fn denormalize(&self, y: f64) -> f64 {
        (y - self.delta) / self.gamma * self.sigma_hat + self.mu_hat
    }
}

pub fn normalize_targets(ys: &[f64], gamma: f64, delta: f64) -> Result<(Vec<f64>, NormalizationParams)> {
    if ys.len() < 2 {
        return Err(Error::DegenerateTarget(format!("need at least 2 targets, got {}", ys.len())));
    }
    if !(gamma > 0.0 && gamma.is_finite()) || !delta.is_finite() {
        return Err(Error::Domain(format!("need γ > 0 and finite δ, got ({gamma}, {delta})")));
    }
    let n = ys.len() as f64;
    let mu_hat = ys.iter().sum::<f64>() / n;
    let sigma_hat = (ys.iter().map(|y| (y - mu_hat).powi(2)).sum::<f64>() / n).sqrt();
    if !(sigma_hat > 0.0 && sigma_hat.is_finite()) {
        return Err(Error::DegenerateTarget("targets have zero variance".into()));
    }
    let p = NormalizationParams { gamma, delta, mu_hat, sigma_hat };
    Ok((ys.iter().map(|&y| p.normalize(y)).collect(), p))
}

#[derive(Debug, Clone, PartialEq)]
pub enum DatasetShape {
    /// `Γᵀx + Δ`.
    Affine { gamma: Vec<f64>, delta: f64 },
    /// `max{Γᵀx + Δ, 0}`.
    ReluTarget { gamma: Vec<f64>, delta: f64 },
    /// `Σⱼ aⱼ·max{uⱼᵀx + cⱼ, 0}` with `uⱼ ~ N(0, I/L)`, `cⱼ ~ N(0, ¼)`,
    /// `aⱼ ~ N(0, 1)` drawn from their own seed.
    Mixture { units: usize, seed: u64 },
}

impl DatasetShape {
    /// Default regression target: 16 ReLU units.
    pub fn default_mixture() -> Self {
        DatasetShape::Mixture { units: 16, seed: 2020 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    /// `n × L`.
    pub x: Array2<f64>,
    pub y: Array1<f64>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.x.ncols()
    }

    /// Same inputs with targets replaced.
    pub fn with_targets(&self, y: Vec<f64>) -> Result<Self> {
        crate::error::check_dim(self.len(), y.len())?;
        Ok(Self { x: self.x.clone(), y: Array1::from(y) })
    }
}

/// Inputs `x ~ N(0, I_L)` row by row, then one noise draw per row.
pub fn synthetic_dataset(dim: usize, n: usize, shape: &DatasetShape, noise_sd: f64, seed: u64) -> Result<Dataset> {
    if n < 2 || dim == 0 {
        return Err(Error::Domain(format!("need n ≥ 2 and L ≥ 1, got n = {n}, L = {dim}")));
    }
    if !(noise_sd >= 0.0 && noise_sd.is_finite()) {
        return Err(Error::Domain("noise_sd must be finite and ≥ 0".into()));
    }
    let mut s = Stream::new(seed);
    let x = Array2::from_shape_simple_fn((n, dim), || s.normal());
    let f: Box<dyn Fn(&[f64]) -> f64> = match shape {
        DatasetShape::Affine { gamma, delta } | DatasetShape::ReluTarget { gamma, delta } => {
            crate::error::check_dim(dim, gamma.len())?;
            let (g, d) = (gamma.clone(), *delta);
            let relu = matches!(shape, DatasetShape::ReluTarget { .. });
            Box::new(move |x| {
                let z = crate::types::dot(&g, x) + d;
                if relu { z.max(0.0) } else { z }
            })
        }
        DatasetShape::Mixture { units, seed } => {
            if *units == 0 {
                return Err(Error::Domain("mixture needs at least one unit".into()));
            }
            let mut ms = Stream::new(*seed);
            let scale = 1.0 / (dim as f64).sqrt();
            let u: Vec<Vec<f64>> = (0..*units).map(|_| (0..dim).map(|_| scale * ms.normal()).collect()).collect();
            let c: Vec<f64> = (0..*units).map(|_| 0.5 * ms.normal()).collect();
            let a: Vec<f64> = (0..*units).map(|_| ms.normal()).collect();
            Box::new(move |x| {
                (0..u.len()).map(|j| a[j] * (crate::types::dot(&u[j], x) + c[j]).max(0.0)).sum()
            })
        }
    };
    let y = x
        .rows()
        .into_iter()
        .map(|row| {
            let clean = f(row.as_slice().expect("row-major"));
            let eps = s.normal();
            if noise_sd > 0.0 { clean + noise_sd * eps } else { clean }
        })
        .collect();
    Ok(Dataset { x, y })
}

/// Header `x1,…,xL,y`.
pub fn write_dataset_csv<W: Write>(data: &Dataset, out: &mut W) -> Result<()> {
    let mut header: Vec<String> = (1..=data.dim()).map(|i| format!("x{i}")).collect();
    header.push("y".into());
    writeln!(out, "{}", header.join(","))?;
    for (row, y) in data.x.rows().into_iter().zip(&data.y) {
        let mut fields: Vec<String> = row.iter().map(|&v| fmt_f64(v)).collect();
        fields.push(fmt_f64(*y));
        writeln!(out, "{}", fields.join(","))?;
    }
    Ok(())
}

pub fn read_dataset_csv<R: BufRead>(input: R) -> Result<Dataset> {
    let mut lines = input.lines();
    let header = lines.next().transpose()?.ok_or_else(|| Error::Parse("empty dataset CSV".into()))?;
    let cols = header.split(',').count();
    if cols < 2 || !header.ends_with(",y") {
        return Err(Error::Parse(format!("bad dataset header {header:?}")));
    }
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for line in lines {
        let line = line?;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != cols {
            return Err(Error::Parse(format!("expected {cols} fields, got {}", fields.len())));
        }
        for (i, f) in fields.iter().enumerate() {
            let v = parse_f64(f).ok_or_else(|| Error::Parse(format!("bad number {f:?}")))?;
            if i + 1 < cols { xs.push(v) } else { ys.push(v) }
        }
    }
    let x = Array2::from_shape_vec((ys.len(), cols - 1), xs).map_err(|e| Error::Parse(e.to_string()))?;
    Ok(Dataset { x, y: Array1::from(ys) })
}
