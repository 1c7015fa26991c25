//! Basin-of-attraction maps for momentum descent on the reduced
//! `(w_L, b)` ReLU gradient field.
//!
//! Every grid cell center is used as an initialization; descent runs until
//! the update norm drops below `stop_norm` (or `max_iter`), and the end
//! point is labelled as the global optimum, the dead cone, or unresolved.

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use rayon::prelude::*;

use crate::affine::{run_momentum, MomentumState, OptimConfig, Trajectory};
use crate::error::{Error, Result};
use crate::output::{fmt_f64, parse_f64};
use crate::relu_field::{
    classify_cone, classify_critical_with, default_epsilon, gradient_2d_unchecked, Cone,
    CriticalLabel, SADDLE_RATIO, W_FLOOR,
};
use crate::types::{ParamPoint, TargetSpec};

#[derive(Debug, Clone, PartialEq)]
pub struct BasinConfig {
    pub w_range: (f64, f64),
    pub b_range: (f64, f64),
    /// `(nw, nb)` cells along `w_L` and `b`.
    pub resolution: (usize, usize),
    pub optim: OptimConfig,
    pub target: TargetSpec,
    pub optimum_tol: f64,
    pub dead_epsilon: f64,
    pub saddle_ratio: f64,
}

impl BasinConfig {
    pub const DEFAULT_MAX_ITER: usize = 1_000_000;

    /// `[−2, 2]²` at 101×101, `stop_norm = 1e-6`, `max_iter = 1e6`, `Δ = 0`,
    /// `optimum_tol = 1e-3`, `dead_epsilon = Φ(−4)`.
    pub fn reference(gamma: f64, eta: f64, beta: f64) -> Result<Self> {
        let cfg = Self {
            w_range: (-2.0, 2.0),
            b_range: (-2.0, 2.0),
            resolution: (101, 101),
            optim: OptimConfig::with_defaults(eta, beta, Self::DEFAULT_MAX_ITER)?,
            target: TargetSpec::new(gamma, 0.0, 1)?,
            optimum_tol: 1e-3,
            dead_epsilon: default_epsilon(),
            saddle_ratio: SADDLE_RATIO,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let (nw, nb) = self.resolution;
        if nw < 2 || nb < 2 {
            return Err(Error::Domain(format!("resolution must be at least 2×2, got {nw}×{nb}")));
        }
        if !(self.w_range.0 < self.w_range.1) || !(self.b_range.0 < self.b_range.1) {
            return Err(Error::Domain("grid ranges need lo < hi".into()));
        }
        if !(self.optimum_tol > 0.0) {
            return Err(Error::Domain("optimum_tol must be positive".into()));
        }
        if !(self.dead_epsilon > 0.0 && self.dead_epsilon < 0.5) {
            return Err(Error::Domain("dead_epsilon must lie in (0, 0.5)".into()));
        }
        Ok(())
    }

    /// Center of cell `(i, j)`, `i` along `w_L`, `j` along `b`.
    pub fn cell_center(&self, i: usize, j: usize) -> (f64, f64) {
        let (nw, nb) = self.resolution;
        let w = self.w_range.0 + (i as f64 + 0.5) * (self.w_range.1 - self.w_range.0) / nw as f64;
        let b = self.b_range.0 + (j as f64 + 0.5) * (self.b_range.1 - self.b_range.0) / nb as f64;
        (w, b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OutcomeKind {
    Optimum,
    DeadCone,
    Unresolved,
}

impl OutcomeKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            OutcomeKind::Optimum => "Optimum",
            OutcomeKind::DeadCone => "DeadCone",
            OutcomeKind::Unresolved => "Unresolved",
        }
    }

    pub fn gray_level(&self) -> u8 {
        match self {
            OutcomeKind::Optimum => 255,
            OutcomeKind::DeadCone => 0,
            OutcomeKind::Unresolved => 128,
        }
    }
}

impl fmt::Display for OutcomeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for OutcomeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "Optimum" => Ok(OutcomeKind::Optimum),
            "DeadCone" => Ok(OutcomeKind::DeadCone),
            "Unresolved" => Ok(OutcomeKind::Unresolved),
            other => Err(Error::Parse(format!("unknown outcome {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BasinOutcome {
    pub kind: OutcomeKind,
    pub final_point: (f64, f64),
    pub steps: usize,
}

/// Momentum descent on the reduced `(w_L, b)` field.
///
/// On the `w_L = 0` axis the field is replaced by its limits: the dead
/// saddle (`|w_L| ≤ w_floor`, `b < 0`) has zero gradient, and an iterate on
/// the ray `b ≥ 0` is displaced to `±10·w_floor`, keeping the sign of the
/// previous iterate (`+` for the first).
pub fn simulate_relu_2d(
    init: (f64, f64),
    m0: Option<(f64, f64)>,
    target: &TargetSpec,
    cfg: &OptimConfig,
    stride: usize,
) -> Result<Trajectory> {
    if !init.0.is_finite() || !init.1.is_finite() {
        return Err(Error::Domain("initial point must be finite".into()));
    }
    let m = m0.map_or(vec![0.0, 0.0], |(a, b)| vec![a, b]);
    let (gamma, delta) = (target.gamma, target.delta);
    let mut sign = 1.0;
    run_momentum(MomentumState::new(vec![init.0, init.1], m)?, cfg, stride, |p| {
        if p[0].abs() <= W_FLOOR {
            if p[1] < 0.0 {
                return Ok(vec![0.0, 0.0]);
            }
            p[0] = sign * W_FLOOR * 10.0;
        }
        sign = p[0].signum();
        let (gw, gb) = gradient_2d_unchecked(p[0], p[1], gamma, delta);
        Ok(vec![gw, gb])
    })
}

/// Labels an end point of descent.
pub fn classify_endpoint(point: (f64, f64), cfg: &BasinConfig) -> OutcomeKind {
    let (w, b) = point;
    let t = &cfg.target;
    if ((w - t.gamma).powi(2) + (b - t.delta).powi(2)).sqrt() <= cfg.optimum_tol {
        return OutcomeKind::Optimum;
    }
    let theta = ParamPoint::axis_aligned(1, w, b);
    let dead_cone = matches!(classify_cone(&theta, cfg.dead_epsilon), Ok(l) if l.label == Cone::Dead);
    let t1 = TargetSpec { dim: 1, ..*t };
    let saddle = classify_critical_with(&theta, &t1, cfg.optimum_tol, cfg.saddle_ratio)
        == CriticalLabel::DeadSaddle;
    if dead_cone || saddle {
        OutcomeKind::DeadCone
    } else {
        OutcomeKind::Unresolved
    }
}

/// Momentum descent from `init` with zero initial momentum. A run that
/// overflows is reported as unresolved with a `NaN` end point.
pub fn run_descent(init: (f64, f64), cfg: &BasinConfig) -> BasinOutcome {
    match simulate_relu_2d(init, None, &cfg.target, &cfg.optim, usize::MAX) {
        Ok(traj) => {
            let last = traj.last();
            let final_point = (last.theta.w[0], last.theta.b);
            BasinOutcome { kind: classify_endpoint(final_point, cfg), final_point, steps: last.t }
        }
        Err(e) => {
            let steps = match e {
                Error::Divergence { step } => step,
                _ => 0,
            };
            BasinOutcome { kind: OutcomeKind::Unresolved, final_point: (f64::NAN, f64::NAN), steps }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BasinGrid {
    pub config: BasinConfig,
    /// Row-major: `cells[j·nw + i]` for `w_L` index `i` and `b` index `j`.
    pub cells: Vec<BasinOutcome>,
}

impl BasinGrid {
    pub fn cell(&self, i: usize, j: usize) -> &BasinOutcome {
        &self.cells[j * self.config.resolution.0 + i]
    }

    pub fn count(&self, kind: OutcomeKind) -> usize {
        self.cells.iter().filter(|c| c.kind == kind).count()
    }
}

/// Runs [`run_descent`] for every cell center. Cells are evaluated on the
/// current rayon pool; the result does not depend on its size.
pub fn map_basin(cfg: &BasinConfig) -> Result<BasinGrid> {
    cfg.validate()?;
    let (nw, nb) = cfg.resolution;
    let cells = (0..nw * nb)
        .into_par_iter()
        .map(|k| run_descent(cfg.cell_center(k % nw, k / nw), cfg))
        .collect();
    Ok(BasinGrid { config: cfg.clone(), cells })
}

pub fn dead_fraction(grid: &BasinGrid) -> f64 {
    if grid.cells.is_empty() {
        return 0.0;
    }
    grid.count(OutcomeKind::DeadCone) as f64 / grid.cells.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    Csv,
    Pgm,
}

pub const BASIN_HEADER: &str = "w_init,b_init,outcome,steps,w_final,b_final";

/// CSV rows follow cell order; the PGM is a binary (`P5`) 8-bit graymap
/// with the top row at the largest `b`.
pub fn export_basin<W: Write>(grid: &BasinGrid, format: ExportFormat, out: &mut W) -> Result<()> {
    let (nw, nb) = grid.config.resolution;
    match format {
        ExportFormat::Csv => {
            writeln!(out, "{BASIN_HEADER}")?;
            for (k, c) in grid.cells.iter().enumerate() {
                let (w0, b0) = grid.config.cell_center(k % nw, k / nw);
                writeln!(
                    out,
                    "{},{},{},{},{},{}",
                    fmt_f64(w0),
                    fmt_f64(b0),
                    c.kind,
                    c.steps,
                    fmt_f64(c.final_point.0),
                    fmt_f64(c.final_point.1)
                )?;
            }
        }
        ExportFormat::Pgm => {
            write!(out, "P5\n{nw} {nb}\n255\n")?;
            let mut row = vec![0u8; nw];
            for j in (0..nb).rev() {
                for (i, px) in row.iter_mut().enumerate() {
                    *px = grid.cell(i, j).kind.gray_level();
                }
                out.write_all(&row)?;
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BasinRecord {
    pub init: (f64, f64),
    pub outcome: BasinOutcome,
}

/// Parses the CSV written by [`export_basin`].
pub fn read_basin_csv<R: BufRead>(input: R) -> Result<Vec<BasinRecord>> {
    let mut lines = input.lines();
    let header = lines.next().transpose()?;
    if header.as_deref() != Some(BASIN_HEADER) {
        return Err(Error::Parse("missing basin CSV header".into()));
    }
    let num = |s: &str| parse_f64(s).ok_or_else(|| Error::Parse(format!("bad number {s:?}")));
    let mut out = Vec::new();
    for line in lines {
        let line = line?;
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 6 {
            return Err(Error::Parse(format!("expected 6 fields, got {}", f.len())));
        }
        let steps = f[3].parse().map_err(|_| Error::Parse(format!("bad step count {:?}", f[3])))?;
        out.push(BasinRecord {
            init: (num(f[0])?, num(f[1])?),
            outcome: BasinOutcome {
                kind: f[2].parse()?,
                final_point: (num(f[4])?, num(f[5])?),
                steps,
            },
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(gamma: f64, beta: f64) -> BasinConfig {
        BasinConfig::reference(gamma, 0.1, beta).unwrap()
    }

    #[test]
    fn start_at_optimum() {
        let cfg = small(1.0, 0.9);
        let out = run_descent((1.0, 0.0), &cfg);
        assert_eq!((out.kind, out.steps), (OutcomeKind::Optimum, 0));
    }

    #[test]
    fn near_axis_deep_negative_bias_dies() {
        let cfg = small(1.0, 0.0);
        let out = run_descent((1e-3, -1.0), &cfg);
        assert_eq!(out.kind, OutcomeKind::DeadCone);
        assert!(out.steps < 10);
    }

    #[test]
    fn positive_quadrant_reaches_optimum() {
        let cfg = small(1.0, 0.0);
        let out = run_descent((2.0, 1.0), &cfg);
        assert_eq!(out.kind, OutcomeKind::Optimum, "{out:?}");
    }

    #[test]
    fn saddle_and_singular_ray() {
        let cfg = small(0.5, 0.0);
        let out = run_descent((0.0, -0.5), &cfg);
        assert_eq!((out.kind, out.steps), (OutcomeKind::DeadCone, 0));
        // On the ray w_L = 0, b ≥ 0 the nudge keeps descent going.
        let out = run_descent((0.0, 0.5), &cfg);
        assert!(out.steps > 0);
        assert!(out.final_point.0.is_finite() && out.final_point.1.is_finite());
    }

    #[test]
    fn tiny_grid_near_optimum() {
        let mut cfg = small(1.0, 0.5);
        cfg.w_range = (1.0 - 1e-7, 1.0 + 1e-7);
        cfg.b_range = (-1e-7, 1e-7);
        cfg.resolution = (2, 2);
        let grid = map_basin(&cfg).unwrap();
        assert!(grid.cells.iter().all(|c| c.kind == OutcomeKind::Optimum));
        assert_eq!(dead_fraction(&grid), 0.0);
        let mut pgm = Vec::new();
        export_basin(&grid, ExportFormat::Pgm, &mut pgm).unwrap();
        assert_eq!(&pgm[..11], b"P5\n2 2\n255\n");
        assert_eq!(&pgm[11..], &[255u8; 4]);
    }

    #[test]
    fn all_dead_grid() {
        let mut cfg = small(1.0, 0.0);
        cfg.w_range = (-0.1, 0.1);
        cfg.b_range = (-2.0, -1.5);
        cfg.resolution = (3, 2);
        let grid = map_basin(&cfg).unwrap();
        assert_eq!(dead_fraction(&grid), 1.0);
    }

    #[test]
    fn csv_round_trip() {
        let mut cfg = small(0.3, 0.9);
        cfg.resolution = (7, 5);
        let grid = map_basin(&cfg).unwrap();
        let mut buf = Vec::new();
        export_basin(&grid, ExportFormat::Csv, &mut buf).unwrap();
        assert_eq!(buf.iter().filter(|b| **b == b'\n').count(), 7 * 5 + 1);
        let rows = read_basin_csv(&buf[..]).unwrap();
        assert_eq!(rows.len(), grid.cells.len());
        for (k, (r, c)) in rows.iter().zip(&grid.cells).enumerate() {
            assert_eq!(r.outcome, *c);
            assert_eq!(r.init, cfg.cell_center(k % 7, k / 7));
            // Labels are re-derivable from the CSV alone.
            assert_eq!(classify_endpoint(r.outcome.final_point, &cfg), r.outcome.kind);
        }
    }

    #[test]
    fn invalid_config() {
        let mut cfg = small(1.0, 0.0);
        cfg.resolution = (1, 5);
        assert!(map_basin(&cfg).is_err());
        cfg.resolution = (5, 5);
        cfg.w_range = (1.0, -1.0);
        assert!(map_basin(&cfg).is_err());
    }
}
