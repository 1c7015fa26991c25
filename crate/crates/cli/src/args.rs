use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "relulab", version, about = "Dying-ReLU dynamics experiments")]
pub struct Cli {
    /// Worker threads for grid sweeps and training sweeps.
    #[arg(long, global = true, env = "RELULAB_THREADS", default_value_t = 1)]
    pub threads: usize,

    /// Replay the command recorded in a manifest file.
    #[arg(long)]
    pub manifest: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Root locus of the momentum companion matrix over β ∈ [0, 1).
    Eigen(EigenArgs),
    /// Momentum trajectory on the affine model or the 2-D ReLU field.
    Simulate(SimulateArgs),
    /// Analytic ReLU gradients against Monte-Carlo estimates.
    GradientCheck(GradientCheckArgs),
    /// Basin-of-attraction map over (w_L, b) initializations.
    Basin(BasinArgs),
    /// Train one MLP and record the dead-unit census.
    Train(TrainArgs),
    /// Sweep target scale γ, shift δ and optimizer.
    Sweep(SweepArgs),
    /// Sweep hidden depth at fixed γ.
    Depth(DepthArgs),
    /// Compare γ·ŷ(θ) against ŷ(νθ) over a ν grid.
    RescaleCheck(RescaleArgs),
}

#[derive(Debug, Args)]
pub struct EigenArgs {
    #[arg(long, default_value_t = 0.1)]
    pub eta: f64,
    #[arg(long, default_value_t = 1000)]
    pub beta_steps: usize,
    #[arg(long, default_value = "root_locus.csv")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    Affine,
    Relu,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, value_enum, default_value_t = ModelArg::Relu)]
    pub model: ModelArg,
    #[arg(long, default_value_t = 0.1)]
    pub eta: f64,
    #[arg(long, default_value_t = 0.9)]
    pub beta: f64,
    #[arg(long, default_value_t = 1.0)]
    pub gamma: f64,
    #[arg(long, default_value_t = 0.0)]
    pub delta: f64,
    #[arg(long, allow_negative_numbers = true)]
    pub w0: f64,
    #[arg(long, allow_negative_numbers = true)]
    pub b0: f64,
    /// Maximum number of updates.
    #[arg(long, default_value_t = 10_000)]
    pub steps: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub stop_norm: f64,
    /// Record every n-th state (the last state is always recorded).
    #[arg(long, default_value_t = 1)]
    pub stride: usize,
    #[arg(long, default_value = "trajectory.csv")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct GradientCheckArgs {
    #[arg(long, default_value_t = 1_000_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 50)]
    pub trials: usize,
    #[arg(long, default_value_t = 3)]
    pub dim: usize,
    #[arg(long, default_value = "gradient_check.csv")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BasinArgs {
    #[arg(long)]
    pub gamma: f64,
    #[arg(long)]
    pub beta: f64,
    #[arg(long, default_value_t = 0.1)]
    pub eta: f64,
    /// Cells per axis.
    #[arg(long, default_value_t = 101)]
    pub grid: usize,
    #[arg(long, default_value_t = 1_000_000)]
    pub max_iter: usize,
    #[arg(long, default_value = "basin")]
    pub out_prefix: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OptimizerArg {
    Adam,
    Sgd,
}

#[derive(Debug, Args)]
pub struct TrainingArgs {
    #[arg(long, default_value_t = 50_000)]
    pub steps: usize,
    #[arg(long, default_value_t = 64)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 1000)]
    pub checkpoint_every: usize,
    /// First seed; further seeds count up from it.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Adam learning rate.
    #[arg(long, default_value_t = 1e-3)]
    pub adam_lr: f64,
    /// SGD learning rate.
    #[arg(long, default_value_t = 1e-2)]
    pub sgd_lr: f64,
    /// Dataset CSV (header x1,…,xL,y); the built-in mixture task if absent.
    #[arg(long)]
    pub data: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long, default_value_t = 1.0)]
    pub gamma: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub delta: f64,
    #[arg(long, value_enum, default_value_t = OptimizerArg::Adam)]
    pub optimizer: OptimizerArg,
    /// Hidden layer widths.
    #[arg(long, value_delimiter = ',', default_value = "200")]
    pub hidden: Vec<usize>,
    #[command(flatten)]
    pub training: TrainingArgs,
    /// Also write the training dataset to this file.
    #[arg(long)]
    pub export_data: Option<PathBuf>,
    #[arg(long, default_value = "train.csv")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long, value_delimiter = ',', default_value = "0.0001,0.001,0.01,0.1,1")]
    pub gammas: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "0", allow_negative_numbers = true)]
    pub deltas: Vec<f64>,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "adam,sgd")]
    pub optimizers: Vec<OptimizerArg>,
    #[arg(long, default_value_t = 4)]
    pub seeds: usize,
    #[arg(long, value_delimiter = ',', default_value = "200")]
    pub hidden: Vec<usize>,
    #[command(flatten)]
    pub training: TrainingArgs,
    #[arg(long, default_value = "sweep.csv")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DepthArgs {
    #[arg(long, value_delimiter = ',', default_value = "1,2,4")]
    pub depths: Vec<usize>,
    #[arg(long, default_value_t = 64)]
    pub width: usize,
    #[arg(long, default_value_t = 1e-4)]
    pub gamma: f64,
    #[arg(long, value_enum, default_value_t = OptimizerArg::Adam)]
    pub optimizer: OptimizerArg,
    #[arg(long, default_value_t = 4)]
    pub seeds: usize,
    #[command(flatten)]
    pub training: TrainingArgs,
    #[arg(long, default_value = "depth.csv")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RescaleArgs {
    #[arg(long, default_value_t = 1)]
    pub hidden_layers: usize,
    #[arg(long, default_value_t = 0.5)]
    pub gamma: f64,
    #[arg(long, default_value_t = 8)]
    pub width: usize,
    #[arg(long, default_value_t = 4)]
    pub input_dim: usize,
    #[arg(long, default_value_t = 200)]
    pub nu_points: usize,
    /// ν grid is (0, nu_max] in equal steps.
    #[arg(long, default_value_t = 2.0)]
    pub nu_max: f64,
    #[arg(long, default_value_t = 200)]
    pub probes: usize,
    #[arg(long, default_value_t = 21)]
    pub seed: u64,
    #[arg(long, default_value = "rescale.csv")]
    pub out: PathBuf,
}
