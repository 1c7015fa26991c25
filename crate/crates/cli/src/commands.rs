use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use relulab::affine::{self, OptimConfig, Trajectory};
use relulab::basin::{self, BasinConfig, ExportFormat, OutcomeKind};
use relulab::mc::{gradient_check, GradientCheckConfig};
use relulab::nn::{self, ExperimentSetup, Optimizer, TrainConfig};
use relulab::output::fmt_f64;
use relulab::relu_field::W_FLOOR;
use relulab::{ParamPoint, TargetSpec, Vector};

use crate::args::*;
use crate::CliError;

/// What a finished command produced.
#[derive(Debug, Default)]
pub struct Report {
    pub outputs: Vec<PathBuf>,
    pub seeds: Vec<u64>,
    /// Set when a check ran and failed.
    pub check_failure: Option<String>,
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| CliError::io(path, e))
}

fn finish(mut w: BufWriter<File>, path: &Path) -> Result<(), CliError> {
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn eigen(a: &EigenArgs) -> Result<Report, CliError> {
    let locus = affine::root_locus(a.eta, a.beta_steps)?;
    let mut w = create(&a.out)?;
    affine::write_root_locus_csv(&mut w, &locus)?;
    finish(w, &a.out)?;
    match affine::complex_onset_beta(a.eta) {
        Ok(beta) => println!("complex_onset_beta = {}", fmt_f64(beta)),
        Err(relulab::Error::NotFound(msg)) => println!("complex_onset_beta = none ({msg})"),
        Err(e) => return Err(e.into()),
    }
    Ok(Report { outputs: vec![a.out.clone()], ..Default::default() })
}

pub const TRAJECTORY_HEADER: &str = "t,w_L,b,m_w,m_b,ratio";

fn write_trajectory(path: &Path, traj: &Trajectory) -> Result<(), CliError> {
    let mut w = create(path)?;
    let line = |w: &mut BufWriter<File>, s: String| writeln!(w, "{s}").map_err(|e| CliError::io(path, e));
    line(&mut w, TRAJECTORY_HEADER.to_string())?;
    for p in traj.points() {
        let l = p.theta.dim();
        line(
            &mut w,
            format!(
                "{},{},{},{},{},{}",
                p.t,
                fmt_f64(p.theta.w[l - 1]),
                fmt_f64(p.theta.b),
                fmt_f64(p.m[l - 1]),
                fmt_f64(p.m[l]),
                fmt_f64(p.theta.ratio(W_FLOOR))
            ),
        )?;
    }
    finish(w, path)
}

pub fn simulate(a: &SimulateArgs) -> Result<Report, CliError> {
    let cfg = OptimConfig::new(a.eta, a.beta, a.stop_norm, a.steps)?;
    let target = TargetSpec::new(a.gamma, a.delta, 1)?;
    let traj = match a.model {
        ModelArg::Affine => {
            let theta0 = ParamPoint::new(Vector::new(vec![a.w0])?, a.b0)?;
            affine::simulate_affine(&theta0, None, &target, &cfg, a.stride)?
        }
        ModelArg::Relu => basin::simulate_relu_2d((a.w0, a.b0), None, &target, &cfg, a.stride)?,
    };
    write_trajectory(&a.out, &traj)?;
    let last = traj.last();
    println!(
        "steps = {}, converged = {}, final = ({}, {})",
        last.t,
        traj.converged(),
        fmt_f64(last.theta.w[0]),
        fmt_f64(last.theta.b)
    );
    Ok(Report { outputs: vec![a.out.clone()], ..Default::default() })
}

/// Below this batch size standard errors are too wide for the check to
/// say much.
const MEANINGFUL_SAMPLES: usize = 10_000;

pub fn gradient_check_cmd(a: &GradientCheckArgs) -> Result<Report, CliError> {
    let cfg = GradientCheckConfig { dim: a.dim, trials: a.trials, samples: a.samples, seed: a.seed, ..Default::default() };
    let report = gradient_check(&cfg)?;
    let mut w = create(&a.out)?;
    let io = |e| CliError::io(&a.out, e);
    writeln!(w, "trial,component,analytic,estimate,std_error,z").map_err(io)?;
    for (i, t) in report.trials.iter().enumerate() {
        for j in 0..t.z.len() {
            writeln!(
                w,
                "{i},{j},{},{},{},{}",
                fmt_f64(t.analytic[j]),
                fmt_f64(t.estimate.value[j]),
                fmt_f64(t.estimate.std_error[j]),
                fmt_f64(t.z[j])
            )
            .map_err(io)?;
        }
    }
    finish(w, &a.out)?;
    println!("trials = {}, samples = {}, seed = {}", a.trials, a.samples, a.seed);
    println!("max_abs_z = {}", fmt_f64(report.max_abs_z()));
    println!("within_2se = {}", fmt_f64(report.fraction_within(2.0)));
    if a.samples < MEANINGFUL_SAMPLES {
        println!("note: {} samples give wide standard errors; z-scores are weak evidence", a.samples);
    }
    let failures = report.failures();
    for (i, j, z) in &failures {
        println!("FAIL trial {i} component {j}: z = {}", fmt_f64(*z));
    }
    let check_failure = (!failures.is_empty())
        .then(|| format!("{} components outside {} standard errors", failures.len(), report.margin));
    Ok(Report { outputs: vec![a.out.clone()], seeds: vec![a.seed], check_failure })
}

pub fn basin_cmd(a: &BasinArgs) -> Result<Report, CliError> {
    let mut cfg = BasinConfig::reference(a.gamma, a.eta, a.beta)?;
    cfg.resolution = (a.grid, a.grid);
    cfg.optim.max_iter = a.max_iter;
    let grid = basin::map_basin(&cfg)?;
    let stem = format!("{}_gamma{}_beta{}", a.out_prefix, a.gamma, a.beta);
    let mut outputs = Vec::new();
    for (ext, fmt) in [("csv", ExportFormat::Csv), ("pgm", ExportFormat::Pgm)] {
        let path = PathBuf::from(format!("{stem}.{ext}"));
        let mut w = create(&path)?;
        basin::export_basin(&grid, fmt, &mut w).map_err(|e| match e {
            relulab::Error::Io(e) => CliError::io(&path, e),
            e => e.into(),
        })?;
        finish(w, &path)?;
        outputs.push(path);
    }
    println!("dead_fraction = {}", fmt_f64(basin::dead_fraction(&grid)));
    println!(
        "optimum = {}, dead = {}, unresolved = {}",
        grid.count(OutcomeKind::Optimum),
        grid.count(OutcomeKind::DeadCone),
        grid.count(OutcomeKind::Unresolved)
    );
    Ok(Report { outputs, ..Default::default() })
}

fn optimizer(o: OptimizerArg, t: &TrainingArgs) -> Optimizer {
    match o {
        OptimizerArg::Adam => Optimizer::adam(t.adam_lr),
        OptimizerArg::Sgd => Optimizer::Sgd { lr: t.sgd_lr },
    }
}

fn base_config(o: Optimizer, t: &TrainingArgs) -> TrainConfig {
    TrainConfig {
        optimizer: o,
        batch_size: t.batch_size,
        steps: t.steps,
        seed: t.seed,
        checkpoint_every: t.checkpoint_every,
    }
}

fn setup(t: &TrainingArgs) -> Result<ExperimentSetup, CliError> {
    match &t.data {
        None => Ok(ExperimentSetup::reference()?),
        Some(path) => {
            let f = File::open(path).map_err(|e| CliError::io(path, e))?;
            let data = nn::read_dataset_csv(BufReader::new(f))?;
            Ok(ExperimentSetup::new(
                data,
                nn::DEFAULT_PROBE_SIZE,
                ExperimentSetup::REFERENCE_PROBE_SEED,
                nn::DEFAULT_CENSUS_EPSILON,
            ))
        }
    }
}

fn seeds(base: u64, n: usize) -> Vec<u64> {
    (0..n as u64).map(|i| base + i).collect()
}

fn last_max_dead(rows: &[nn::SweepRow]) -> f64 {
    rows.last().map_or(f64::NAN, |r| r.max_dead_fraction)
}

pub fn train_cmd(a: &TrainArgs) -> Result<Report, CliError> {
    let setup = setup(&a.training)?;
    let mut outputs = Vec::new();
    if let Some(path) = &a.export_data {
        let mut w = create(path)?;
        nn::write_dataset_csv(&setup.data, &mut w)?;
        finish(w, path)?;
        outputs.push(path.clone());
    }
    let opt = optimizer(a.optimizer, &a.training);
    let base = base_config(opt, &a.training);
    let rows = nn::gamma_sweep_experiment(&[a.gamma], &[a.delta], &[opt], &base, &a.hidden, &setup, 1)?;
    let mut w = create(&a.out)?;
    nn::write_sweep_csv(&rows, &mut w)?;
    finish(w, &a.out)?;
    outputs.push(a.out.clone());
    let last = rows.last().expect("at least one checkpoint");
    println!("final mse = {}, max_dead_fraction = {}", fmt_f64(last.mse), fmt_f64(last_max_dead(&rows)));
    Ok(Report { outputs, seeds: vec![a.training.seed], check_failure: None })
}

pub fn sweep_cmd(a: &SweepArgs) -> Result<Report, CliError> {
    let setup = setup(&a.training)?;
    let opts: Vec<Optimizer> = a.optimizers.iter().map(|&o| optimizer(o, &a.training)).collect();
    let base = base_config(opts[0], &a.training);
    let rows = nn::gamma_sweep_experiment(&a.gammas, &a.deltas, &opts, &base, &a.hidden, &setup, a.seeds)?;
    let mut w = create(&a.out)?;
    nn::write_sweep_csv(&rows, &mut w)?;
    finish(w, &a.out)?;
    println!("rows = {}", rows.len());
    Ok(Report { outputs: vec![a.out.clone()], seeds: seeds(a.training.seed, a.seeds), check_failure: None })
}

pub fn depth_cmd(a: &DepthArgs) -> Result<Report, CliError> {
    let setup = setup(&a.training)?;
    let base = base_config(optimizer(a.optimizer, &a.training), &a.training);
    let rows = nn::depth_sweep_experiment(&a.depths, a.width, &base, a.gamma, &setup, a.seeds)?;
    let mut w = create(&a.out)?;
    nn::write_depth_csv(&rows, &mut w)?;
    finish(w, &a.out)?;
    for &d in &a.depths {
        let finals: Vec<f64> = rows
            .iter()
            .filter(|r| r.depth == d && r.step == a.training.steps)
            .map(|r| r.max_dead_fraction)
            .collect();
        let mean = finals.iter().sum::<f64>() / finals.len() as f64;
        println!("depth {d}: mean final max_dead_fraction = {}", fmt_f64(mean));
    }
    Ok(Report { outputs: vec![a.out.clone()], seeds: seeds(a.training.seed, a.seeds), check_failure: None })
}

/// Gap treated as zero for the homogeneous (no hidden layer) case.
const ROUNDING_GAP: f64 = 1e-12;

pub fn rescale_cmd(a: &RescaleArgs) -> Result<Report, CliError> {
    if a.nu_points == 0 || !(a.nu_max > 0.0) {
        return Err(CliError::Usage("need --nu-points ≥ 1 and --nu-max > 0".into()));
    }
    let mut dims = vec![a.input_dim];
    dims.extend(std::iter::repeat_n(a.width, a.hidden_layers));
    dims.push(1);
    let mlp = nn::init_mlp(&dims, a.seed)?;
    let probes = nn::gaussian_probes(a.probes, a.input_dim, 2.0, a.seed.wrapping_add(1));
    let nus: Vec<f64> = (1..=a.nu_points).map(|k| a.nu_max * k as f64 / a.nu_points as f64).collect();

    let mut w = create(&a.out)?;
    let io = |e| CliError::io(&a.out, e);
    writeln!(w, "nu,max_abs_gap").map_err(io)?;
    for &nu in &nus {
        let gap = nn::rescaling_check(&mlp, a.gamma, nu, probes.view())?;
        writeln!(w, "{},{}", fmt_f64(nu), fmt_f64(gap)).map_err(io)?;
    }
    finish(w, &a.out)?;

    let check_failure = if a.hidden_layers == 0 {
        let gap_net = nn::rescaling_check(&mlp, a.gamma, a.gamma, probes.view())?;
        let l = &mlp.layers()[0];
        let unit = ParamPoint::new(Vector::new(l.weight.row(0).to_vec())?, l.bias[0])?;
        let gap_unit = nn::single_unit_rescaling_gap(&unit, a.gamma, probes.view())?;
        println!("gap at nu = gamma: affine = {}, relu unit = {}", fmt_f64(gap_net), fmt_f64(gap_unit));
        (gap_net.max(gap_unit) > ROUNDING_GAP).then(|| "homogeneity gap above rounding".to_string())
    } else {
        let (nu, gap) = nn::min_rescaling_gap(&mlp, a.gamma, &nus, probes.view())?;
        println!("min gap = {} at nu = {}", fmt_f64(gap), fmt_f64(nu));
        (a.gamma != 1.0 && !(gap > ROUNDING_GAP)).then(|| "a single ν reproduced γ·ŷ".to_string())
    };
    Ok(Report { outputs: vec![a.out.clone()], seeds: vec![a.seed], check_failure })
}
