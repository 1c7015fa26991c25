mod args;
mod commands;
mod manifest;

use std::ffi::OsString;
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;

use args::{Cli, Command};
use manifest::RunManifest;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Check(String),
    Divergence(usize),
    Io(String),
    Lib(relulab::Error),
}

impl CliError {
    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Io(format!("{}: {e}", path.display()))
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Check(_) => 1,
            CliError::Usage(_) | CliError::Lib(_) => 2,
            CliError::Divergence(_) => 3,
            CliError::Io(_) => 4,
        }
    }
}

impl From<relulab::Error> for CliError {
    fn from(e: relulab::Error) -> Self {
        match e {
            relulab::Error::Divergence { step } => CliError::Divergence(step),
            relulab::Error::Io(e) => CliError::Io(e.to_string()),
            e => CliError::Lib(e),
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage: {m}"),
            CliError::Check(m) => write!(f, "check failed: {m}"),
            CliError::Divergence(step) => write!(f, "diverged at step {step}"),
            CliError::Io(m) => write!(f, "I/O error: {m}"),
            CliError::Lib(e) => write!(f, "{e}"),
        }
    }
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Eigen(_) => "eigen",
        Command::Simulate(_) => "simulate",
        Command::GradientCheck(_) => "gradient-check",
        Command::Basin(_) => "basin",
        Command::Train(_) => "train",
        Command::Sweep(_) => "sweep",
        Command::Depth(_) => "depth",
        Command::RescaleCheck(_) => "rescale-check",
    }
}

fn dispatch(c: &Command) -> Result<commands::Report, CliError> {
    match c {
        Command::Eigen(a) => commands::eigen(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::GradientCheck(a) => commands::gradient_check_cmd(a),
        Command::Basin(a) => commands::basin_cmd(a),
        Command::Train(a) => commands::train_cmd(a),
        Command::Sweep(a) => commands::sweep_cmd(a),
        Command::Depth(a) => commands::depth_cmd(a),
        Command::RescaleCheck(a) => commands::rescale_cmd(a),
    }
}

fn parse(argv: Vec<OsString>) -> Result<Cli, CliError> {
    Cli::try_parse_from(argv).map_err(|e| {
        use clap::error::ErrorKind;
        if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
            let _ = e.print();
            std::process::exit(0);
        }
        CliError::Usage(e.to_string())
    })
}

/// Arguments worth recording: everything except `--manifest` and thread
/// settings, which do not affect results.
fn recorded_args(argv: &[OsString]) -> Vec<String> {
    let mut out = Vec::new();
    let mut skip = false;
    for a in argv.iter().skip(1) {
        let a = a.to_string_lossy().into_owned();
        if skip {
            skip = false;
            continue;
        }
        if a == "--manifest" || a == "--threads" {
            skip = true;
            continue;
        }
        if a.starts_with("--manifest=") || a.starts_with("--threads=") {
            continue;
        }
        out.push(a);
    }
    out
}

fn run(argv: Vec<OsString>) -> Result<(), CliError> {
    let cli = parse(argv.clone())?;
    let (cli, argv) = match &cli.manifest {
        Some(_) if cli.command.is_some() => {
            return Err(CliError::Usage("--manifest replays a recorded command; do not pass another".into()));
        }
        Some(path) => {
            let m = RunManifest::read(path)?;
            let mut replay = m.argv();
            replay.push("--threads".into());
            replay.push(cli.threads.to_string().into());
            (parse(replay.clone())?, replay)
        }
        None => (cli, argv),
    };
    let command = cli.command.as_ref().ok_or_else(|| CliError::Usage("no command given; see --help".into()))?;
    if cli.threads == 0 {
        return Err(CliError::Usage("--threads must be ≥ 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build()
        .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
    let start = Instant::now();
    let report = pool.install(|| dispatch(command))?;
    let elapsed = start.elapsed().as_secs_f64();
    if let Some(path) = manifest::manifest_path(&report) {
        let m = RunManifest::new(command_name(command), recorded_args(&argv), &report, elapsed);
        std::fs::write(&path, m.render()).map_err(|e| CliError::io(&path, e))?;
    }
    match report.check_failure {
        Some(msg) => Err(CliError::Check(msg)),
        None => Ok(()),
    }
}

fn main() -> ExitCode {
    match run(std::env::args_os().collect()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("relulab: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
