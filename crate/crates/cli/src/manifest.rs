//! Flat `key = value` run manifests. Repeated `arg` keys hold the command
//! line in order; replaying a manifest re-parses exactly those arguments.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::commands::Report;
use crate::CliError;

#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub command: String,
    pub args: Vec<String>,
    pub seeds: Vec<u64>,
    pub version: String,
    pub outputs: Vec<PathBuf>,
    pub wall_time_s: f64,
}

impl RunManifest {
    pub fn new(command: &str, args: Vec<String>, report: &Report, wall_time_s: f64) -> Self {
        Self {
            command: command.to_string(),
            args,
            seeds: report.seeds.clone(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            outputs: report.outputs.clone(),
            wall_time_s,
        }
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "command = {}", self.command);
        let _ = writeln!(s, "version = {}", self.version);
        for a in &self.args {
            let _ = writeln!(s, "arg = {a}");
        }
        for seed in &self.seeds {
            let _ = writeln!(s, "seed = {seed}");
        }
        for o in &self.outputs {
            let _ = writeln!(s, "output = {}", o.display());
        }
        let _ = writeln!(s, "wall_time_s = {:.3}", self.wall_time_s);
        s
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut m = RunManifest {
            command: String::new(),
            args: Vec::new(),
            seeds: Vec::new(),
            version: String::new(),
            outputs: Vec::new(),
            wall_time_s: 0.0,
        };
        for (n, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once(" = ")
                .ok_or_else(|| CliError::Usage(format!("manifest line {}: expected `key = value`", n + 1)))?;
            let bad = |what: &str| CliError::Usage(format!("manifest line {}: bad {what}", n + 1));
            match key {
                "command" => m.command = value.to_string(),
                "version" => m.version = value.to_string(),
                "arg" => m.args.push(value.to_string()),
                "seed" => m.seeds.push(value.parse().map_err(|_| bad("seed"))?),
                "output" => m.outputs.push(PathBuf::from(value)),
                "wall_time_s" => m.wall_time_s = value.parse().map_err(|_| bad("wall time"))?,
                other => return Err(CliError::Usage(format!("manifest line {}: unknown key {other:?}", n + 1))),
            }
        }
        if m.args.is_empty() {
            return Err(CliError::Usage("manifest records no arguments".into()));
        }
        Ok(m)
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text)
    }

    /// Argument vector for re-parsing, program name first.
    pub fn argv(&self) -> Vec<OsString> {
        std::iter::once(OsString::from("relulab")).chain(self.args.iter().map(OsString::from)).collect()
    }
}

/// `<first output>.manifest`.
pub fn manifest_path(report: &Report) -> Option<PathBuf> {
    report.outputs.first().map(|p| {
        let mut s = p.clone().into_os_string();
        s.push(".manifest");
        PathBuf::from(s)
    })
}
