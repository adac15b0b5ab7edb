//! Command-line front end.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::{ConfigError, ScenarioConfig, ScenarioKind};
use crate::scenarios::{self, ScenarioError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_CHECK_FAILED: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "lowrank", version, about = "Low-rank recovery experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Exact line search on a 2-D quadratic over starting angles.
    Quadratic(CommonArgs),
    /// All methods on matched instances, fitted against predicted rates.
    Compare(CommonArgs),
    /// Constant and lazy momentum sweeps.
    Oscillation(CommonArgs),
    /// Closed-form spectral radii against eigensolves.
    Radius(CommonArgs),
    /// Closed-form momentum rate over a stepsize-momentum grid.
    Landscape(CommonArgs),
    /// Spectral against noisy initialization.
    #[command(name = "init-study")]
    InitStudy(CommonArgs),
    /// Iteration counts, wall time and per-step cost growth.
    Runtime(CommonArgs),
    /// Recovery success over a rank-by-sampling grid.
    Phase(CommonArgs),
    /// Spectral report of an instance.
    Analyze(CommonArgs),
    /// One solver run.
    Solve(CommonArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// JSON configuration; every field is optional.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory; defaults to the config's `output_dir`, then
    /// `out/<scenario>`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Comma-separated seeds, overriding the config.
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    /// Worker threads; defaults to the number of cores.
    #[arg(long)]
    pub threads: Option<usize>,
}

impl Command {
    pub fn split(&self) -> (ScenarioKind, &CommonArgs) {
        match self {
            Command::Quadratic(a) => (ScenarioKind::Quadratic, a),
            Command::Compare(a) => (ScenarioKind::Compare, a),
            Command::Oscillation(a) => (ScenarioKind::Oscillation, a),
            Command::Radius(a) => (ScenarioKind::Radius, a),
            Command::Landscape(a) => (ScenarioKind::Landscape, a),
            Command::InitStudy(a) => (ScenarioKind::InitStudy, a),
            Command::Runtime(a) => (ScenarioKind::Runtime, a),
            Command::Phase(a) => (ScenarioKind::Phase, a),
            Command::Analyze(a) => (ScenarioKind::Analyze, a),
            Command::Solve(a) => (ScenarioKind::Solve, a),
        }
    }
}

/// Parses arguments, runs the scenario, writes its outputs and returns the
/// process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let (kind, args) = cli.command.split();
    match execute(kind, args) {
        Ok(passed) => {
            if passed {
                EXIT_OK
            } else {
                EXIT_CHECK_FAILED
            }
        }
        Err(e) => {
            match &e {
                ScenarioError::Config(c) => eprintln!("config error in {}: {}", c.field, c.message),
                other => eprintln!("error: {other}"),
            }
            EXIT_CONFIG
        }
    }
}

fn execute(kind: ScenarioKind, args: &CommonArgs) -> Result<bool, ScenarioError> {
    let mut cfg = match &args.config {
        Some(path) => ScenarioConfig::load(path)?,
        None => ScenarioConfig::default(),
    };
    if let Some(seeds) = &args.seeds {
        cfg.seeds = Some(seeds.clone());
    }
    cfg.validate_for(kind)?;
    let out = args
        .out
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out").join(kind.name()));
    std::fs::create_dir_all(&out)
        .map_err(|e| ConfigError::new("output_dir", format!("cannot create {}: {e}", out.display())))?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.threads.unwrap_or(0))
        .build()
        .map_err(|e| ConfigError::new("--threads", e.to_string()))?;
    let result = pool.install(|| scenarios::run(kind, &cfg))?;
    result.write(&out)?;

    for c in &result.checks {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    println!("wrote {}", out.display());
    Ok(result.passed())
}
