//! Command-line front end: experiment configs, verification suites and the
//! six subcommands, all writing CSV reports.

mod commands;
mod config;
pub mod suites;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

pub use commands::{
    cmd_blocks_check, cmd_convergence, cmd_freeze, cmd_hamiltonian_check, cmd_scaling, cmd_solve, convergence_study,
    l2_summary, log_log_slope, network_model, oracle_values, scaling_point, CommandReport, ConvergenceLevel, L2Summary,
    RunOptions, ScalingPoint,
};
pub use config::{
    BlocksCheckSection, ConvergenceSection, ExperimentConfig, HamiltonianCheckSection, HamnetSection, MlpSection,
    OracleKind, OracleSection, SamplingBox, ScalingSection,
};

use crate::error::Result;

#[derive(Debug, Parser)]
#[command(name = "hjb", version, about = "HJB solver and verification toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Experiment config (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Override the config seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory for reports.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "HJB_THREADS")]
    pub threads: Option<usize>,
    /// Record wall-clock times in run CSVs (makes them non-reproducible).
    #[arg(long, global = true)]
    pub timing: bool,
}

#[derive(Clone, Copy, Debug, Subcommand)]
pub enum Command {
    /// Closed-form Hamiltonian against the grid-search oracle.
    HamiltonianCheck,
    /// Building-block network error and Lipschitz suites.
    BlocksCheck,
    /// MLP estimates at configured points, with optional oracle comparison.
    Solve,
    /// Freeze one MLP realization into a network and check equivalence.
    Freeze,
    /// Frozen-network size across dimensions with a log-log slope fit.
    Scaling,
    /// Error against an oracle as the level N grows, over many seeds.
    Convergence,
}

pub fn run(cli: &Cli) -> Result<CommandReport> {
    let cfg = match &cli.config {
        Some(p) => ExperimentConfig::from_file(p)?,
        None => ExperimentConfig::from_toml_str("", std::path::Path::new("."))?,
    };
    let opts = RunOptions { out: cli.out.clone(), seed: cli.seed, timing: cli.timing };
    let exec = || match cli.command {
        Command::HamiltonianCheck => cmd_hamiltonian_check(&cfg, &opts),
        Command::BlocksCheck => cmd_blocks_check(&cfg, &opts),
        Command::Solve => cmd_solve(&cfg, &opts),
        Command::Freeze => cmd_freeze(&cfg, &opts),
        Command::Scaling => cmd_scaling(&cfg, &opts),
        Command::Convergence => cmd_convergence(&cfg, &opts),
    };
    match cli.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| crate::Error::InvalidParameter(e.to_string()))?
            .install(exec),
        None => exec(),
    }
}

/// Entry point of the `hjb` binary: exit code 1 if any report row failed,
/// 2 on errors.
pub fn main_entry() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(report) => {
            for f in &report.files {
                println!("wrote {}", f.display());
            }
            if report.failures > 0 {
                eprintln!("{} check(s) failed", report.failures);
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
