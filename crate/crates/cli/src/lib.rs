//! Command-line front end for cone-refine: file formats, subcommands and
//! the experiment driver.
//!
//! Exit codes: 0 success or check passed, 1 check failed, 2 usage, parse,
//! validation or numerical error.

pub mod commands;
pub mod files;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use cone_refine::problems::{ProblemKind, SizeProfile};
use cone_refine::refine::RefinementConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Library(#[from] cone_refine::Error),
    #[error("{0}")]
    Csv(#[from] csv::Error),
}

/// Result of a command that ran to completion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Pass,
    Fail,
}

impl Outcome {
    pub fn exit_code(self) -> u8 {
        match self {
            Self::Pass => 0,
            Self::Fail => 1,
        }
    }
}

pub const ERROR_EXIT: u8 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "cone-refine",
    version,
    about = "Refine approximate conic program solutions and certificates"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a random problem and its exact solution or certificate.
    Generate(GenerateArgs),
    /// Evaluate optimality or certificate residuals of a solution.
    Check(CheckArgs),
    /// Add relative Gaussian noise to the embedded point of a solution.
    Perturb(PerturbArgs),
    /// Refine a solution and write the refined point and its recovery.
    Refine(RefineArgs),
    /// Generate, perturb and refine a range of seeds; write a CSV.
    Experiment(ExperimentArgs),
}

/// Refinement parameters shared by `refine` and `experiment`.
#[derive(Debug, Clone, Args)]
pub struct RefineFlags {
    /// LSQR iterations per step.
    #[arg(long, default_value_t = 30)]
    pub lsqr_iters: usize,
    /// Levenberg-Marquardt regularization (LSQR damping is its square root).
    #[arg(long, default_value = "1e-8")]
    pub lambda: f64,
    /// Maximum number of refinement steps.
    #[arg(long, default_value_t = 2)]
    pub refine_iters: usize,
    /// Maximum number of step halvings per line search.
    #[arg(long, default_value_t = 10)]
    pub max_backtracks: usize,
    /// Print per-step progress to stderr.
    #[arg(long)]
    pub verbose: bool,
}

impl Default for RefineFlags {
    fn default() -> Self {
        let c = RefinementConfig::default();
        Self {
            lsqr_iters: c.lsqr_iters,
            lambda: c.lambda,
            refine_iters: c.refine_iters,
            max_backtracks: c.max_backtracks,
            verbose: false,
        }
    }
}

impl RefineFlags {
    pub fn config(&self) -> RefinementConfig {
        RefinementConfig {
            lsqr_iters: self.lsqr_iters,
            lambda: self.lambda,
            max_backtracks: self.max_backtracks,
            refine_iters: self.refine_iters,
            verbose: self.verbose,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct GenerateArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Force the instance kind instead of drawing it.
    #[arg(long)]
    pub kind: Option<ProblemKind>,
    /// Size profile: tiny or paper.
    #[arg(long, default_value = "tiny")]
    pub profile: SizeProfile,
    /// Problem file to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Witness solution file; defaults to the problem path with extension
    /// `.witness.json`.
    #[arg(long)]
    pub witness: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct CheckArgs {
    /// Problem JSON file.
    pub problem: PathBuf,
    /// Solution JSON file: explicit form, embedded point z, or both.
    pub solution: PathBuf,
    /// Pass threshold for every normalized residual.
    #[arg(long, default_value = "1e-8")]
    pub tol: f64,
}

#[derive(Debug, Clone, Args)]
pub struct PerturbArgs {
    /// Problem JSON file.
    pub problem: PathBuf,
    /// Solution JSON file: explicit form, embedded point z, or both.
    pub solution: PathBuf,
    /// Noise relative to the root-mean-square entry of z.
    #[arg(long, default_value = "1e-3")]
    pub noise: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct RefineArgs {
    /// Problem JSON file.
    pub problem: PathBuf,
    /// Solution JSON file: explicit form, embedded point z, or both.
    pub solution: PathBuf,
    #[command(flatten)]
    pub flags: RefineFlags,
    /// Tolerance for certifying the recovered solution or certificate.
    #[arg(long, default_value = "1e-8")]
    pub tol: f64,
    /// Refined solution file (point, recovered form and report).
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct ExperimentArgs {
    /// Number of consecutive seeds.
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
    pub count: u64,
    /// First seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "1e-3")]
    pub noise: f64,
    #[arg(long, default_value = "tiny")]
    pub profile: SizeProfile,
    #[arg(long)]
    pub kind: Option<ProblemKind>,
    #[command(flatten)]
    pub flags: RefineFlags,
    /// CSV output path.
    #[arg(long)]
    pub csv: PathBuf,
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: Cli) -> u8 {
    let result = match cli.command {
        Command::Generate(a) => commands::cmd_generate(&a),
        Command::Check(a) => commands::cmd_check(&a),
        Command::Perturb(a) => commands::cmd_perturb(&a),
        Command::Refine(a) => commands::cmd_refine(&a),
        Command::Experiment(a) => commands::cmd_experiment(&a),
    };
    match result {
        Ok(outcome) => outcome.exit_code(),
        Err(e) => {
            eprintln!("error: {e}");
            ERROR_EXIT
        }
    }
}
