//! `reallocate` command line: per-group effect estimation, cross-group MSM
//! projection, and the Monte Carlo simulation harness.
//!
//! Exit codes: 0 success, 1 estimation failure, 2 configuration or parse
//! error.

mod config;
mod estimate;
mod msm_cmd;
mod simulate;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "reallocate", version, about = "Causal effect estimation when outcomes depend on the proportion exposed", disable_help_subcommand = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Estimate per-group direct effects and intervention contrasts from a CSV.
    Estimate(EstimateArgs),
    /// Run simulation cells and emit one CSV row per cell.
    Simulate(SimulateArgs),
    /// Project per-group effect estimates onto a working MSM.
    Msm(MsmArgs),
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    /// Input CSV of observed data.
    #[arg(long)]
    data: PathBuf,
    /// Config file with an `[estimate]` section.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output path for the JSON report (default: stdout).
    #[arg(long)]
    output: Option<PathBuf>,
    /// Comma-separated covariate column names.
    #[arg(long)]
    covariates: Option<String>,
    /// Exposure column name.
    #[arg(long)]
    exposure: Option<String>,
    /// Outcome column name.
    #[arg(long)]
    outcome: Option<String>,
    /// Group column name (one analysis per distinct value).
    #[arg(long)]
    group: Option<String>,
    /// Outcome-regression formula, e.g. "y ~ 1 + w1 + a + w1:a".
    #[arg(long)]
    q_formula: Option<String>,
    /// Propensity formula, e.g. `"a ~ 1 + w1 [probit]`".
    #[arg(long)]
    g_formula: Option<String>,
    /// Summary function of the proportion exposed:
    /// identity | count | `affine:slope=<s>,intercept=<i>`.
    #[arg(long)]
    kn: Option<String>,
    /// Propensity truncation bounds "lo,hi".
    #[arg(long)]
    truncation: Option<String>,
    /// Confidence level for Wald intervals.
    #[arg(long)]
    ci_level: Option<f64>,
    /// Outcome bounds "lo,hi", or "auto".
    #[arg(long)]
    scale: Option<String>,
    /// Intervention contrast "SPEC vs SPEC" (repeatable). SPEC is an
    /// intervention string or "observed" for the fitted assignment.
    #[arg(long = "contrast")]
    contrasts: Vec<String>,
    /// Single intervention to estimate (repeatable).
    #[arg(long = "intervention")]
    interventions: Vec<String>,
    /// Estimator for single interventions: tmle | aipw.
    #[arg(long)]
    estimator: Option<String>,
    /// Also write a per-group effects CSV (group_id, psi_hat, variance, k)
    /// of the direct effects, ready for the `msm` subcommand.
    #[arg(long)]
    effects_output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Config file with a `[simulate]` section.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output path for the cell CSV (default: stdout).
    #[arg(long)]
    output: Option<PathBuf>,
    /// Run the full published-table grid (3 regimes x 3 n x 3 beta,
    /// direct-effect and rank-based overall-effect estimands).
    #[arg(long)]
    table1: bool,
    /// Comma-separated sample sizes.
    #[arg(long)]
    ns: Option<String>,
    /// Comma-separated interference strengths.
    #[arg(long)]
    betas: Option<String>,
    /// Comma-separated regimes: correct_both, mis_q, mis_g.
    #[arg(long)]
    regimes: Option<String>,
    /// Comma-separated estimands: direct, oers, complete_rand.
    #[arg(long)]
    estimands: Option<String>,
    /// Monte Carlo replicates per cell.
    #[arg(long)]
    replicates: Option<usize>,
    /// Base seed; per-cell streams derive from it.
    #[arg(long)]
    seed: Option<u64>,
    /// Confidence level for coverage.
    #[arg(long)]
    ci_level: Option<f64>,
    /// Worker threads (0 = all cores). Falls back to the
    /// REALLOCATE_PARALLELISM environment variable.
    #[arg(long)]
    parallelism: Option<usize>,
}

#[derive(Debug, Args)]
pub struct MsmArgs {
    /// CSV of group effects: group_id, psi_hat, variance, modifier columns.
    #[arg(long)]
    effects: PathBuf,
    /// Config file with an `[msm]` section.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output path for the JSON report (default: stdout).
    #[arg(long)]
    output: Option<PathBuf>,
    /// MSM formula over modifier columns, e.g. "1 + G + k + G:k".
    #[arg(long)]
    formula: Option<String>,
    /// Weighting: invvar | uniform.
    #[arg(long)]
    weights: Option<String>,
    /// Confidence level for Wald intervals.
    #[arg(long)]
    ci_level: Option<f64>,
}

/// Failure modes mapped to exit codes.
pub enum CliError {
    /// Bad configuration, formula, or input parse: exit 2.
    Config(String),
    /// Estimation failed: exit 1.
    Estimation(String),
}

impl CliError {
    fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Config(_) => ExitCode::from(2),
            CliError::Estimation(_) => ExitCode::from(1),
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Config(m) => m,
            CliError::Estimation(m) => m,
        }
    }
}

pub fn write_output(path: Option<&PathBuf>, contents: &str) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, contents)
            .map_err(|e| CliError::Estimation(format!("cannot write '{}': {e}", p.display()))),
        None => {
            print!("{contents}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Estimate(args) => estimate::run(args),
        Command::Simulate(args) => simulate::run(args),
        Command::Msm(args) => msm_cmd::run(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {}", err.message());
            err.exit_code()
        }
    }
}
