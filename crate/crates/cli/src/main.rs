//! `stein-index` command-line front end.
//!
//! Exit status: 0 on success, 1 on input or usage errors, 2 when the solver
//! stopped before converging (the estimate is still written).

mod fit;
mod plot;
mod stein;
mod sweep;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use stein_index::robusttrunc::ParamSetting;
use stein_index::simlab::LinkFunction;
use stein_index::ScoreModel;

#[derive(Parser, Debug)]
#[command(name = "stein-index", version, about = "Truncated Stein-moment estimators for high-dimensional index models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// First-order SIM fit. Vector covariates give a sparse estimate, matrix
    /// covariates a low-rank one, fourth-order tensors a low-rank unfolding.
    FitSim1(FitArgs),
    /// Sparse SIM fit from the second-order Stein moment (Fantope ADMM).
    FitSim2(FitArgs),
    /// Multiple index model: rank-k subspace from the second-order moment.
    FitMim(FitArgs),
    /// Sparse PCA on the truncated covariance of a response-free dataset.
    FitSpca(FitArgs),
    /// Runs a simulation sweep described by a TOML config and writes a CSV.
    Sweep(SweepArgs),
    /// Renders a sweep CSV as an SVG: median line and IQR band per series.
    Plot(PlotArgs),
    /// Monte Carlo check of the first- or second-order Stein identity.
    SteinCheck(SteinArgs),
}

/// Flags shared by every subcommand.
#[derive(Args, Debug, Clone)]
struct Common {
    /// Covariate entry distribution, e.g. `gaussian:0,1`, `gamma:5,1`, `t:5`, `rayleigh:2`.
    #[arg(long)]
    dist: Option<ScoreModel>,
    /// Link function: f1..f5, identity or sum-squares.
    #[arg(long)]
    link: Option<LinkFunction>,
    /// Penalty: `auto` (theorem schedule), `paper-default` (simulation value) or a number.
    #[arg(long)]
    lambda: Option<ParamSetting>,
    /// Truncation level for responses and scores: `auto`, `paper-default`, a number or `inf`.
    #[arg(long)]
    tau: Option<ParamSetting>,
    /// Influence scale for the low-rank mean: `auto`, `paper-default` or a positive number (small values truncate less).
    #[arg(long)]
    kappa: Option<ParamSetting>,
    /// Moment bound M used by the theorem schedules.
    #[arg(long)]
    moment_bound: Option<f64>,
    /// Random seed (default 0; `sweep` uses the config seed unless this is given).
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Output path.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// ADMM controls for the Fantope-based fits.
#[derive(Args, Debug, Clone)]
struct AdmmArgs {
    /// Number of indices (subspace dimension) for `fit-mim` and `fit-spca`.
    #[arg(long, default_value_t = 1)]
    k: usize,
    /// Initial ADMM penalty.
    #[arg(long)]
    rho: Option<f64>,
    /// Stopping tolerance on max(primal, dual) residual.
    #[arg(long)]
    tol: Option<f64>,
    /// Iteration cap.
    #[arg(long)]
    max_iter: Option<usize>,
    /// Keep the penalty fixed instead of residual balancing.
    #[arg(long)]
    fixed_rho: bool,
}

#[derive(Args, Debug)]
struct FitArgs {
    /// Dataset CSV (`#dims=` header, then `y,x...` rows; no `y` for fit-spca).
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    admm: AdmmArgs,
}

#[derive(Args, Debug)]
struct SweepArgs {
    /// Sweep config (TOML).
    #[arg(long)]
    config: PathBuf,
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    admm: AdmmArgs,
}

#[derive(Args, Debug)]
struct PlotArgs {
    /// Sweep CSV written by `sweep`.
    #[arg(long)]
    input: PathBuf,
    /// Plot title.
    #[arg(long)]
    title: Option<String>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct SteinArgs {
    /// Identity order (1 or 2).
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(1..=2))]
    order: u8,
    /// Covariate dimension.
    #[arg(long, default_value_t = 5)]
    d: usize,
    /// Monte Carlo sample size.
    #[arg(long, default_value_t = 100_000)]
    n: usize,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] stein_index::Error),
    #[error("{0}")]
    Input(String),
    #[error("cannot read `{path}`: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("cannot write `{path}`: {source}")]
    Write { path: PathBuf, source: std::io::Error },
}

/// How a successful command ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Done,
    NotConverged,
}

fn run(cli: Cli) -> Result<Status, CliError> {
    match cli.command {
        Command::FitSim1(a) => fit::run(fit::FitKind::Sim1, a),
        Command::FitSim2(a) => fit::run(fit::FitKind::Sim2, a),
        Command::FitMim(a) => fit::run(fit::FitKind::Mim, a),
        Command::FitSpca(a) => fit::run(fit::FitKind::Spca, a),
        Command::Sweep(a) => sweep::run(a),
        Command::Plot(a) => plot::run(a),
        Command::SteinCheck(a) => stein::run(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(Status::Done) => ExitCode::SUCCESS,
        Ok(Status::NotConverged) => {
            eprintln!("warning: solver did not converge; estimate written with converged: false");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
