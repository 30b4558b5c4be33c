//! `kolmo`: reproducible experiments for empirical risk minimization on
//! linear Kolmogorov equations.
//!
//! Exit codes: 0 on success, 2 on usage or domain errors, 3 on numerical
//! failure.

mod commands;
mod config;
mod problem;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context as _, Result};
use clap::{Args, Parser, Subcommand};
use kolmo_core::pipeline::DEFAULT_SEED;

use commands::{Session, UsizeList};
use config::{global, ConfigFile};

#[derive(Parser)]
#[command(name = "kolmo", version, about = "ERM over clipped ReLU networks for affine Kolmogorov PDEs")]
struct Cli {
    /// Master seed; every random stream derives from it.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (0 = all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Directory for result files.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Key-value config file with one `[command]` section per command.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample-size and architecture certificate for the put family.
    Certify(CertifyArgs),
    /// Reference values of the solution on a grid (closed form or Monte Carlo).
    Simulate(SimulateArgs),
    /// Training data for the learning problem.
    Generate(GenerateArgs),
    /// Empirical risk minimization on a dataset file.
    Train(TrainArgs),
    /// L² error of a network against a reference grid.
    Evaluate(EvaluateArgs),
    /// Averaged-composition network from sampled affine maps.
    Build(BuildArgs),
    /// Generate, train and evaluate in one run.
    Pipeline(PipelineArgs),
    /// Pipeline over several dimensions plus the polynomial-growth audit.
    ScalingStudy(ScalingArgs),
    /// Writes an example basket-put problem file.
    Init(InitArgs),
}

#[derive(Args)]
pub struct CertifyArgs {
    #[arg(long)]
    dim: Option<usize>,
    /// Target accuracy ε in (0, 1).
    #[arg(long)]
    eps: Option<f64>,
    /// Failure probability ϱ in (0, 1).
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    family: Option<String>,
    /// Stand-in for the unexhibited constant C.
    #[arg(long)]
    constant: Option<f64>,
    /// Stand-in for the unexhibited constant c.
    #[arg(long)]
    c: Option<f64>,
    #[arg(long)]
    clip: Option<f64>,
    #[arg(long)]
    lower: Option<f64>,
    #[arg(long)]
    upper: Option<f64>,
}

#[derive(Args)]
pub struct SimulateArgs {
    #[arg(long)]
    problem: Option<PathBuf>,
    #[arg(long)]
    grid: Option<usize>,
    /// Paths per grid point for Monte Carlo.
    #[arg(long)]
    paths: Option<usize>,
    /// Use Monte Carlo even where a closed form exists.
    #[arg(long)]
    force_mc: bool,
}

#[derive(Args)]
pub struct GenerateArgs {
    #[arg(long)]
    problem: Option<PathBuf>,
    #[arg(long)]
    samples: Option<usize>,
    /// Also export the data as CSV.
    #[arg(long)]
    csv: bool,
}

#[derive(Args, Clone, Default)]
pub struct TrainingArgs {
    /// Hidden widths, comma separated.
    #[arg(long)]
    hidden: Option<UsizeList>,
    /// Parameter bound R; implies projection.
    #[arg(long)]
    bound: Option<f64>,
    #[arg(long)]
    project: bool,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    iterations: Option<usize>,
    /// Full-data risk checkpoints every this many iterations.
    #[arg(long)]
    eval_every: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    /// Multiply the step size by this factor every `decay-every` steps.
    #[arg(long)]
    decay_factor: Option<f64>,
    #[arg(long)]
    decay_every: Option<usize>,
}

#[derive(Args)]
pub struct TrainArgs {
    /// Binary dataset written by `generate`.
    #[arg(long)]
    data: Option<PathBuf>,
    #[command(flatten)]
    training: TrainingArgs,
}

#[derive(Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    network: Option<PathBuf>,
    /// Problem used to compute the reference grid.
    #[arg(long)]
    problem: Option<PathBuf>,
    /// Precomputed reference CSV instead of a problem.
    #[arg(long, conflicts_with = "problem")]
    reference: Option<PathBuf>,
    /// Clip amplitude D when evaluating against a reference file.
    #[arg(long)]
    clip: Option<f64>,
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long)]
    paths: Option<usize>,
    #[arg(long)]
    force_mc: bool,
}

#[derive(Args)]
pub struct BuildArgs {
    #[arg(long)]
    problem: Option<PathBuf>,
    /// Number of sampled affine maps; the theory suggests n ∝ d^τ/ε.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    retries: Option<usize>,
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long)]
    paths: Option<usize>,
}

#[derive(Args)]
pub struct PipelineArgs {
    #[arg(long)]
    problem: Option<PathBuf>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long)]
    paths: Option<usize>,
    #[command(flatten)]
    training: TrainingArgs,
}

#[derive(Args)]
pub struct ScalingArgs {
    /// Dimensions, comma separated.
    #[arg(long)]
    dims: Option<UsizeList>,
    /// Samples m(d) = base·d^power.
    #[arg(long)]
    base: Option<f64>,
    #[arg(long)]
    power: Option<f64>,
    /// L² error every run must reach.
    #[arg(long)]
    target: Option<f64>,
    /// Largest admissible log-log slope of m against d.
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    rate: Option<f64>,
    #[arg(long)]
    vol: Option<f64>,
    #[arg(long)]
    horizon: Option<f64>,
    #[arg(long)]
    clip: Option<f64>,
    #[arg(long)]
    lower: Option<f64>,
    #[arg(long)]
    upper: Option<f64>,
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long)]
    paths: Option<usize>,
    #[command(flatten)]
    training: TrainingArgs,
}

#[derive(Args)]
pub struct InitArgs {
    #[arg(long, default_value_t = 1)]
    dim: usize,
    /// Destination file.
    #[arg(long, default_value = "problem.txt")]
    output: PathBuf,
}

fn run(cli: Cli) -> Result<()> {
    let config = cli.config.as_deref().map(ConfigFile::load).transpose()?;
    let seed = match cli.seed {
        Some(s) => s,
        None => global(config.as_ref(), "seed")?.unwrap_or(DEFAULT_SEED),
    };
    let threads = match cli.threads {
        Some(t) => t,
        None => global(config.as_ref(), "threads")?.unwrap_or(0),
    };
    let out_dir = match cli.out_dir {
        Some(d) => d,
        None => global::<String>(config.as_ref(), "out-dir")?.map_or_else(|| PathBuf::from("."), PathBuf::from),
    };
    let ctx = Session {
        config,
        seed,
        out_dir,
    };
    kolmo_core::par::with_threads(threads, || match cli.command {
        Command::Certify(a) => commands::certify(&ctx, a),
        Command::Simulate(a) => commands::simulate(&ctx, a),
        Command::Generate(a) => commands::generate(&ctx, a),
        Command::Train(a) => commands::train(&ctx, a),
        Command::Evaluate(a) => commands::evaluate(&ctx, a),
        Command::Build(a) => commands::build(&ctx, a),
        Command::Pipeline(a) => commands::pipeline(&ctx, a),
        Command::ScalingStudy(a) => commands::scaling(&ctx, a),
        Command::Init(a) => std::fs::write(&a.output, commands::example_problem(a.dim))
            .with_context(|| format!("cannot write {}", a.output.display())),
    })
}

fn exit_code(err: &anyhow::Error) -> u8 {
    let numerical = err
        .chain()
        .filter_map(|e| e.downcast_ref::<kolmo_core::Error>())
        .any(|e| e.is_numerical());
    if numerical {
        3
    } else {
        2
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
