//! Config-driven experiment runner for the particle smoothing and SEM
//! library. See `--help` and `list-scenarios` for available protocols.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical failure.

mod config;
mod runner;
mod scenarios;

use clap::{Args, Parser, Subcommand};
use smcem::error::Error;

use crate::config::ExperimentConfig;

#[derive(Parser)]
#[command(
    name = "smcem",
    about = "Particle smoothers and stochastic EM for state-space models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct CommonArgs {
    /// JSON experiment config; flags override its fields.
    #[arg(long)]
    config: Option<String>,
    /// Named scenario (see list-scenarios).
    #[arg(long)]
    scenario: Option<String>,
    /// Root seed for data generation and repetitions.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for repetitions (default: all cores).
    #[arg(long)]
    jobs: Option<usize>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: String,
    /// Refuse jobs whose estimated model-evaluation count exceeds this.
    #[arg(long)]
    max_evals: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Write a simulated truth/observation pair as CSV.
    Simulate(CommonArgs),
    /// Run repeated SEM estimations and write traces plus final estimates.
    Estimate(CommonArgs),
    /// Run one SEM estimation and write the pooled reconstruction summary.
    Smooth(CommonArgs),
    /// Train on a short window, score smoothers on a long test window.
    Crossval(CommonArgs),
    /// List the named scenarios.
    ListScenarios,
}

fn load_config(args: &CommonArgs) -> Result<ExperimentConfig, Error> {
    let base = match &args.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    Ok(base.with_overrides(args.scenario.clone(), args.seed, Some(args.out.clone())))
}

fn setup_jobs(args: &CommonArgs) -> Result<(), Error> {
    if let Some(jobs) = args.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| Error::InvalidConfig {
                reason: format!("--jobs: {e}"),
            })?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Simulate(args) => {
            let cfg = load_config(&args)?;
            let model = scenarios::simulate_model(&cfg)?;
            runner::cmd_simulate(&model, cfg.out.as_deref().unwrap_or("out"))
        }
        Command::Estimate(args) => {
            setup_jobs(&args)?;
            let cfg = load_config(&args)?;
            let job = scenarios::estimate_job(&cfg)?;
            runner::cmd_estimate(&job, cfg.out.as_deref().unwrap_or("out"), args.max_evals)
        }
        Command::Smooth(args) => {
            setup_jobs(&args)?;
            let cfg = load_config(&args)?;
            let job = scenarios::smooth_job(&cfg)?;
            runner::cmd_smooth(&job, cfg.out.as_deref().unwrap_or("out"), args.max_evals)
        }
        Command::Crossval(args) => {
            setup_jobs(&args)?;
            let cfg = load_config(&args)?;
            let job = scenarios::crossval_job(&cfg)?;
            runner::cmd_crossval(&job, cfg.out.as_deref().unwrap_or("out"), args.max_evals)
        }
        Command::ListScenarios => {
            for s in scenarios::SCENARIOS {
                println!("{:<10} {:<9} {}", s.name, s.command, s.description);
            }
            Ok(())
        }
    }
}

fn exit_code(err: &Error) -> i32 {
    match err {
        Error::AllWeightsDegenerate { .. }
        | Error::NonFiniteState { .. }
        | Error::SingularInnovation { .. }
        | Error::SingularEnsembleCovariance { .. }
        | Error::DegenerateRegressor
        | Error::NonFiniteLogDensity
        | Error::SemAborted { .. } => 3,
        _ => 2,
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(exit_code(&e));
    }
}
