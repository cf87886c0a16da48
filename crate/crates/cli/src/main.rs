mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pareto_avgcost::Norm;

/// Average-cost analysis and Pareto control synthesis for composite Markov
/// systems.
#[derive(Debug, Parser)]
#[command(name = "pareto-avgcost", version)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Scenario JSON file, or `paper` for the built-in two-subsystem example.
    #[arg(long, global = true, value_name = "PATH|paper")]
    scenario: Option<String>,

    /// Directory that receives every output file.
    #[arg(long, global = true, default_value = "out", value_name = "DIR")]
    out: PathBuf,

    #[arg(long, global = true, default_value_t = 7)]
    seed: u64,

    #[arg(long, global = true, default_value_t = Norm::Euclidean)]
    norm: Norm,

    /// Overrides the command's tolerance.
    #[arg(long, global = true)]
    tol: Option<f64>,
}

#[derive(Debug, Args)]
struct ScenarioArg {
    /// Scenario JSON file, or `paper`.
    #[arg(value_name = "SCENARIO")]
    scenario: Option<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check the modelling assumptions.
    Validate(ScenarioArg),
    /// Average costs of every factored policy.
    Tables {
        #[command(flatten)]
        scenario: ScenarioArg,
        /// Compare against the built-in reference tables (default tolerance 5e-3).
        #[arg(long)]
        golden: bool,
    },
    /// State-wise Pareto analysis and the Pareto control policy.
    Pareto(ScenarioArg),
    /// Optimal average cost by relative value iteration (default tolerance 1e-9).
    Dp(ScenarioArg),
    /// Compare the Pareto control policy with every factored policy (default tolerance 1e-9).
    Audit(ScenarioArg),
    /// Randomized replication study (default tolerance 1e-9).
    Replicate {
        #[command(flatten)]
        scenario: ScenarioArg,
        #[arg(long, default_value_t = 1000)]
        reps: usize,
        /// Also draw every transition row uniformly from the simplex.
        #[arg(long)]
        randomize_transitions: bool,
        /// Relative output band for non-built-in scenarios.
        #[arg(long, default_value_t = 0.5)]
        spread: f64,
    },
}

/// Exit status: analytic failure vs. usage or I/O failure.
#[derive(Debug)]
pub enum Failure {
    Analytic(String),
    Usage(String),
}

impl From<pareto_avgcost::Error> for Failure {
    fn from(e: pareto_avgcost::Error) -> Self {
        Failure::Analytic(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(raw) = std::env::var("PARETO_AVGCOST_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .map_err(|_| Failure::Usage(format!("PARETO_AVGCOST_THREADS must be a nonnegative integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::Usage(e.to_string()))
}

fn run(cli: Cli) -> Result<bool, Failure> {
    configure_threads()?;
    if let Some(t) = cli.tol {
        if !(t.is_finite() && t > 0.0) {
            return Err(Failure::Usage(format!("--tol must be positive, got {t}")));
        }
    }
    let pick = |arg: &ScenarioArg| arg.scenario.clone().or_else(|| cli.scenario.clone()).unwrap_or_else(|| "paper".into());
    let ctx = |arg: &ScenarioArg| -> Result<commands::Context, Failure> {
        commands::Context::new(&pick(arg), cli.out.clone(), cli.seed, cli.norm, cli.tol)
    };
    match &cli.command {
        Command::Validate(a) => commands::validate(&ctx(a)?),
        Command::Tables { scenario, golden } => commands::tables(&ctx(scenario)?, *golden),
        Command::Pareto(a) => commands::pareto(&ctx(a)?),
        Command::Dp(a) => commands::dp(&ctx(a)?),
        Command::Audit(a) => commands::audit(&ctx(a)?),
        Command::Replicate {
            scenario,
            reps,
            randomize_transitions,
            spread,
        } => commands::replicate(&ctx(scenario)?, *reps, *randomize_transitions, *spread),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Analytic(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
