use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;

use commands::{CliError, Context};

/// Experiment harness for semilinear damped wave equations.
#[derive(Debug, Parser)]
#[command(name = "strausslab", version, about)]
struct Cli {
    /// Experiment config (`key = value`, dotted keys).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Directory for CSV and JSON outputs; overrides `output_dir`.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads for sweeps (default: all cores).
    #[arg(long, global = true, value_name = "N")]
    workers: Option<usize>,
    /// Replace `p` by the Strauss exponent of `n + μ₁`.
    #[arg(long = "pS", global = true)]
    p_strauss: bool,
    /// Print JSON to stdout instead of a table.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Critical exponents, roots and regime of the configured model.
    Exponents,
    /// Run the registered check suites.
    Verify,
    /// One solve with snapshots and functionals.
    Solve,
    /// Lifespans over the ε sweep and a log-log fit.
    LifespanSweep,
    /// Comparison-ODE blow-up times over the ε sweep.
    CriticalOdeSweep,
    /// Iteration ledger and the blow-up time it implies.
    Ledger,
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .map_err(|e| CliError::Runtime(format!("worker pool: {e}")))?;
    }
    let ctx = Context::new(cli.config.as_deref(), cli.out, cli.p_strauss, cli.json)?;
    match cli.command {
        Command::Exponents => commands::exponents(&ctx),
        Command::Verify => commands::verify(&ctx),
        Command::Solve => commands::solve(&ctx),
        Command::LifespanSweep => commands::lifespan_sweep(&ctx),
        Command::CriticalOdeSweep => commands::critical_ode_sweep(&ctx),
        Command::Ledger => commands::ledger(&ctx),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("STRAUSSLAB_LOG", "warn"))
        .init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("strausslab: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
