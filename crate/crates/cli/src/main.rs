mod commands;
mod config;
mod error;
mod model;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::commands::{CompensatorArgs, CopulaArgs, GapTestArgs, KnnArgs, SimulateArgs, VerifyArgs};
use crate::error::{CliError, EXIT_INVALID};

/// Scaled empirical point processes: simulation, compensators, limit-law
/// verification, k-NN density inference, gap tests and copula extremes.
#[derive(Debug, Parser)]
#[command(name = "pll", version)]
struct Cli {
    /// Config file with one section per subcommand, or a previous output
    /// whose echoed config header is reused; flags override its values
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Worker threads (default: available cores); results do not depend on it
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
    /// Output file (default: stdout)
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Scaled process around one anchor, as CSV
    Simulate(SimulateArgs),
    /// Compensator paths at one or more quantiles, as CSV
    Compensator(CompensatorArgs),
    /// Monte Carlo checks of the Poisson limit laws, as JSON lines
    Verify(VerifyArgs),
    /// k-nearest-neighbour density estimate with confidence interval, as JSON
    Knn(KnnArgs),
    /// Likelihood-ratio test for a gap at the left support edge, as JSON
    GapTest(GapTestArgs),
    /// Normal-copula tail fit (JSON) or joint extremes (CSV)
    Copula(CopulaArgs),
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(CliError::invalid("threads", "must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| CliError::invalid("threads", e.to_string()))?;
    }
    let file = cli.config.as_deref().map(config::load).transpose()?;
    let file = file.as_ref();
    let (payload, outcome) = match &cli.command {
        Command::Simulate(a) => (commands::simulate(a, file)?, Ok(())),
        Command::Compensator(a) => (commands::compensator(a, file)?, Ok(())),
        Command::Verify(a) => commands::verify(a, file)?,
        Command::Knn(a) => (commands::knn(a, file)?, Ok(())),
        Command::GapTest(a) => (commands::gap_test(a, file)?, Ok(())),
        Command::Copula(a) => (commands::copula(a, file)?, Ok(())),
    };
    match &cli.out {
        Some(path) => std::fs::write(path, payload.as_bytes())?,
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(payload.as_bytes())?;
            stdout.flush()?;
        }
    }
    outcome
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
