use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod bench_cmd;
mod fit;
mod output;
mod simulate_cmd;

/// Hazard segmentation on the Lexis diagram.
#[derive(Debug, Parser)]
#[command(name = "lexisseg", version, about)]
struct Cli {
    /// Worker threads; outputs do not depend on this.
    #[arg(long, global = true, env = "LEXISSEG_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit a penalized hazard to records or register data and select κ.
    Fit(fit::FitArgs),
    /// Run replicated simulations and score each estimator.
    Simulate(simulate_cmd::SimulateArgs),
    /// Time banded against dense factor+solve on grid Hessians.
    Bench(bench_cmd::BenchArgs),
}

fn main() -> ExitCode {
    ExitCode::from(run(Cli::parse()))
}

/// Runs a parsed invocation and returns the process exit status.
fn run(cli: Cli) -> u8 {
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be positive");
            return 2;
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return 2;
        }
    }
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            output::exit_code(&e)
        }
    }
}

fn dispatch(command: Command) -> anyhow::Result<()> {
    match command {
        Command::Fit(args) => fit::run(args),
        Command::Simulate(args) => simulate_cmd::run(args),
        Command::Bench(args) => bench_cmd::run(args),
    }
}
