use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hsdc_cli::commands::{self, GenerateArgs, SolveArgs, SweepArgs, VerifyArgs};

/// Spectral divide-and-conquer eigensolver for symmetric banded matrices.
///
/// Exit codes: 0 success, 2 numerical breakdown (gap too small), 3 I/O,
/// 4 invalid configuration. Log verbosity is read from HSDC_LOG.
#[derive(Parser)]
#[command(name = "hsdc", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a test matrix in Matrix Market format with a JSON sidecar.
    Generate(GenerateArgs),
    /// Compute all eigenvalues and the factored eigenvectors.
    Solve(SolveArgs),
    /// Measure the accuracy of a decomposition written by `solve`.
    Verify(VerifyArgs),
    /// Run the solver over a grid of one parameter and tabulate the results.
    Sweep(SweepArgs),
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("HSDC_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 4 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Generate(a) => commands::cmd_generate(a).map(|s| eprintln!("wrote {} (n = {}, bandwidth {})", a.out.display(), s.n, s.bandwidth)),
        Command::Solve(a) => commands::cmd_solve(a).map(|d| eprintln!("{} eigenvalues written to {}", d.eigenvalues.len(), a.out.display())),
        Command::Verify(a) => commands::cmd_verify(a).map(|_| ()),
        Command::Sweep(a) => commands::cmd_sweep(a).map(|_| ()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(commands::exit_code(&e) as u8)
        }
    }
}
