use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ppd::commands::{self, CorrectArgs, LogicOpArgs, SweepArgs};

/// Power packet dispatching simulator.
#[derive(Debug, Parser)]
#[command(name = "ppd", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a logic operation on a slot pattern.
    LogicOp(LogicOpArgs),
    /// Run the error-correction study with and without the selector.
    Correct(CorrectArgs),
    /// Repeat the error-correction study over seeds and input probabilities.
    Sweep(SweepArgs),
    /// Run the built-in self-checks.
    Validate,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let res = match &cli.command {
        Command::LogicOp(a) => commands::logic_op(a, &mut out),
        Command::Correct(a) => commands::correct(a, &mut out),
        Command::Sweep(a) => commands::sweep(a, &mut out),
        Command::Validate => commands::validate(&mut out),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(e.exit_code())
        }
    }
}
