use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use cwbc_cli::{cmd_run, cmd_sweep, cmd_validate};
use cwbc_core::validation::Faults;

#[derive(Parser)]
#[command(name = "cwbc", version, about = "Coupled exoskeleton-operator simulations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one scenario; writes timeseries.csv and summary.txt.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Repeat the scenario over the k_ff_sweep factors; writes one CSV per
    /// factor and sweep_report.txt. CWBC_THREADS sets the worker count.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the acceptance criteria on the default scenario.
    Validate {
        #[arg(long, value_enum, hide = true)]
        inject_fault: Option<Fault>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Fault {
    NegateGravity,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run { config, out } => cmd_run(&config, &out),
        Command::Sweep { config, out } => cmd_sweep(&config, &out),
        Command::Validate { inject_fault } => cmd_validate(Faults {
            negate_gravity: matches!(inject_fault, Some(Fault::NegateGravity)),
        }),
    };
    ExitCode::from(outcome.code())
}
