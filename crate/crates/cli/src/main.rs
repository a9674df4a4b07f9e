use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use microctl::commands::{self, CommandOutput};

/// Deterministic runner for the self-adaptive phone controller.
#[derive(Debug, Parser)]
#[command(name = "microctl", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a scenario and print its trace.
    Run {
        scenario: PathBuf,
        /// Override the scenario's tick count.
        #[arg(long)]
        ticks: Option<u64>,
        /// Write the trace here instead of standard output.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Compare a rule-table file with the embedded tables.
    Validate { tables: PathBuf },
    /// List rule sets that can be enabled together (exit 3 if any).
    CheckConflicts { variant: String },
    /// Print a context manager variant's rules.
    ListRules { variant: String },
    /// Print the variant pair chosen for each device health combination.
    ConfigMap,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let out: CommandOutput = match &cli.command {
        Command::Run {
            scenario,
            ticks,
            trace,
        } => commands::run(scenario, *ticks, trace.as_deref()),
        Command::Validate { tables } => commands::validate(tables),
        Command::CheckConflicts { variant } => commands::check_conflicts(variant),
        Command::ListRules { variant } => commands::list_rules(variant),
        Command::ConfigMap => commands::config_map(),
    };
    let _ = std::io::stdout().write_all(out.stdout.as_bytes());
    let _ = std::io::stderr().write_all(out.stderr.as_bytes());
    ExitCode::from(out.code as u8)
}
