use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use qhj_core::cli::{run_path, Scenario, ScenarioConfig};

#[derive(Parser)]
#[command(name = "qhj", version, about = "Quantum Hamilton-Jacobi scenario runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario configuration and write its artifacts.
    Run {
        config: PathBuf,
        /// Output directory (overrides `output_dir` in the config).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Seed for randomly drawn states.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// List the available scenarios.
    ListScenarios,
    /// Parse and validate a configuration without running it.
    Validate { config: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::ListScenarios => {
            for s in Scenario::ALL {
                println!("{:<16}{}", s.name(), s.summary());
            }
            ExitCode::SUCCESS
        }
        Command::Validate { config } => match ScenarioConfig::load(&config).and_then(|c| c.validate()) {
            Ok(()) => {
                println!("{}: ok", config.display());
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("{}: {e}", config.display());
                ExitCode::from(2)
            }
        },
        Command::Run { config, out, seed } => match run_path(&config, out.as_deref(), seed) {
            Ok(m) => {
                for c in &m.checks {
                    println!("{} {}: {:e} (tol {:e})", if c.passed { "PASS" } else { "FAIL" }, c.name, c.value, c.tol);
                }
                if let Some(e) = &m.error {
                    eprintln!("error: {e}");
                }
                ExitCode::from(m.status.exit_code() as u8)
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(2)
            }
        },
    }
}
