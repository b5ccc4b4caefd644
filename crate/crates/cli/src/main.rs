use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use metagpe_cli::{run_command, Category, Command};

#[derive(Parser)]
#[command(name = "metagpe", version, about = "1D Gross-Pitaevskii simulations with norm-conserving dissipation")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Time-evolve the configured initial state.
    Evolve { config: PathBuf },
    /// Find the ground state by imaginary-time descent.
    Groundstate { config: PathBuf },
    /// Measure the damped Bogoliubov dispersion and compare it with theory.
    Dispersion { config: PathBuf },
    /// Thermal sample, then a dissipation stage, for each seed.
    Quench { config: PathBuf },
    /// Evolve a soliton state and track the density dips.
    Solitons { config: PathBuf },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let (command, path) = match cli.command {
        Sub::Evolve { config } => (Command::Evolve, config),
        Sub::Groundstate { config } => (Command::GroundState, config),
        Sub::Dispersion { config } => (Command::Dispersion, config),
        Sub::Quench { config } => (Command::Quench, config),
        Sub::Solitons { config } => (Command::Solitons, config),
    };
    match run_command(command, &path) {
        Ok(report) => {
            print!("{}", report.text);
            ExitCode::SUCCESS
        }
        Err(e) => {
            let c = e.category();
            eprintln!("error[{}]: {e}", c.name());
            if c == Category::Io {
                eprintln!("note: files written before the failure are left in place and may be incomplete");
            }
            ExitCode::from(c.exit_code() as u8)
        }
    }
}
