mod checks;
mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use checks::InjectedFault;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("runtime fault: {0}")]
    Runtime(String),
    #[error("synthesis failure: {0}")]
    Synthesis(String),
    #[error("verification failure: {0}")]
    Verification(String),
}

impl CliError {
    pub fn from_core(e: quadpos::Error) -> Self {
        match e {
            quadpos::Error::Synthesis { .. } => Self::Synthesis(e.to_string()),
            other => Self::Config(other.to_string()),
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            Self::Config(_) => 1,
            Self::Runtime(_) => 2,
            Self::Synthesis(_) => 3,
            Self::Verification(_) => 4,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "quadpos", version, about = "Quadcopter point-stabilization simulator and gain synthesis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a closed-loop scenario and write trajectory.csv and metrics.json.
    Simulate {
        config: PathBuf,
        /// Override a config value, e.g. `--set scenario.horizon=5`.
        #[arg(long = "set", value_name = "PATH=VALUE")]
        set: Vec<String>,
        /// Output directory (defaults to `output.dir`, then the working directory).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Synthesize and certify the gains described in the `gains` section.
    Gains { config: PathBuf },
    /// Run the built-in invariant checks at seeded random points.
    Verify {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, value_enum, hide = true)]
        inject_fault: Option<InjectedFault>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate { config, set, out } => commands::simulate(&config, &set, out),
        Command::Gains { config } => commands::gains(&config),
        Command::Verify {
            seed,
            trials,
            inject_fault,
        } => commands::verify(seed, trials, inject_fault),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("quadpos: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
