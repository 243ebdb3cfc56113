//! `ising-adder`: compile, simulate and analyse the Ising-chain full adder.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use thiserror::Error;

use config::Overrides;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] ising_adder::Error),
    #[error("cannot write output: {0}")]
    Io(#[from] std::io::Error),
    #[error("{failed} of {total} checks failed")]
    Invariant { failed: usize, total: usize },
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Io(_) => 1,
            CliError::Core(ising_adder::Error::ResourceCap { .. }) => 3,
            CliError::Core(ising_adder::Error::DegenerateAmplitude { .. }) | CliError::Invariant { .. } => 2,
            CliError::Core(_) => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "ising-adder", version, about = "Full adder on an Ising spin chain: pulse compiler, exact and map simulators")]
struct Cli {
    /// TOML file with settings; command-line flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Write the output here instead of standard output.
    #[arg(short, long, global = true)]
    output: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Figure {
    Fig1,
    Fig2,
    Fig3,
    Fig4,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write the pulse schedule for one addend.
    Compile(Overrides),
    /// Simulate the protocol exactly (at most 13 spins).
    RunExact(Overrides),
    /// Run the perturbative quantum map.
    RunMap(Overrides),
    /// Exact and map error curves side by side.
    Compare(Overrides),
    /// Regenerate the data behind one figure; flags override its parameters.
    Reproduce {
        figure: Figure,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Run the pulse-level verification suite.
    Verify {
        /// K values for the suppression check.
        #[arg(long, value_delimiter = ',', default_value = "4,8,100")]
        suppression_k: Vec<u32>,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    let file = match &cli.config {
        Some(p) => Overrides::from_file(p)?,
        None => Overrides::default(),
    };
    let out = cli.output.as_deref();
    match cli.command {
        Command::Compile(o) => commands::compile(o.or(file), out),
        Command::RunExact(o) => commands::run_exact(o.or(file), out),
        Command::RunMap(o) => commands::run_map(o.or(file), out),
        Command::Compare(o) => commands::compare(o.or(file), out),
        Command::Reproduce { figure, overrides } => commands::reproduce(figure, overrides.or(file), out),
        Command::Verify { suppression_k } => commands::verify(&suppression_k, out),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
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
