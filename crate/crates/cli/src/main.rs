//! `hergnet`: train plane-wave models for shoebox rooms and write CSV results.

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hergnet::ShoeboxDomain;

mod commands;
mod config;
mod output;

use commands::Invocation;
use config::RunConfig;

#[derive(Parser)]
#[command(name = "hergnet", version, about = "Helmholtz solves in shoebox rooms with plane-wave networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `out` in the configuration.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Training seed; overrides `training.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Validate the configuration and print problem sizes without solving.
    #[arg(long, global = true)]
    dry_run: bool,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Train at one frequency and compare with the modal reference on a grid.
    Solve,
    /// Train at every frequency of a sweep; transfer functions, levels, impulse responses.
    Sweep,
    /// Mode table and reference field only, no training.
    Oracle,
    /// Check the analytic loss gradient against finite differences.
    Gradcheck {
        /// Scale the analytic gradient by 1.01 before comparing.
        #[arg(long, hide = true)]
        corrupt_gradient: bool,
    },
}

#[derive(Debug)]
pub enum CliError {
    /// Exit code 2.
    Config(String),
    /// Exit code 3.
    Numerical(String),
    /// Exit code 1.
    Failed(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Failed(_) => 1,
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
            CliError::Failed(m) => f.write_str(m),
        }
    }
}

impl From<hergnet::Error> for CliError {
    fn from(e: hergnet::Error) -> Self {
        use hergnet::Error as E;
        let msg = e.to_string();
        match e {
            E::InvalidConfig(_) | E::DimensionMismatch { .. } | E::NonUniformGrid(_) => CliError::Config(msg),
            E::Io(_) | E::Format(_) => CliError::Failed(msg),
            _ => CliError::Numerical(msg),
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Failed(e.to_string()))?;
    }
    let raw = cli
        .config
        .as_ref()
        .map(|p| {
            std::fs::read_to_string(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))
        })
        .transpose()?;
    let config = match (&raw, &cli.command) {
        (Some(text), _) => RunConfig::parse(text)?,
        (None, Command::Gradcheck { .. }) => RunConfig::for_domain(&ShoeboxDomain::louden_room(), 500.0),
        (None, _) => return Err(CliError::Config("--config is required for this command".into())),
    };
    let resolved = config.resolve(cli.seed, cli.out)?;
    let inv = Invocation {
        resolved: &resolved,
        raw_config: raw.as_deref(),
        dry_run: cli.dry_run,
    };
    match cli.command {
        Command::Solve => commands::solve(&inv),
        Command::Sweep => commands::sweep_cmd(&inv),
        Command::Oracle => commands::oracle_cmd(&inv),
        Command::Gradcheck { corrupt_gradient } => commands::gradcheck_cmd(&inv, corrupt_gradient),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("hergnet: {e}");
            ExitCode::from(e.code())
        }
    }
}
