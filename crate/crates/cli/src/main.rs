//! Command-line front-end: every pipeline of the simulation library as a
//! subcommand emitting plot-ready CSV/JSON.

mod cmd;
mod config;

use clap::{CommandFactory, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

use config::ConfigFile;

#[derive(Parser, Debug)]
#[command(
    name = "netscatter",
    version,
    about = "Excitation transport across centrosymmetric disordered networks",
    after_help = "Exit codes: 0 success, 1 numerical/I-O failure, 2 usage error."
)]
struct Cli {
    /// Master seed for every random draw.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Worker threads for ensemble sweeps (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Directory receiving output files.
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,

    /// TOML or JSON file with per-subcommand defaults (flags override it).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Print the resolved effective configuration and exit.
    #[arg(long, global = true)]
    dry_run: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Transfer-probability profile over an energy grid.
    Spectrum(cmd::scan::ScanArgs),
    /// Dwell-time profile over an energy grid.
    Dwell(cmd::scan::ScanArgs),
    /// Doublet analysis of a single realization (JSON to stdout).
    Doublet(cmd::doublet::DoubletArgs),
    /// Monte-Carlo sweep over the channel coupling.
    Ensemble(cmd::ensemble::EnsembleArgs),
    /// Tabulate the analytic statistics curves.
    Density(cmd::density::DensityArgs),
}

/// Failures split by exit code: usage problems exit 2, runtime failures 1.
pub enum CliError {
    Usage {
        subcommand: &'static str,
        message: String,
    },
    Failure(anyhow::Error),
}

impl<E: Into<anyhow::Error>> From<E> for CliError {
    fn from(e: E) -> Self {
        CliError::Failure(e.into())
    }
}

pub fn usage_error(subcommand: &'static str, message: impl Into<String>) -> CliError {
    CliError::Usage {
        subcommand,
        message: message.into(),
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::Failure(e.into()))?;
    }
    let config = match &cli.config {
        Some(path) => ConfigFile::load(path).map_err(CliError::Failure)?,
        None => ConfigFile::empty(),
    };
    let ctx = cmd::Ctx {
        seed: cli.seed,
        out_dir: cli.out_dir.clone(),
        dry_run: cli.dry_run,
        config,
    };
    match cli.command {
        Command::Spectrum(args) => cmd::scan::run(args, &ctx, cmd::scan::Mode::Spectrum),
        Command::Dwell(args) => cmd::scan::run(args, &ctx, cmd::scan::Mode::Dwell),
        Command::Doublet(args) => cmd::doublet::run(args, &ctx),
        Command::Ensemble(args) => cmd::ensemble::run(args, &ctx),
        Command::Density(args) => cmd::density::run(args, &ctx),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage {
            subcommand,
            message,
        }) => {
            let mut root = Cli::command();
            eprintln!("error: {message}");
            if let Some(sub) = root.find_subcommand_mut(subcommand) {
                eprintln!("\n{}", sub.render_usage());
            }
            eprintln!("\nFor more information, try '--help'.");
            ExitCode::from(2)
        }
        Err(CliError::Failure(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
