//! `secdrive`: batch runner for the secant-pulse-driven spin model.
//!
//! Every subcommand resolves its parameters as defaults < config file <
//! flags, writes deterministic CSV/JSON plus a metadata sidecar, and maps
//! failures to exit codes: 0 success, 2 validation error, 1 numerical or I/O
//! failure. `SECDRIVE_THREADS` caps the sweep worker pool.

mod commands;
mod config;
mod plot;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{CliError, CliResult, FileConfig};

#[derive(Parser, Debug)]
#[command(
    name = "secdrive",
    version,
    about = "Secant-pulse-driven spin dynamics: exact propagator, dynamical invariant, \
             and nonadiabatic geometric phase",
    propagate_version = true
)]
struct Cli {
    /// Config file (flat key = value lines with optional [subcommand] sections)
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Integrate the Schrödinger equation and record the trajectory
    Simulate(commands::SimulateArgs),
    /// Total/dynamical/geometric phase over a drive window
    Phase(commands::PhaseArgs),
    /// Field profile and diabatic levels on the scaled-time grid
    Levels(commands::LevelsArgs),
    /// Bloch-sphere loop of the invariant, with its solid angle
    Bloch(commands::BlochArgs),
    /// Geometric-phase error under symmetric pulse truncation
    Truncate(commands::TruncateArgs),
    /// Adiabatic-condition ratio and reversed-drive fidelity loss
    Adiabaticity(commands::AdiabaticityArgs),
    /// Geometric phase across envelope shapes at matched truncation
    Universality(commands::UniversalityArgs),
    /// Render a sweep CSV as an SVG line chart
    Plot(plot::PlotArgs),
    /// Run the built-in invariant checks
    Selftest,
}

fn configure_thread_pool() -> CliResult<()> {
    let Ok(raw) = std::env::var("SECDRIVE_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw.parse().map_err(|_| {
        CliError::Validation(format!(
            "SECDRIVE_THREADS must be a positive integer (got '{raw}')"
        ))
    })?;
    if threads == 0 {
        return Err(CliError::Validation(
            "SECDRIVE_THREADS must be at least 1".into(),
        ));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Validation(format!("cannot configure thread pool: {e}")))
}

fn dispatch(cli: &Cli) -> CliResult<()> {
    configure_thread_pool()?;
    let file = match &cli.config {
        Some(path) => Some(FileConfig::load(path)?),
        None => None,
    };
    let file = file.as_ref();
    match &cli.command {
        Command::Simulate(args) => commands::run_simulate(file, args),
        Command::Phase(args) => commands::run_phase(file, args),
        Command::Levels(args) => commands::run_levels(file, args),
        Command::Bloch(args) => commands::run_bloch(file, args),
        Command::Truncate(args) => commands::run_truncate(file, args),
        Command::Adiabaticity(args) => commands::run_adiabaticity(file, args),
        Command::Universality(args) => commands::run_universality_cmd(file, args),
        Command::Plot(args) => plot::run_plot(args),
        Command::Selftest => commands::run_selftest(),
    }
}

fn main() -> ExitCode {
    // Die quietly when a downstream pipe closes (e.g. `secdrive ... | head`).
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err)
            if matches!(
                err.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            ) =>
        {
            print!("{err}");
            return ExitCode::SUCCESS;
        }
        Err(err) => {
            // Argument errors keep the one-line diagnostic contract.
            let rendered = err.to_string();
            let first = rendered
                .lines()
                .next()
                .unwrap_or("invalid arguments")
                .trim_start_matches("error: ");
            eprintln!("error[validation]: {first}");
            return ExitCode::from(2);
        }
    };
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("{err}");
            ExitCode::from(err.exit_code())
        }
    }
}
