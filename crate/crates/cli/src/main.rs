//! `qtrack`: run, analyze, and validate phase-space measurement trajectory
//! ensembles.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "qtrack", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ScanParam {
    Gamma,
    D,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate an ensemble and write clicks.csv and manifest.json.
    Run {
        /// Configuration file (key = value lines).
        config: PathBuf,
        /// Output directory (created if missing).
        #[arg(short, long)]
        out: PathBuf,
        /// Worker threads (default: $QTRACK_WORKERS or all cores).
        #[arg(short, long)]
        workers: Option<usize>,
        /// Override a configuration value, e.g. --set n_traj=10.
        #[arg(long = "set", value_parser = commands::parse_override)]
        overrides: Vec<(String, String)>,
    },
    /// Compute ensemble statistics from one or more clicks files.
    Analyze {
        /// clicks.csv files; each must sit next to its manifest.json.
        #[arg(required = true)]
        clicks: Vec<PathBuf>,
        /// Output directory for the report files.
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Run the built-in oracle checks and print a pass/fail table.
    Validate {
        /// Worker threads for the ensemble check.
        #[arg(short, long)]
        workers: Option<usize>,
    },
    /// Run and analyze a sweep over gamma or the lattice spacing.
    Scan {
        /// Base configuration file.
        config: PathBuf,
        /// Output directory; one subdirectory per value plus scaling.csv.
        #[arg(short, long)]
        out: PathBuf,
        /// Parameter to sweep.
        #[arg(long, value_enum)]
        param: ScanParam,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        /// Worker threads (default: $QTRACK_WORKERS or all cores).
        #[arg(short, long)]
        workers: Option<usize>,
        /// Override a base configuration value.
        #[arg(long = "set", value_parser = commands::parse_override)]
        overrides: Vec<(String, String)>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            config,
            out,
            workers,
            overrides,
        } => commands::run(&config, &out, workers, &overrides).map(|_| true),
        Command::Analyze { clicks, out } => commands::analyze(&clicks, &out).map(|_| true),
        Command::Validate { workers } => commands::validate(workers),
        Command::Scan {
            config,
            out,
            param,
            values,
            workers,
            overrides,
        } => commands::scan(&config, &out, param, &values, workers, &overrides).map(|_| true),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(err) => {
            let (category, code) = commands::classify(&err);
            eprintln!("error[{category}]: {err:#}");
            ExitCode::from(code)
        }
    }
}
