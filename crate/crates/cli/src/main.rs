//! `manikkt`: seeded data generation, constrained means on the sphere, and
//! KKT / constraint-qualification certificates at a given point.
//!
//! Exit codes: 0 success, 2 configuration or usage, 3 data, 4 numerical,
//! 5 KKT witness found, 6 infeasible point. Set `MANIKKT_LOG` to `info` or
//! `debug` for diagnostics on stderr.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::commands::SolveArgs;
use crate::config::RunConfig;

#[derive(Debug)]
pub enum Failure {
    Config(String),
    Data(String),
    Numeric(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Data(_) => 3,
            Failure::Numeric(_) => 4,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Config(m) => write!(f, "config error: {m}"),
            Failure::Data(m) => write!(f, "data error: {m}"),
            Failure::Numeric(m) => write!(f, "numerical error: {m}"),
        }
    }
}

/// Classifies a library error raised after the inputs were accepted.
pub fn numeric(e: manikkt_core::Error) -> Failure {
    use manikkt_core::Error as E;
    match e {
        E::Data(m) | E::Io(m) => Failure::Data(m),
        E::InvalidRadius(_) | E::InvalidArgument(_) | E::InvalidManifold(_) | E::DimensionMismatch { .. } => {
            Failure::Config(e.to_string())
        }
        other => Failure::Numeric(other.to_string()),
    }
}

#[derive(Parser)]
#[command(name = "manikkt", version, about = "Constrained means on the sphere with KKT and CQ certificates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample points uniformly on a spherical cap and write them as CSV.
    GenData {
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        n: usize,
        /// Cap centre, comma separated.
        #[arg(long, value_parser = parse_coords, allow_hyphen_values = true)]
        center: Coords,
        /// Cap angular radius in (0, pi/2).
        #[arg(long)]
        radius: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the unconstrained and the projected descent; write the trace and
    /// a result JSON.
    Solve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Significant digits in the trace CSV instead of round-trip output.
        #[arg(long)]
        digits: Option<usize>,
    },
    /// Certify multipliers or a Farkas witness at a point.
    KktCheck {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_parser = parse_coords, allow_hyphen_values = true)]
        point: Coords,
    },
    /// LICQ, MFCQ (primal and dual) and a two-chart cross-check at a point.
    CqCheck {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_parser = parse_coords, allow_hyphen_values = true)]
        point: Coords,
    },
}

#[derive(Debug, Clone)]
struct Coords(Vec<f64>);

fn parse_coords(s: &str) -> Result<Coords, String> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}")))
        .collect::<Result<Vec<f64>, String>>()
        .map(Coords)
}

fn run(cli: Cli) -> Result<i32, Failure> {
    match cli.command {
        Command::GenData { seed, n, center, radius, out } => commands::gen_data(seed, n, &center.0, radius, &out),
        Command::Solve { config, trace, out, digits } => {
            commands::solve(&RunConfig::load(&config)?, SolveArgs { trace, out, digits })
        }
        Command::KktCheck { config, point } => commands::kkt_check(&RunConfig::load(&config)?, &point.0),
        Command::CqCheck { config, point } => commands::cq_check(&RunConfig::load(&config)?, &point.0),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::new()
        .filter_level(log::LevelFilter::Off)
        .parse_env(env_logger::Env::new().filter("MANIKKT_LOG"))
        .init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(f) => {
            eprintln!("manikkt: {f}");
            ExitCode::from(f.code())
        }
    }
}
