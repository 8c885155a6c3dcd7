//! Command-line driver: dipole matrices, bound sweeps, cluster
//! simulations, witness certification, and the verification suite.

mod commands;
mod config;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use thiserror::Error;

/// Errors mapped onto the exit-code contract: 2 config, 3 data,
/// 4 resource cap, 5 verification failure.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("resource limit: {0}")]
    Resource(String),
    #[error("verification failed: {0}")]
    Verification(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Resource(_) => 4,
            CliError::Verification(_) => 5,
        }
    }
}

pub(crate) fn rixs_error_to_cli(e: qfi_rixs::rixssim::RixsError) -> CliError {
    use qfi_rixs::rixssim::RixsError::*;
    match e {
        DiagCapExceeded { .. } => CliError::Resource(e.to_string()),
        InvalidModel(_) | InvalidWeights(_) => CliError::Config(e.to_string()),
        ManyBody(qfi_rixs::manybody::ManyBodyError::DimensionCapExceeded { .. }) => {
            CliError::Resource(e.to_string())
        }
        other => CliError::Data(other.to_string()),
    }
}

#[derive(Parser)]
#[command(
    name = "qfi-rixs",
    version,
    about = "Spin-orbital entanglement witnesses from RIXS spectra"
)]
struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for all artifacts.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Seed for all randomized procedures.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute or re-emit dipole transition matrices for one geometry.
    Dipole {
        /// Import matrices from a JSON file instead of the atomic path.
        #[arg(long)]
        dipole_file: Option<PathBuf>,
        /// Polarization channel, e.g. pi-sigma.
        #[arg(long)]
        channel: Option<String>,
    },
    /// Angular sweep of k-producibility bounds (CSV, optional SVG).
    Bounds {
        /// Grid points per angle axis.
        #[arg(long)]
        grid: Option<usize>,
        /// Comma-separated channels: pi-pi,pi-sigma,sigma-pi,sigma-sigma.
        #[arg(long)]
        channels: Option<String>,
        /// Comma-separated producibility classes, e.g. 1,2,3.
        #[arg(long)]
        k: Option<String>,
        /// Single-point bounds from imported dipole matrices.
        #[arg(long)]
        dipole_file: Option<PathBuf>,
        /// Also render SVG heatmaps.
        #[arg(long)]
        svg: bool,
    },
    /// Exact-diagonalization RIXS simulation of a small cluster.
    Simulate {
        /// Inverse core-hole lifetime.
        #[arg(long)]
        gamma: Option<f64>,
    },
    /// Certify entanglement depth from spectra.
    Witness {
        /// Inverse core-hole lifetime of the measurement.
        #[arg(long)]
        gamma: Option<f64>,
        /// Dipole matrices defining the bound scattering matrix.
        #[arg(long)]
        dipole_file: Option<PathBuf>,
    },
    /// Run the property/oracle suite; exit 0 iff everything passes.
    Verify {
        #[arg(long, hide = true)]
        inject_phase_sign_error: bool,
    },
}

fn run(cli: &Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        // ignore the error if a global pool already exists (e.g. in tests)
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let config = cli.config.as_deref();
    let out = cli.out.as_path();
    match &cli.command {
        Command::Dipole {
            dipole_file,
            channel,
        } => commands::cmd_dipole(config, out, dipole_file.as_deref(), channel.as_deref()),
        Command::Bounds {
            grid,
            channels,
            k,
            dipole_file,
            svg,
        } => commands::cmd_bounds(
            config,
            out,
            *grid,
            channels.as_deref(),
            k.as_deref(),
            dipole_file.as_deref(),
            *svg,
        ),
        Command::Simulate { gamma } => commands::cmd_simulate(config, out, *gamma, cli.seed),
        Command::Witness { gamma, dipole_file } => {
            commands::cmd_witness(config, out, *gamma, dipole_file.as_deref())
        }
        Command::Verify {
            inject_phase_sign_error,
        } => commands::cmd_verify(config, out, cli.seed, *inject_phase_sign_error),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
