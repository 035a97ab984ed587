//! `funspace`: command-line front end for the function-space experiments.
//!
//! Exit codes: 0 success, 1 usage error, 2 numerical or I/O failure.

mod commands;
mod ensemble;
mod output;

use std::fmt;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use funspace_core::Error;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Numeric(String),
    Io(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Numeric(m) => write!(f, "numerical failure: {m}"),
            CliError::Io(m) => write!(f, "i/o failure: {m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match e {
            Error::InvalidArgument(_) | Error::ArityOutOfRange { .. } | Error::ArityMismatch { .. } | Error::Unsupported(_) | Error::Parse(_) => {
                CliError::Usage(msg)
            }
            Error::Io(_) | Error::Json(_) | Error::Csv(_) => CliError::Io(msg),
            _ => CliError::Numeric(msg),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            _ => 2,
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "funspace", version, about = "Function distributions of random deep networks and random Boolean circuits")]
pub struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Report entropies on stdout in bits instead of nats (files stay in nats).
    #[arg(long, global = true)]
    pub bits: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Tabulate the overlap map q -> q' of a kernel.
    KernelScan(KernelScanArgs),
    /// Output-function entropy versus depth, or versus sigma_b at the fixed point.
    EntropyCurve(EntropyCurveArgs),
    /// Layer-by-layer function distribution of random circuits.
    CircuitEvolve(CircuitEvolveArgs),
    /// Magnetization trajectory of a gate, or its map m -> m'.
    Magnetization(MagnetizationArgs),
    /// Finite-width simulations.
    #[command(subcommand)]
    Simulate(SimulateCommand),
    /// Check closed forms against dense algebra and quadrature.
    Selfcheck(SelfcheckArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum MachineKind {
    Dnn,
    Circuit,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum EstimatorArg {
    PlugIn,
    MillerMadow,
}

#[derive(Args, Debug)]
pub struct KernelArgs {
    /// sign or relu
    #[arg(long, default_value = "sign")]
    pub activation: String,
    /// Weight standard deviation; for relu it defaults to sqrt(2 - sigma_b^2).
    #[arg(long)]
    pub sigma_w: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    pub sigma_b: f64,
}

#[derive(Args, Debug)]
pub struct KernelScanArgs {
    #[command(flatten)]
    pub kernel: KernelArgs,
    /// Grid points on [-1, 1].
    #[arg(long, default_value_t = 201)]
    pub points: usize,
    /// Also locate the stable fixed point and report it.
    #[arg(long)]
    pub fixed_point: bool,
    /// Fixed points over a sigma_b grid `lo:hi:count`, written to --fixed-point-out.
    #[arg(long, requires = "fixed_point_out")]
    pub fixed_point_scan: Option<String>,
    #[arg(long, requires = "fixed_point_scan")]
    pub fixed_point_out: Option<std::path::PathBuf>,
    /// Overlap trajectory for layers 0..=depth, written to --overlaps-out.
    #[arg(long, requires = "overlaps_out")]
    pub depth: Option<usize>,
    #[arg(long, requires = "depth")]
    pub overlaps_out: Option<std::path::PathBuf>,
    #[arg(long, default_value = "biased")]
    pub scheme: String,
    #[arg(long, default_value_t = 2)]
    pub n: usize,
    #[arg(long)]
    pub out: std::path::PathBuf,
}

#[derive(Args, Debug)]
pub struct EntropyCurveArgs {
    #[arg(long, value_enum, default_value_t = MachineKind::Dnn)]
    pub machine: MachineKind,
    #[command(flatten)]
    pub kernel: KernelArgs,
    /// Gate for circuits.
    #[arg(long, default_value = "MAJ3")]
    pub gate: String,
    #[arg(long, default_value_t = 0.0)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 0.0)]
    pub p_negate: f64,
    /// Drop circuit distribution entries below this probability.
    #[arg(long, default_value_t = 0.0)]
    pub prune: f64,
    /// Input scheme; defaults to biased for networks and balanced for circuits.
    #[arg(long)]
    pub scheme: Option<String>,
    #[arg(long, default_value_t = 2)]
    pub n: usize,
    #[arg(long, default_value_t = 20)]
    pub l_max: usize,
    /// Monte Carlo orthant samples per point (networks only).
    #[arg(long, default_value_t = 1_000_000)]
    pub samples: u64,
    #[arg(long, value_enum, default_value_t = EstimatorArg::PlugIn)]
    pub estimator: EstimatorArg,
    /// Sign networks at the fixed point over a sigma_b grid `lo:hi:count`.
    #[arg(long)]
    pub sigma_b_scan: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: std::path::PathBuf,
}

#[derive(Args, Debug)]
pub struct CircuitEvolveArgs {
    #[arg(long, default_value = "MAJ3")]
    pub gate: String,
    #[arg(long, default_value_t = 2)]
    pub n: usize,
    #[arg(long, default_value = "balanced")]
    pub scheme: String,
    #[arg(long, default_value_t = 20)]
    pub depth: usize,
    #[arg(long, default_value_t = 0.0)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 0.0)]
    pub p_negate: f64,
    #[arg(long, default_value_t = 0.0)]
    pub prune: f64,
    /// Also write the trajectory as JSON.
    #[arg(long)]
    pub json: Option<std::path::PathBuf>,
    #[arg(long)]
    pub out: std::path::PathBuf,
}

#[derive(Args, Debug)]
pub struct MagnetizationArgs {
    #[arg(long, default_value = "MAJ3")]
    pub gate: String,
    #[arg(long, default_value_t = 2)]
    pub n: usize,
    #[arg(long, default_value = "balanced")]
    pub scheme: String,
    #[arg(long, default_value_t = 1000)]
    pub max_iterations: usize,
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
    /// Also write the map m -> m' on this many grid points to --map-out.
    #[arg(long, requires = "map_out")]
    pub map_points: Option<usize>,
    #[arg(long, requires = "map_points")]
    pub map_out: Option<std::path::PathBuf>,
    #[arg(long)]
    pub out: std::path::PathBuf,
}

/// Ensemble description. `--config` loads a JSON `EnsembleConfig`; flags
/// override individual fields.
#[derive(Args, Debug, Default)]
pub struct EnsembleArgs {
    #[arg(long)]
    pub config: Option<std::path::PathBuf>,
    #[arg(long, value_enum)]
    pub machine: Option<MachineKind>,
    #[arg(long)]
    pub activation: Option<String>,
    #[arg(long)]
    pub sigma_w: Option<f64>,
    #[arg(long)]
    pub sigma_b: Option<f64>,
    #[arg(long)]
    pub gate: Option<String>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub p_negate: Option<f64>,
    #[arg(long)]
    pub width: Option<usize>,
    #[arg(long)]
    pub depth: Option<usize>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub scheme: Option<String>,
    /// layer_dependent or recurrent
    #[arg(long)]
    pub architecture: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args, Debug)]
pub struct SamplingArgs {
    #[arg(long, default_value_t = 100_000)]
    pub realizations: u64,
    /// one_node or all_nodes
    #[arg(long, default_value = "one_node")]
    pub policy: String,
    /// lazy or dense
    #[arg(long, default_value = "lazy")]
    pub backend: String,
}

#[derive(Subcommand, Debug)]
pub enum SimulateCommand {
    /// Empirical layer-L function distribution (JSON).
    Estimate {
        #[command(flatten)]
        ensemble: EnsembleArgs,
        #[command(flatten)]
        sampling: SamplingArgs,
        /// Mean-field samples for the KL/TV comparison; 0 skips it.
        #[arg(long, default_value_t = 1_000_000)]
        theory_samples: u64,
        /// Comma-separated widths for a KL-versus-width table (--sweep-out).
        #[arg(long, value_delimiter = ',', requires = "sweep_out")]
        widths: Vec<usize>,
        #[arg(long, requires = "widths")]
        sweep_out: Option<std::path::PathBuf>,
        #[arg(long)]
        out: std::path::PathBuf,
    },
    /// Per-realization spin overlaps across layers (CSV, sign networks).
    Overlaps {
        #[command(flatten)]
        ensemble: EnsembleArgs,
        #[arg(long, default_value_t = 1000)]
        realizations: u64,
        #[arg(long)]
        out: std::path::PathBuf,
    },
    /// Layer-dependent versus recurrent architecture report (JSON).
    Compare {
        #[command(flatten)]
        ensemble: EnsembleArgs,
        #[command(flatten)]
        sampling: SamplingArgs,
        #[arg(long, default_value_t = 1_000_000)]
        theory_samples: u64,
        #[arg(long, default_value_t = 1000)]
        bootstrap: usize,
        #[arg(long, default_value_t = 1000)]
        null_draws: usize,
        #[arg(long)]
        out: std::path::PathBuf,
    },
}

#[derive(Args, Debug)]
pub struct SelfcheckArgs {
    /// kappa values for the anti-diagonal identities (default: -0.9..0.9).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub kappa: Vec<f64>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand) {
                let _ = e.print();
                return if e.kind() == ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand { ExitCode::from(1) } else { ExitCode::SUCCESS };
            }
            let text = e.render().to_string();
            eprintln!("{}", text.lines().next().unwrap_or("usage error"));
            return ExitCode::from(1);
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}
