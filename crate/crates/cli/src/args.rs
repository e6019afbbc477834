use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use phasecal::{Algorithm, ScenarioKind};

#[derive(Parser, Debug)]
#[command(name = "phasecal", version, about = "Geometry-based phase and sampling-time offset calibration")]
pub struct Cli {
    /// Worker threads for per-subcarrier and per-trial work. Results do not
    /// depend on this value.
    #[arg(long, global = true, env = "PHASECAL_THREADS")]
    pub parallel: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Synthesize a measurement bundle with embedded ground truth.
    Generate(GenerateArgs),
    /// Estimate per-antenna offsets from a bundle and write a calibration record.
    Calibrate(CalibrateArgs),
    /// Remove estimated impairments from a bundle.
    Apply(ApplyArgs),
    /// Compare gain estimates with a reference and report subarray agreement.
    Evaluate(EvaluateArgs),
    /// Monte-Carlo comparison of both estimators over an SNR grid.
    Sweep(SweepArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum AlgorithmArg {
    Iterative,
    Eigenvector,
}

impl From<AlgorithmArg> for Algorithm {
    fn from(a: AlgorithmArg) -> Self {
        match a {
            AlgorithmArg::Iterative => Algorithm::CoordinateDescent,
            AlgorithmArg::Eigenvector => Algorithm::Eigenvector,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ScenarioArg {
    #[value(name = "grid-4x8")]
    Grid4x8,
    #[value(name = "distributed-4x-2x4")]
    Distributed4x2x4,
}

impl From<ScenarioArg> for ScenarioKind {
    fn from(s: ScenarioArg) -> Self {
        match s {
            ScenarioArg::Grid4x8 => ScenarioKind::Grid4x8,
            ScenarioArg::Distributed4x2x4 => ScenarioKind::Distributed4x2x4,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ApplyMode {
    /// Divide by the stored per-subcarrier gains.
    PerSubcarrier,
    /// Remove the fitted phase and time offsets.
    Parametric,
}

#[derive(Args, Debug)]
pub struct SolverArgs {
    /// Iteration cap of the iterative estimator.
    #[arg(long, default_value_t = 40)]
    pub max_iterations: usize,
    /// Relative residual decrease below which the iterative estimator stops.
    #[arg(long, default_value_t = 1e-10)]
    pub tolerance: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug)]
pub struct GenerateArgs {
    /// Built-in deployment.
    #[arg(long, value_enum, conflicts_with = "antennas", required_unless_present = "antennas")]
    pub scenario: Option<ScenarioArg>,
    /// Antenna positions, one `index, x, y, z` line per antenna.
    #[arg(long, requires = "positions")]
    pub antennas: Option<PathBuf>,
    /// Transmitter positions, one `index, x, y, z` line per time instance.
    #[arg(long, requires = "antennas")]
    pub positions: Option<PathBuf>,
    /// Transmitter positions drawn for a built-in scenario.
    #[arg(long, default_value_t = 256)]
    pub num_positions: usize,
    #[arg(long, default_value_t = 64)]
    pub num_subcarriers: usize,
    /// Band center for imported geometry, Hz.
    #[arg(long, default_value_t = phasecal::scenario::DEFAULT_CENTER_FREQ_HZ)]
    pub center_frequency: f64,
    /// Occupied bandwidth for imported geometry, Hz.
    #[arg(long, default_value_t = phasecal::scenario::DEFAULT_BANDWIDTH_HZ)]
    pub bandwidth: f64,
    /// Per-element SNR in dB; noiseless when omitted.
    #[arg(long, allow_hyphen_values = true)]
    pub snr: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also store the ideal coefficient tensor.
    #[arg(long)]
    pub with_ideal: bool,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Args, Debug)]
pub struct CalibrateArgs {
    #[arg(short, long)]
    pub input: PathBuf,
    #[arg(short, long)]
    pub output: PathBuf,
    #[arg(long, value_enum, default_value = "iterative")]
    pub algorithm: AlgorithmArg,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Do not store per-subcarrier gains in the record.
    #[arg(long)]
    pub no_gains: bool,
    /// Compare recovered offsets with the bundle's ground truth.
    #[arg(long)]
    pub check_truth: bool,
}

#[derive(Args, Debug)]
pub struct ApplyArgs {
    #[arg(short, long)]
    pub input: PathBuf,
    #[arg(short, long)]
    pub calibration: PathBuf,
    #[arg(short, long)]
    pub output: PathBuf,
    #[arg(long, value_enum, default_value = "per-subcarrier")]
    pub mode: ApplyMode,
    /// Apply even if the record was estimated from a different bundle.
    #[arg(long)]
    pub force: bool,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    #[arg(short, long)]
    pub input: PathBuf,
    /// Gains to evaluate; estimated from the bundle when omitted.
    #[arg(short, long)]
    pub calibration: Option<PathBuf>,
    /// Reference gains; the bundle's ground truth when omitted.
    #[arg(long)]
    pub reference: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "iterative")]
    pub algorithm: AlgorithmArg,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Two subarray labels, e.g. `B,C`, for the starting-phase agreement.
    #[arg(long, value_delimiter = ',')]
    pub subarrays: Option<Vec<String>>,
    /// Subcarrier for the agreement series.
    #[arg(long, default_value_t = 0)]
    pub subcarrier: usize,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    /// Bundle with ground truth; a built-in scenario is used when omitted.
    #[arg(short, long, conflicts_with = "scenario")]
    pub input: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "distributed-4x-2x4")]
    pub scenario: ScenarioArg,
    #[arg(long, default_value_t = 256)]
    pub num_positions: usize,
    #[arg(long, default_value_t = 64)]
    pub num_subcarriers: usize,
    /// Subcarrier to sweep; the middle one when omitted.
    #[arg(long)]
    pub subcarrier: Option<usize>,
    /// `start:step:stop` in dB (inclusive) or a comma-separated list.
    #[arg(long, allow_hyphen_values = true, default_value = "-12:1:5")]
    pub snr: String,
    #[arg(long, default_value_t = 200)]
    pub realizations: usize,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Table destination; stdout when omitted.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}
