//! Command-line front end: simulate trees, compute modes, analyze
//! trajectories, infer hierarchies and score them.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use vibratree_core::simulator::{DynamicsSolver, Integrator};
use vibratree_core::{Spectrum, Vec2, Window};

pub mod commands;
pub mod error;
pub mod manifest;
pub mod svg;

pub use error::{CliError, EXIT_INPUT, EXIT_NUMERIC, EXIT_OK};
pub use manifest::{read_manifest, RunManifest, MANIFEST_FILE};

/// Caps the worker pool when set.
pub const THREADS_ENV: &str = "VIBRATREE_THREADS";

#[derive(Debug, Parser)]
#[command(name = "vibratree", version, about = "Tree vibration simulation and hierarchy inference")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate a tree model and write node trajectories.
    Simulate(SimulateArgs),
    /// Natural frequencies and mode shapes of the linearized model.
    Modal(ModalArgs),
    /// Spectra, responses relative to a root node, and features.
    Analyze(AnalyzeArgs),
    /// Recover the branch hierarchy from motion and optional appearance.
    Infer(InferArgs),
    /// Parent accuracy and edit distance against ground truth.
    Eval(EvalArgs),
    /// Random stable tree with known hierarchy.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum WindowArg {
    None,
    Hann,
}

impl From<WindowArg> for Window {
    fn from(w: WindowArg) -> Self {
        match w {
            WindowArg::None => Window::None,
            WindowArg::Hann => Window::Hann,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum IntegratorArg {
    ExplicitEuler,
    SymplecticEuler,
}

impl From<IntegratorArg> for Integrator {
    fn from(i: IntegratorArg) -> Self {
        match i {
            IntegratorArg::ExplicitEuler => Integrator::ExplicitEuler,
            IntegratorArg::SymplecticEuler => Integrator::SymplecticEuler,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SolverArg {
    Assembled,
    Recursive,
}

impl From<SolverArg> for DynamicsSolver {
    fn from(s: SolverArg) -> Self {
        match s {
            SolverArg::Assembled => DynamicsSolver::Assembled,
            SolverArg::Recursive => DynamicsSolver::Recursive,
        }
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Model JSON; optional when the config embeds a model.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Simulation config JSON; flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub steps: Option<usize>,
    /// Output sample rate in Hz.
    #[arg(long)]
    pub rate: Option<f64>,
    /// Rescale energy every N steps; 0 disables.
    #[arg(long)]
    pub rescale_every: Option<usize>,
    #[arg(long, value_enum)]
    pub integrator: Option<IntegratorArg>,
    #[arg(long, value_enum)]
    pub solver: Option<SolverArg>,
    /// Anchor displacement JSON.
    #[arg(long)]
    pub forcing: Option<PathBuf>,
    /// Random initial deviations in [-A, A] drawn from the seed.
    #[arg(long)]
    pub amplitude: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ModalArgs {
    #[arg(long, required_unless_present = "config")]
    pub model: Option<PathBuf>,
    /// Simulation config with an embedded model.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Trajectory CSV with its metadata sidecar.
    #[arg(long)]
    pub traj: PathBuf,
    #[arg(long)]
    pub root: usize,
    /// Absolute regularization of the response division.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Regularization relative to the root's peak amplitude.
    #[arg(long, default_value_t = 1e-3)]
    pub epsilon_relative: f64,
    #[arg(long, value_enum, default_value = "none")]
    pub window: WindowArg,
    #[arg(long, default_value_t = 5)]
    pub envelope_order: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("motion").required(true).args(["traj", "spectra"]))]
pub struct InferArgs {
    #[arg(long)]
    pub traj: Option<PathBuf>,
    /// `spectra.json` written by `analyze`.
    #[arg(long)]
    pub spectra: Option<PathBuf>,
    /// Precomputed connectivity graph JSON.
    #[arg(long, conflicts_with_all = ["contour", "keypoints"])]
    pub graph: Option<PathBuf>,
    /// Contour map (PGM); needs `--keypoints`.
    #[arg(long, requires = "keypoints")]
    pub contour: Option<PathBuf>,
    /// Keypoints CSV `id,x,y`; also supplies node positions.
    #[arg(long, requires = "contour")]
    pub keypoints: Option<PathBuf>,
    /// Node positions CSV `id,x,y` used for subroot selection.
    #[arg(long)]
    pub positions: Option<PathBuf>,
    /// Inference parameters JSON.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub root: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub restarts: Option<usize>,
    #[arg(long, value_enum)]
    pub window: Option<WindowArg>,
    /// Ignore motion: both residual scales become infinite.
    #[arg(long)]
    pub appearance_only: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Predicted parents: a JSON array or an object with a `parent` array.
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub gt: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 3)]
    pub levels: usize,
    #[arg(long, default_value_t = 2)]
    pub branching: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 4.0)]
    pub stiffness_spread: f64,
    #[arg(long)]
    pub max_nodes: Option<usize>,
    #[arg(long, default_value_t = 9.81)]
    pub gravity: f64,
    /// Extra edges between crossing branches in the emitted graph.
    #[arg(long, default_value_t = 0)]
    pub spurious_edges: usize,
    #[arg(long)]
    pub out: PathBuf,
}

/// Raw spectra handed from `analyze` to `infer`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectraFile {
    pub sample_rate_hz: f64,
    pub window: Window,
    pub spectra: Vec<Spectrum>,
    pub zero_motion: Vec<bool>,
    /// Static node positions; empty when unknown.
    #[serde(default)]
    pub positions: Vec<Vec2>,
}

/// What a successful command leaves behind.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub manifest: RunManifest,
    /// Text for standard output.
    pub stdout: String,
}

/// Runs one command line (without the program name).
pub fn run(args: &[String]) -> Result<Outcome, CliError> {
    let argv = std::iter::once("vibratree".to_string()).chain(args.iter().cloned());
    let cli = Cli::try_parse_from(argv).map_err(|e| CliError::Usage(e.to_string()))?;
    commands::dispatch(cli.command, args)
}

/// Sizes the global worker pool from the environment, once per process.
pub fn configure_threads() {
    if let Some(n) = std::env::var(THREADS_ENV).ok().and_then(|v| v.trim().parse::<usize>().ok()) {
        // A pool built earlier in the process wins.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
}

/// Full process behaviour: parse, run, report; returns the exit code.
pub fn main_with_args(args: Vec<String>) -> i32 {
    configure_threads();
    let argv = std::iter::once("vibratree".to_string()).chain(args.iter().cloned());
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) if matches!(e.kind(), clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion) => {
            print!("{e}");
            return EXIT_OK;
        }
        Err(e) => {
            eprintln!("{}", CliError::Usage(e.to_string()).to_json());
            return EXIT_INPUT;
        }
    };
    match commands::dispatch(cli.command, &args) {
        Ok(outcome) => {
            print!("{}", outcome.stdout);
            EXIT_OK
        }
        Err(e) => {
            eprintln!("{}", e.to_json());
            e.classify().1
        }
    }
}
