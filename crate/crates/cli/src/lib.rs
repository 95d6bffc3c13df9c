//! The `ebp` command-line tool: simulate voxels, fit them with EBP or a
//! baseline, evaluate fits and run seeded benchmark batches.
//!
//! Every output file is accompanied by a [`RunManifest`] at
//! `<output>.manifest.json` (or `manifest.json` inside a bench directory).

mod bench;
mod commands;
mod manifest;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ebp_core::methods::{EbpStopping, Method, MethodConfig};
use ebp_core::simulate::SimulationConfig;
use ebp_core::RadialMode;
use serde::Serialize;

pub use bench::{run_trials, write_bench_csv, BenchReport, TrialMetrics, TrialRecord, BENCH_HEADER};
pub use commands::{cmd_directions, cmd_evaluate, cmd_fit, cmd_simulate};
pub use manifest::{manifest_path, RunManifest};

pub type CliResult<T> = Result<T, Box<dyn std::error::Error + Send + Sync>>;

/// Largest tolerated fraction of failed bench rows.
pub const MAX_FAILURE_FRACTION: f64 = 0.1;

#[derive(Debug, Parser, Serialize)]
#[command(name = "ebp", version, about = "Elastic basis pursuit for diffusion MRI voxels")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    /// Generate a simulated voxel dataset.
    Simulate(SimulateArgs),
    /// Fit a dataset's training directions with one method.
    Fit(FitArgs),
    /// Score a model file against a dataset.
    Evaluate(EvaluateArgs),
    /// Seeded batch of simulations fitted by several methods.
    Bench(BenchArgs),
    /// Electrostatic-repulsion direction set.
    Directions(DirectionsArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate(_) => "simulate",
            Command::Fit(_) => "fit",
            Command::Evaluate(_) => "evaluate",
            Command::Bench(_) => "bench",
            Command::Directions(_) => "directions",
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SimArgs {
    #[arg(long, default_value_t = 3)]
    pub fascicles: usize,
    /// Number of measurement directions.
    #[arg(long, default_value_t = 150)]
    pub directions: usize,
    /// b-value, s/mm^2.
    #[arg(long, default_value_t = 1000.0)]
    pub b: f64,
    /// Variance of each Gaussian component of the Rician noise.
    #[arg(long, default_value_t = 0.005)]
    pub sigma2: f64,
    /// Weight of a free-water compartment (diffusivity 3 um^2/ms).
    #[arg(long, default_value_t = 0.0)]
    pub isotropic_weight: f64,
    /// Seed of the measurement direction set.
    #[arg(long, default_value_t = 0)]
    pub directions_seed: u64,
}

impl SimArgs {
    pub fn config(&self, seed: u64) -> SimulationConfig {
        SimulationConfig {
            n_directions: self.directions,
            b_value: self.b,
            n_fascicles: self.fascicles,
            noise_sigma2: self.sigma2,
            isotropic_weight: self.isotropic_weight,
            directions_seed: self.directions_seed,
            seed,
            ..SimulationConfig::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StoppingArg {
    /// Iteration count chosen by k-fold validation of the training set.
    Cv,
    /// Run to convergence or --max-iters.
    Fixed,
    /// Early stopping on every k-th training direction.
    Holdout,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RadialArg {
    Zero,
    Free,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct MethodArgs {
    /// Weight of the volume penalty lambda (c - ||w||_1)^2.
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
    /// Fixed volume target; omit to cross-validate it.
    #[arg(long, conflicts_with = "cv_c")]
    pub c: Option<f64>,
    /// Cross-validate c over a log grid of 8 values in [0.1, 10] (the
    /// default when --c is absent).
    #[arg(long)]
    pub cv_c: bool,
    /// Folds for c and for the EBP iteration count.
    #[arg(long, default_value_t = 5)]
    pub cv_folds: usize,
    /// Oracle random restarts.
    #[arg(long, default_value_t = 10)]
    pub restarts: usize,
    /// Geodesic frequency of the NNLS grid; polar cells of the CBP grid.
    #[arg(long, default_value_t = 6)]
    pub grid_size: usize,
    #[arg(long, default_value_t = 50)]
    pub max_iters: usize,
    #[arg(long, value_enum, default_value_t = StoppingArg::Cv)]
    pub stopping: StoppingArg,
    /// Stride of the held-out directions for --stopping holdout.
    #[arg(long, default_value_t = 5)]
    pub holdout_every: usize,
    /// Radial diffusivity of EBP kernels.
    #[arg(long, value_enum, default_value_t = RadialArg::Zero)]
    pub radial: RadialArg,
    /// Size of the EBP initialization dictionary (0: start empty).
    #[arg(long, default_value_t = 30)]
    pub init_directions: usize,
    /// Record wall-clock times (makes outputs non-reproducible).
    #[arg(long)]
    pub timing: bool,
}

impl MethodArgs {
    pub fn config(&self, seed: u64) -> MethodConfig {
        MethodConfig {
            lambda: self.lambda,
            c: self.c,
            cv_folds: self.cv_folds,
            restarts: self.restarts,
            grid_size: self.grid_size,
            max_iterations: self.max_iters,
            stopping: match self.stopping {
                StoppingArg::Cv => EbpStopping::CrossValidated { folds: self.cv_folds },
                StoppingArg::Fixed => EbpStopping::Fixed,
                StoppingArg::Holdout => EbpStopping::Holdout {
                    every: self.holdout_every,
                },
            },
            radial: match self.radial {
                RadialArg::Zero => RadialMode::Zero,
                RadialArg::Free => RadialMode::Free,
            },
            init_directions: self.init_directions,
            seed,
            timing: self.timing,
            ..MethodConfig::default()
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub sim: SimArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Dataset JSON path.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FitArgs {
    #[arg(long)]
    pub method: Method,
    /// Dataset JSON path.
    #[arg(long)]
    pub input: PathBuf,
    /// Model JSON path.
    #[arg(long)]
    pub out: PathBuf,
    /// Trace CSV path for EBP; defaults to `<out>.trace.csv`.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub method_args: MethodArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricsFormat {
    Json,
    Csv,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub dataset: PathBuf,
    /// Output path; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = MetricsFormat::Json)]
    pub format: MetricsFormat,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct BenchArgs {
    #[arg(long, default_value_t = 100)]
    pub trials: u64,
    #[arg(long, value_delimiter = ',', default_value = "ebp,nnls,dti")]
    pub methods: Vec<Method>,
    /// Trial `t` uses seed `seed + t` for the voxel and the fit.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Worker threads; results do not depend on it.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// Also write each trial's dataset to `<out-dir>/trials/`.
    #[arg(long)]
    pub save_trials: bool,
    #[command(flatten)]
    pub sim: SimArgs,
    #[command(flatten)]
    pub method_args: MethodArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DirectionsArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// CSV path (x,y,z).
    #[arg(long)]
    pub out: PathBuf,
}

/// How a successful run ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success,
    /// Some bench rows failed, more than [`MAX_FAILURE_FRACTION`] of them.
    TooManyFailures,
}

/// Runs a parsed command line. `argv` is recorded in the manifest.
pub fn run(cli: &Cli, argv: &[String]) -> CliResult<Outcome> {
    let mut manifest = RunManifest::start(&cli.command, argv);
    let outcome = match &cli.command {
        Command::Simulate(a) => cmd_simulate(a, &mut manifest).map(|_| Outcome::Success),
        Command::Fit(a) => cmd_fit(a, &mut manifest).map(|_| Outcome::Success),
        Command::Evaluate(a) => cmd_evaluate(a, &mut manifest).map(|_| Outcome::Success),
        Command::Bench(a) => bench::cmd_bench(a, &mut manifest),
        Command::Directions(a) => cmd_directions(a, &mut manifest).map(|_| Outcome::Success),
    }?;
    Ok(outcome)
}
