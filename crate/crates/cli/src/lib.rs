//! Command-line front end: argument types, error mapping and dispatch.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use simshap::ShapError;
use thiserror::Error;

pub mod commands;
pub mod ingest;
pub mod plot;
pub mod setup;

/// Version of the JSON report layout.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error, PartialEq)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    /// 2 for bad input, 3 for numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl From<ShapError> for CliError {
    fn from(err: ShapError) -> Self {
        if err.is_numerical() {
            CliError::Numerical(err.to_string())
        } else {
            CliError::Input(err.to_string())
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> Self {
        CliError::Input(err.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(err: csv::Error) -> Self {
        CliError::Input(err.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "simshap", version, about = "Shapley-value explanations for tabular models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Explain one test-split instance, or a tabulated game.
    ExplainLocal(ExplainArgs),
    /// Explain the model's loss or output averaged over a reference set.
    ExplainGlobal(ExplainArgs),
    /// Brute-force Shapley values (at most 20 features).
    Exact(ExactArgs),
    /// Mean bias and time of each method at fixed evaluation budgets.
    Bench(BenchArgs),
    /// Convergence-rate fit on a deterministic run, or a bias-vs-lambda sweep.
    RateStudy(RateArgs),
    /// Reshape a trace or table into long (series, x, y) rows.
    PlotData(PlotArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GameKindArg {
    Loss,
    Prediction,
    Table,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LossArg {
    Mse,
    Ce,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    Linear,
    Logistic,
    File,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EstimatorArg {
    Sim,
    StableSim,
    #[value(name = "kernelshap")]
    KernelShap,
    Exact,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReferenceArg {
    Exact,
    #[value(name = "kernelshap")]
    KernelShap,
}

#[derive(Debug, Clone, Args)]
pub struct GameArgs {
    /// CSV with a header row, or a tabulated game file with `--game table`.
    #[arg(long)]
    pub data: PathBuf,
    /// Name of the label column in the CSV.
    #[arg(long = "label-col")]
    pub label_col: Option<String>,
    #[arg(long, value_enum, default_value = "loss")]
    pub game: GameKindArg,
    #[arg(long, value_enum, default_value = "mse")]
    pub loss: LossArg,
    #[arg(long, value_enum, default_value = "linear")]
    pub model: ModelArg,
    /// Model JSON for `--model file`.
    #[arg(long = "model-path")]
    pub model_path: Option<PathBuf>,
    /// Write the fitted model as JSON.
    #[arg(long = "save-model")]
    pub save_model: Option<PathBuf>,
    /// L2 penalty when fitting the built-in models.
    #[arg(long, default_value_t = 1e-6)]
    pub ridge: f64,
    /// Explain the probability of this class (prediction game, logistic model).
    #[arg(long = "target-class")]
    pub target_class: Option<u8>,
    /// Background rows for imputation, drawn from the training split (default 5% of rows).
    #[arg(long = "background-size")]
    pub background_size: Option<usize>,
    /// Reference rows for global explanations, drawn from the test split (default all).
    #[arg(long = "reference-size")]
    pub reference_size: Option<usize>,
    /// Position within the test split of the instance to explain.
    #[arg(long = "instance-index", default_value_t = 0)]
    pub instance_index: usize,
}

#[derive(Debug, Clone, Args)]
pub struct EstimatorArgs {
    #[arg(long, value_enum, default_value = "sim")]
    pub estimator: EstimatorArg,
    /// Momentum (default 0.5 local, 0.55 global).
    #[arg(long)]
    pub t: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Coalitions per iteration (default 10·d).
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub xi: Option<f64>,
    /// Iteration cap.
    #[arg(long = "T")]
    pub max_iter: Option<usize>,
    /// Reference mini-batch size for global games.
    #[arg(long = "batch-B")]
    pub batch_b: Option<usize>,
    /// Draw coalitions in complementary pairs.
    #[arg(long)]
    pub paired: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// KernelSHAP: one solve on `m` coalitions instead of restarting until converged.
    #[arg(long = "single-shot")]
    pub single_shot: bool,
    /// Evaluate coalitions on the calling thread only.
    #[arg(long)]
    pub sequential: bool,
}

#[derive(Debug, Clone, Args)]
pub struct ExplainArgs {
    #[command(flatten)]
    pub game: GameArgs,
    #[command(flatten)]
    pub estimator: EstimatorArgs,
    /// Report path (stdout when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Per-iteration trace CSV.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Also compute this estimator and report bias and consistency against it.
    #[arg(long = "reference-estimator", value_enum)]
    pub reference_estimator: Option<ReferenceArg>,
}

#[derive(Debug, Clone, Args)]
pub struct ExactArgs {
    #[command(flatten)]
    pub game: GameArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub sequential: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub game: GameArgs,
    #[command(flatten)]
    pub estimator: EstimatorArgs,
    /// Total game evaluations per run, comma separated.
    #[arg(long = "budget-grid", value_delimiter = ',', required = true)]
    pub budget_grid: Vec<u64>,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "sim,kernelshap")]
    pub methods: Vec<EstimatorArg>,
    #[arg(long, default_value_t = 100)]
    pub reps: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct RateArgs {
    #[command(flatten)]
    pub game: GameArgs,
    #[command(flatten)]
    pub estimator: EstimatorArgs,
    /// Iterations skipped before the log-linear fit.
    #[arg(long = "burn-in", default_value_t = 1)]
    pub burn_in: usize,
    /// Sweep these ridge values over stochastic runs instead of fitting a rate.
    #[arg(long = "lambda-grid", value_delimiter = ',')]
    pub lambda_grid: Vec<f64>,
    /// Seeds per lambda in a sweep.
    #[arg(long, default_value_t = 20)]
    pub reps: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct PlotArgs {
    /// Trace CSV, bench CSV or lambda-sweep CSV.
    #[arg(long)]
    pub input: PathBuf,
    /// JSON report whose attributions are the reference for trace errors
    /// (default: the trace's last iterate).
    #[arg(long)]
    pub reference: Option<PathBuf>,
    /// Series label for trace input (default: the file stem).
    #[arg(long)]
    pub series: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::ExplainLocal(args) => commands::explain(&args, false),
        Command::ExplainGlobal(args) => commands::explain(&args, true),
        Command::Exact(args) => commands::exact(&args),
        Command::Bench(args) => commands::bench(&args),
        Command::RateStudy(args) => commands::rate_study(&args),
        Command::PlotData(args) => plot::plot_data(&args),
    }
}
