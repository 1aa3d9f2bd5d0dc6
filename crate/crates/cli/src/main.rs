//! `camel` command-line front end.
//!
//! Exit codes: 0 success, 2 bad input or dimension mismatch, 3 numerical
//! divergence, 4 a fit did not converge (outputs are still written and
//! flagged with a `# warning` header line or a `warning` field).

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Seed used when `--seed` is not given.
pub const DEFAULT_SEED: u64 = 42;

#[derive(Parser, Debug)]
#[command(name = "camel", version, about = "Multi-label learning with label correlations")]
pub struct Cli {
    /// Worker threads for folds, grid points and correlation columns
    /// (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    pub jobs: usize,

    /// Format of summary files: plain text or JSON.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    pub format: Format,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Structured,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Learn the label correlation matrix S and the collaboration matrix G.
    Corr(CorrArgs),
    /// Train a model; writes model.camel and convergence.tsv.
    Train(TrainArgs),
    /// Score new instances; writes scores.txt and predictions.txt.
    Predict(PredictArgs),
    /// Compute the seven metrics from truth, scores and predictions.
    Eval(EvalArgs),
    /// Cross-validate, tuning (alpha, lambda2) per outer fold unless both are fixed.
    Cv(CvArgs),
    /// Print the size and label cardinality of a dataset.
    Describe(DataArgs),
    /// Write a seeded synthetic dataset.
    Synth(SynthArgs),
}

#[derive(Args, Debug, Clone)]
pub struct DataArgs {
    /// Feature file: one instance per line, comma or whitespace separated.
    #[arg(long)]
    pub features: PathBuf,
    /// Label file: one instance per line, entries in {1, -1, 0}.
    #[arg(long)]
    pub labels: PathBuf,
}

#[derive(Args, Debug, Clone)]
pub struct CorrelationArgs {
    /// ADMM penalty parameter.
    #[arg(long, default_value_t = 1.0)]
    pub rho: f64,
    #[arg(long, default_value_t = 1e-8)]
    pub admm_tol_abs: f64,
    #[arg(long, default_value_t = 1e-8)]
    pub admm_tol_rel: f64,
    #[arg(long, default_value_t = 1000)]
    pub admm_max_iter: usize,
    /// Fixed sparsity weight for every label; overrides --corr-lambda-scale.
    #[arg(long)]
    pub corr_lambda: Option<f64>,
    /// Multiplier on the per-label heuristic max|y_j' Y_-j| / 100.
    #[arg(long, default_value_t = 1.0)]
    pub corr_lambda_scale: f64,
}

#[derive(Args, Debug, Clone)]
pub struct FitArgs {
    /// Weight of the embedding-consistency term.
    #[arg(long, default_value_t = 1.0)]
    pub lambda1: f64,
    #[arg(long, default_value_t = 1e-6)]
    pub outer_tol: f64,
    #[arg(long, default_value_t = 50)]
    pub max_outer_iter: usize,
    #[command(flatten)]
    pub correlation: CorrelationArgs,
}

#[derive(Args, Debug)]
pub struct CorrArgs {
    #[arg(long)]
    pub labels: PathBuf,
    /// Blend weight used to build G from S.
    #[arg(long, default_value_t = 0.5)]
    pub alpha: f64,
    #[command(flatten)]
    pub correlation: CorrelationArgs,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value_t = 0.5)]
    pub alpha: f64,
    /// Ridge weight of the kernel model.
    #[arg(long, default_value_t = 0.1)]
    pub lambda2: f64,
    #[command(flatten)]
    pub fit: FitArgs,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Args, Debug)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long)]
    pub truth: PathBuf,
    #[arg(long)]
    pub scores: PathBuf,
    /// ±1 predictions; defaults to the sign of the scores (0 counts as -1).
    #[arg(long)]
    pub predictions: Option<PathBuf>,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Args, Debug)]
pub struct CvArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Outer folds.
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    /// Inner folds of the grid search.
    #[arg(long, default_value_t = 5)]
    pub inner_k: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Fix alpha instead of searching over --alphas.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Fix lambda2 instead of searching over --lambda2s.
    #[arg(long)]
    pub lambda2: Option<f64>,
    /// Alpha grid, comma separated [default: 0,0.1,...,1].
    #[arg(long, value_delimiter = ',')]
    pub alphas: Option<Vec<f64>>,
    /// Lambda2 grid, comma separated [default: 0.001,0.002,0.01,0.02,0.1,0.2,1].
    #[arg(long, value_delimiter = ',')]
    pub lambda2s: Option<Vec<f64>>,
    /// Metric maximized (or minimized, for losses) by the grid search.
    #[arg(long, default_value = "average_precision")]
    pub metric: String,
    #[command(flatten)]
    pub fit: FitArgs,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 200)]
    pub n: usize,
    #[arg(long, default_value_t = 10)]
    pub d: usize,
    #[arg(long, default_value_t = 8)]
    pub q: usize,
    #[arg(long, default_value_t = 3)]
    pub latent: usize,
    #[arg(long, default_value_t = 0.1)]
    pub noise: f64,
    #[arg(long, default_value_t = 0.4)]
    pub threshold: f64,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long)]
    pub output: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.jobs).build() {
        Ok(pool) => pool,
        Err(e) => {
            eprintln!("camel: input error: cannot start {} worker threads: {e}", cli.jobs);
            return ExitCode::from(2);
        }
    };
    match pool.install(|| commands::run(&cli)) {
        Ok(commands::Outcome::Done) => ExitCode::SUCCESS,
        Ok(commands::Outcome::NotConverged(msg)) => {
            eprintln!("camel: warning: {msg}");
            ExitCode::from(4)
        }
        Err(e) => {
            let (code, class) = match e.class() {
                camel::ErrorClass::Input => (2, "input error"),
                camel::ErrorClass::DimensionMismatch => (2, "dimension mismatch"),
                camel::ErrorClass::Divergence => (3, "numerical divergence"),
            };
            eprintln!("camel: {class}: {e}");
            ExitCode::from(code)
        }
    }
}
