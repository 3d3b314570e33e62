mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ssc_core::SscError;

#[derive(Parser, Debug)]
#[command(name = "ssc", version, about = "Sparse subspace clustering")]
struct Cli {
    /// Worker threads for parallel sections (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic union-of-subspaces dataset.
    Gen(GenArgs),
    /// Compute the sparse self-expressive coefficients of a dataset.
    Solve(SolveArgs),
    /// Segment a coefficient matrix spectrally.
    Cluster(ClusterArgs),
    /// Run the synthetic (theta, points per subspace) error sweep.
    Bench(BenchArgs),
    /// Evaluate angles and the recovery conditions on labelled data.
    Check(CheckArgs),
}

#[derive(Args, Debug)]
pub struct GenArgs {
    #[arg(long, default_value_t = 4)]
    pub d: usize,
    #[arg(long, default_value_t = 50)]
    pub ambient_dim: usize,
    #[arg(long)]
    pub theta_deg: f64,
    #[arg(long, default_value_t = 128)]
    pub points_per_subspace: usize,
    #[arg(long, default_value_t = 3)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.0)]
    pub noise_sigma: f64,
    #[arg(long, default_value_t = 0.0)]
    pub outlier_frac: f64,
    #[arg(long, default_value_t = 1.0)]
    pub outlier_magnitude: f64,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum VariantArg {
    Exact,
    Noise,
    Outlier,
    Both,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum MissingArg {
    /// Keep only rows known for every point.
    Project,
    /// Replace unknown entries by random values and treat them as outliers.
    Fill,
}

#[derive(Args, Debug)]
pub struct SolveArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t = VariantArg::Noise)]
    pub variant: VariantArg,
    /// Enforce affine combinations (default: on for the noise variant).
    #[arg(long, overrides_with = "no_affine")]
    pub affine: bool,
    #[arg(long)]
    pub no_affine: bool,
    #[arg(long, default_value_t = 800.0)]
    pub alpha_z: f64,
    #[arg(long, default_value_t = 20.0)]
    pub alpha_e: f64,
    #[arg(long, default_value_t = 0.0)]
    pub lambda_r: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 10_000)]
    pub max_iter: usize,
    /// ADMM penalty (default depends on the variant).
    #[arg(long)]
    pub rho: Option<f64>,
    /// Solve on the raw columns instead of unit-normalized ones.
    #[arg(long)]
    pub no_normalize_data: bool,
    /// Known-row mask file, one line per point.
    #[arg(long)]
    pub masks: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = MissingArg::Project)]
    pub missing: MissingArg,
    /// Fill magnitude for `--missing fill` (default: largest known entry).
    #[arg(long)]
    pub fill_magnitude: Option<f64>,
    /// Project onto the top-k singular directions first.
    #[arg(long)]
    pub pca: Option<usize>,
    /// Subtract the mean column before the projection.
    #[arg(long, requires = "pca")]
    pub center: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
    #[arg(long)]
    pub out_coeffs: Option<PathBuf>,
    #[arg(long)]
    pub out_errors: Option<PathBuf>,
    #[arg(long)]
    pub allow_nonconverged: bool,
}

#[derive(Args, Debug)]
pub struct ClusterArgs {
    #[arg(long)]
    pub coeffs: PathBuf,
    #[arg(long, conflicts_with = "estimate_n", required_unless_present = "estimate_n")]
    pub n: Option<usize>,
    #[arg(long)]
    pub estimate_n: bool,
    #[arg(long, default_value_t = 10)]
    pub n_max: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 20)]
    pub restarts: usize,
    /// Skip the per-column max-abs normalization of the coefficients.
    #[arg(long)]
    pub no_normalize: bool,
    /// Ground-truth labels for reporting the clustering error.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
    #[arg(long)]
    pub out_labels: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    #[arg(long, value_delimiter = ',', default_value = "6,15,30,45,60")]
    pub theta_list: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "5,16,64,128")]
    pub ng_list: Vec<usize>,
    #[arg(long, default_value_t = 20)]
    pub trials: usize,
    #[arg(long, default_value_t = 4)]
    pub d: usize,
    #[arg(long, default_value_t = 50)]
    pub ambient_dim: usize,
    #[arg(long, default_value_t = 3)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = VariantArg::Exact)]
    pub variant: VariantArg,
    #[arg(long, default_value_t = 800.0)]
    pub alpha_z: f64,
    #[arg(long, default_value_t = 20.0)]
    pub alpha_e: f64,
    #[arg(long, default_value_t = 0.0)]
    pub noise_sigma: f64,
    #[arg(long, default_value_t = 0.0)]
    pub outlier_frac: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 10_000)]
    pub max_iter: usize,
    #[arg(long, default_value = "sweep.csv")]
    pub out: PathBuf,
    /// Per-cell means (default: `<out stem>_summary.csv`).
    #[arg(long)]
    pub out_summary: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct CheckArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub labels: PathBuf,
    /// Stacked orthonormal bases; estimated from the labelled data if absent.
    #[arg(long)]
    pub bases: Option<PathBuf>,
    /// Evaluate the submatrix condition for every subspace.
    #[arg(long)]
    pub thm3: bool,
    /// Samples per subspace for the intersection margin (0 skips it).
    #[arg(long, default_value_t = 0)]
    pub thm2_samples: usize,
    #[arg(long, default_value_t = 100_000)]
    pub submatrix_budget: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "report.json")]
    pub out: PathBuf,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] SscError),
    #[error("{0}")]
    Usage(String),
    #[error("I/O error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("ADMM stopped after {iterations} iterations without meeting the tolerance (outputs written)")]
    NotConverged { iterations: usize },
    #[error("JSON serialization failed: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Io { .. } | CliError::Json(_) => 1,
            CliError::NotConverged { .. } => 3,
            CliError::Core(e) => match e {
                SscError::Io(_) | SscError::Parse { .. } => 1,
                SscError::InvalidConfig(_) | SscError::TooManyClusters { .. } | SscError::DimensionTooSmall { .. } => 2,
                SscError::NotConverged { .. } => 3,
                _ => 4,
            },
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            eprintln!("error: --jobs must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global() {
            log::warn!("could not size the worker pool: {e}");
        }
    }
    let result = match cli.command {
        Command::Gen(a) => commands::gen(a),
        Command::Solve(a) => commands::solve(a),
        Command::Cluster(a) => commands::cluster(a),
        Command::Bench(a) => commands::bench(a),
        Command::Check(a) => commands::check(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
