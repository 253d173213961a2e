//! Command-line grammar.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use cic_core::baselearn::{BaseKind, PredictorKind, ResampleScheme};
use cic_core::matching::MatcherKind;
use cic_core::mmcc::{Convergence, MmccConfig};
use cic_core::par::Execution;

#[derive(Debug, Parser)]
#[command(
    name = "cic",
    version,
    about = "Resample-aggregated clustering with CIC model selection"
)]
pub struct Cli {
    /// Worker threads; all outputs are identical for any value.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit every K in a range and select the one with the highest CIC.
    Sweep(SweepArgs),
    /// Mean silhouette width of single full-sample fits per K.
    Silhouette(SilhouetteArgs),
    /// Agreement between two solutions or between solutions and true classes.
    Agreement(AgreementArgs),
    /// Agreement distributions under a Gaussian null and under resampling.
    ValidateNull(NullArgs),
    /// How often repeated sweeps pick each K as rounds accumulate.
    Convergence(ConvergenceArgs),
    /// Synthetic two-dimensional data with known clusters.
    Generate(GenerateArgs),
    /// Ratio, standardization and sphering transforms.
    Preprocess(PreprocessArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Builtin {
    /// Crab measurements as ratios to carapace width, whitened by
    /// correlation PCA, with species/sex classes.
    Crabs,
}

#[derive(Debug, Clone, Args)]
#[group(required = true, multiple = false, id = "source")]
pub struct SourceArgs {
    /// CSV input with a header row; `.tsv` files are tab separated.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Use a bundled dataset instead of a file.
    #[arg(long, value_enum)]
    pub builtin: Option<Builtin>,
}

#[derive(Debug, Clone, Args)]
pub struct InputArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    /// Columns holding true classes; several are joined with `/`.
    #[arg(long, value_delimiter = ',')]
    pub label_col: Vec<String>,
    /// Columns to skip.
    #[arg(long, value_delimiter = ',')]
    pub ignore_col: Vec<String>,
    /// Column with case identifiers.
    #[arg(long)]
    pub id_col: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// Base learner: kmeans, pam or slink.
    #[arg(long, default_value = "pam")]
    pub base: BaseKind,
    /// Out-of-resample prediction: rep (nearest center or medoid) or nn1.
    #[arg(long, default_value = "rep")]
    pub predict: PredictorKind,
    /// bootstrap or subsample.
    #[arg(long, default_value = "bootstrap")]
    pub scheme: ResampleScheme,
    /// Resample size; N for the bootstrap and N/2 for subsamples by default.
    #[arg(long)]
    pub resample_size: Option<usize>,
    /// Voting rounds per K.
    #[arg(long, default_value_t = 1000)]
    pub resamples: usize,
    /// exact or heuristic label matching.
    #[arg(long, default_value = "exact")]
    pub matcher: MatcherKind,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Fresh attempts for a degenerate round before it is skipped.
    #[arg(long, default_value_t = 3)]
    pub retries: usize,
    /// Stop once the CIC trace and the majority are stable.
    #[arg(long)]
    pub early_stop: bool,
    #[arg(long, default_value_t = 100, requires = "early_stop")]
    pub window: usize,
    #[arg(long, default_value_t = 0.005, requires = "early_stop")]
    pub epsilon: f64,
}

impl ModelArgs {
    pub fn config(&self, k: usize, base: BaseKind) -> MmccConfig {
        MmccConfig {
            k,
            resamples: self.resamples,
            resample_size: self.resample_size,
            scheme: self.scheme,
            base,
            predictor: self.predict,
            matcher: self.matcher,
            seed: self.seed,
            degenerate_retry_limit: self.retries,
            convergence: if self.early_stop {
                Convergence::EarlyStop {
                    window: self.window,
                    epsilon: self.epsilon,
                }
            } else {
                Convergence::Fixed
            },
            execution: Execution::Parallel,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 2)]
    pub kmin: usize,
    #[arg(long, default_value_t = 10)]
    pub kmax: usize,
    /// Further base learners to sweep with the same settings.
    #[arg(long, value_delimiter = ',')]
    pub compare: Vec<BaseKind>,
    /// Skip the silhouette baseline and the standard solutions.
    #[arg(long)]
    pub no_silhouette: bool,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct SilhouetteArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, default_value = "pam")]
    pub base: BaseKind,
    #[arg(long, default_value_t = 2)]
    pub kmin: usize,
    #[arg(long, default_value_t = 10)]
    pub kmax: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// TSV file for the table; stdout only otherwise.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct AgreementArgs {
    /// First solution (CSV or TSV with a header row).
    #[arg(long)]
    pub a: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "label")]
    pub a_col: Vec<String>,
    /// Second solution.
    #[arg(long, required_unless_present = "truth")]
    pub b: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "label")]
    pub b_col: Vec<String>,
    /// File with the true classes.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "label")]
    pub truth_col: Vec<String>,
    /// Output directory for the report and per-case failure codes.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct NullArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 4)]
    pub k: usize,
    /// Successive Gaussian samples; one fewer pairs.
    #[arg(long, default_value_t = 1001)]
    pub draws: usize,
    /// Size of each Gaussian sample.
    #[arg(long, default_value_t = 100)]
    pub null_n: usize,
    /// Resample solutions for the resampling and reference distributions.
    #[arg(long, default_value_t = 1001)]
    pub rounds: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct ConvergenceArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 2)]
    pub kmin: usize,
    #[arg(long, default_value_t = 10)]
    pub kmax: usize,
    #[arg(long, default_value_t = 20)]
    pub repetitions: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct GenerateArgs {
    /// blobs, flipper4, elongated2, ring, spiral or modeclus3.
    #[arg(long)]
    pub shape: String,
    #[arg(long, default_value_t = 400)]
    pub n: usize,
    /// Standard deviation of the Gaussian jitter.
    #[arg(long, default_value_t = 0.1)]
    pub noise: f64,
    /// Number of blobs.
    #[arg(long, default_value_t = 3)]
    pub k: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// CSV with columns x1, x2 and label.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct PreprocessArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Divide the other columns by this one.
    #[arg(long)]
    pub ratio_col: Option<String>,
    #[arg(long)]
    pub standardize: bool,
    /// Correlation PCA.
    #[arg(long)]
    pub sphere: bool,
    /// Scale components to unit variance.
    #[arg(long, requires = "sphere")]
    pub whiten: bool,
    /// Leading components to keep.
    #[arg(long, requires = "sphere")]
    pub keep: Option<usize>,
    /// Replay parameters saved by an earlier run instead of fitting.
    #[arg(long, conflicts_with_all = ["ratio_col", "standardize", "sphere"])]
    pub apply: Option<PathBuf>,
    /// Transformed CSV; a `label` column carries the classes.
    #[arg(long)]
    pub out: PathBuf,
    /// Where to save the fitted parameters as JSON.
    #[arg(long)]
    pub params: Option<PathBuf>,
}
