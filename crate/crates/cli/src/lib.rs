//! The `controversy` command line: one verb per invocation, exit code 0 on
//! success, 1 for usage or configuration errors, 2 for bad input data and 3 for
//! numeric failures.

mod commands;
mod io;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use controversy_core::features::{AggregateMode, Fallback};
use controversy_core::ingest::{AdjacencyMode, SynthKind};
use controversy_core::layers::ReadoutMode;
use controversy_core::models::ModelFamily;
use controversy_core::Error;
use serde::Serialize;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "controversy", version, about = "Controversy detection on user-interaction graphs")]
struct Cli {
    /// Worker threads for per-graph parallel work (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    #[command(subcommand)]
    pub verb: Verb,
}

#[derive(Debug, Subcommand)]
pub(crate) enum Verb {
    /// Turn a thread JSONL file into one user-graph JSON per retained thread.
    BuildGraphs(BuildGraphsArgs),
    /// Corpus statistics of a thread JSONL file.
    Stats(StatsArgs),
    /// Train a classifier and write metrics plus the best-validation checkpoint.
    Train(TrainArgs),
    /// Accuracy of a trained run on a set of graphs.
    Eval(EvalArgs),
    /// Per-graph class probabilities of a trained run.
    Predict(PredictArgs),
    /// Generate labelled synthetic threads.
    Synth(SynthArgs),
    /// Accuracy of a trained run on threads cut off after each given time.
    Timeslice(TimesliceArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub(crate) enum SynthChoice {
    Polarized,
    Consensus,
    /// Alternating polarized and consensus threads.
    Mixed,
}

impl SynthChoice {
    fn kind_at(self, k: usize) -> SynthKind {
        match self {
            SynthChoice::Polarized => SynthKind::Polarized,
            SynthChoice::Consensus => SynthKind::Consensus,
            SynthChoice::Mixed if k.is_multiple_of(2) => SynthKind::Polarized,
            SynthChoice::Mixed => SynthKind::Consensus,
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub(crate) enum FamilyArg {
    HrlGcn,
    ArlGat,
}

#[derive(Clone, Copy, Debug, Serialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub(crate) enum ReadoutArg {
    Sum,
    Mean,
}

#[derive(Clone, Copy, Debug, Serialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub(crate) enum AdjacencyArg {
    Binary,
    Weighted,
}

#[derive(Clone, Copy, Debug, Serialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub(crate) enum AggregateArg {
    Max,
    Mean,
    Sum,
}

impl From<FamilyArg> for ModelFamily {
    fn from(a: FamilyArg) -> Self {
        match a {
            FamilyArg::HrlGcn => ModelFamily::HrlGcn,
            FamilyArg::ArlGat => ModelFamily::ArlGat,
        }
    }
}

impl From<ReadoutArg> for ReadoutMode {
    fn from(a: ReadoutArg) -> Self {
        match a {
            ReadoutArg::Sum => ReadoutMode::Sum,
            ReadoutArg::Mean => ReadoutMode::Mean,
        }
    }
}

impl From<AdjacencyArg> for AdjacencyMode {
    fn from(a: AdjacencyArg) -> Self {
        match a {
            AdjacencyArg::Binary => AdjacencyMode::Binary,
            AdjacencyArg::Weighted => AdjacencyMode::Weighted,
        }
    }
}

impl From<AggregateArg> for AggregateMode {
    fn from(a: AggregateArg) -> Self {
        match a {
            AggregateArg::Max => AggregateMode::Max,
            AggregateArg::Mean => AggregateMode::Mean,
            AggregateArg::Sum => AggregateMode::Sum,
        }
    }
}

/// `none` or a path to an embedding store.
#[derive(Clone, Debug, PartialEq)]
pub(crate) enum FeatureSource {
    None,
    Store(PathBuf),
}

impl Serialize for FeatureSource {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            FeatureSource::None => s.serialize_str("none"),
            FeatureSource::Store(p) => p.serialize(s),
        }
    }
}

fn parse_features(s: &str) -> Result<FeatureSource, String> {
    match s {
        "" => Err("expected `none` or a store path".into()),
        "none" => Ok(FeatureSource::None),
        path => Ok(FeatureSource::Store(PathBuf::from(path))),
    }
}

/// `constant` or `degree:<cap>`.
fn parse_fallback(s: &str) -> Result<Fallback, String> {
    if s == "constant" {
        return Ok(Fallback::ConstantOne);
    }
    match s.strip_prefix("degree:").map(str::parse::<usize>) {
        Some(Ok(cap)) => Ok(Fallback::DegreeOneHot { cap }),
        _ => Err(format!("expected `constant` or `degree:<cap>`, got `{s}`")),
    }
}

/// Comma-separated minutes in ascending order; `inf` keeps the whole thread.
fn parse_cutoffs(s: &str) -> Result<Cutoffs, String> {
    if s.trim().is_empty() {
        return Ok(Cutoffs(Vec::new()));
    }
    s.split(',')
        .map(|part| match part.trim() {
            "inf" => Ok(None),
            m => m.parse().map(Some).map_err(|_| format!("bad cutoff `{m}`")),
        })
        .collect::<Result<_, _>>()
        .map(Cutoffs)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub(crate) struct Cutoffs(pub Vec<Option<u64>>);

#[derive(Debug, Args, Serialize)]
pub(crate) struct FeatureArgs {
    /// Embedding store path, or `none` for structure-only fallback features.
    #[arg(long, default_value = "none", value_parser = parse_features)]
    pub features: FeatureSource,
    /// Feature of users without embedded messages: `constant` or `degree:<cap>`.
    #[arg(long, default_value = "constant", value_parser = parse_fallback)]
    pub fallback: Fallback,
    /// Element-wise aggregate of a user's message vectors.
    #[arg(long, value_enum, default_value = "max")]
    pub aggregate: AggregateArg,
    /// Leave the post body out of its author's messages.
    #[arg(long)]
    pub exclude_post: bool,
}

/// Where graphs come from: a directory written by `build-graphs`, or threads.
#[derive(Debug, Args, Serialize)]
#[group(required = true, multiple = false)]
pub(crate) struct GraphSource {
    /// Directory of user-graph JSON files.
    #[arg(long)]
    pub graphs: Option<PathBuf>,
    /// Thread JSONL file; graphs are built on the fly.
    #[arg(long)]
    pub input: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub(crate) struct BuildGraphsArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Threads with fewer comments are dropped.
    #[arg(long, default_value_t = 30)]
    pub min_comments: usize,
    #[command(flatten)]
    pub features: FeatureArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub(crate) struct StatsArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Only count threads with at least this many comments.
    #[arg(long, default_value_t = 0)]
    pub min_comments: usize,
    /// Also write the statistics JSON here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub(crate) struct TrainArgs {
    #[arg(long, value_enum, default_value = "hrl-gcn")]
    pub model: FamilyArg,
    /// Pooling levels before the final single cluster (hrl-gcn).
    #[arg(long, default_value_t = 1)]
    pub pool_layers: usize,
    /// Attention layers (arl-gat).
    #[arg(long, default_value_t = 2)]
    pub att_layers: usize,
    #[arg(long, value_enum, default_value = "sum")]
    pub readout: ReadoutArg,
    #[arg(long, default_value_t = 64)]
    pub hidden: usize,
    #[arg(long, default_value_t = 64)]
    pub mlp_hidden: usize,
    #[arg(long, value_enum, default_value = "binary")]
    pub adjacency: AdjacencyArg,
    /// First-level cluster count as a fraction of the largest training graph.
    #[arg(long, default_value_t = 0.25)]
    pub cluster_ratio: f64,
    #[arg(long, default_value_t = 1.0)]
    pub link_weight: f64,
    #[arg(long, default_value_t = 1.0)]
    pub entropy_weight: f64,
    #[arg(long, default_value_t = 0.01)]
    pub lr: f64,
    #[arg(long, default_value_t = 32)]
    pub batch: usize,
    #[arg(long, default_value_t = 100)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Per-label fraction of the balanced set used for training.
    #[arg(long, default_value_t = 0.8)]
    pub split: f64,
    /// With --input, threads with fewer comments are dropped.
    #[arg(long, default_value_t = 30)]
    pub min_comments: usize,
    #[command(flatten)]
    pub source: GraphSource,
    #[command(flatten)]
    pub features: FeatureArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub(crate) struct EvalArgs {
    /// Directory written by `train`.
    #[arg(long)]
    pub run: PathBuf,
    #[command(flatten)]
    pub source: GraphSource,
    #[arg(long, default_value_t = 30)]
    pub min_comments: usize,
    #[command(flatten)]
    pub features: FeatureArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub(crate) struct PredictArgs {
    #[arg(long)]
    pub run: PathBuf,
    #[command(flatten)]
    pub source: GraphSource,
    #[arg(long, default_value_t = 30)]
    pub min_comments: usize,
    #[command(flatten)]
    pub features: FeatureArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub(crate) struct SynthArgs {
    #[arg(long, value_enum)]
    pub kind: SynthChoice,
    /// Users per thread.
    #[arg(long, default_value_t = 40)]
    pub n: usize,
    #[arg(long, default_value_t = 50)]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub(crate) struct TimesliceArgs {
    #[arg(long)]
    pub run: PathBuf,
    #[arg(long)]
    pub input: PathBuf,
    /// Ascending minutes, comma separated; `inf` is the whole thread.
    #[arg(long, default_value = "10,30,60,120,inf", value_parser = parse_cutoffs)]
    pub cutoffs: Cutoffs,
    #[arg(long, default_value_t = 30)]
    pub min_comments: usize,
    /// Sliced graphs with fewer nodes are skipped.
    #[arg(long, default_value_t = 2)]
    pub min_nodes: usize,
    #[command(flatten)]
    pub features: FeatureArgs,
    #[arg(long)]
    pub out: PathBuf,
}

pub(crate) fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Usage(_) | Error::Argument(_) | Error::Config(_) => EXIT_USAGE,
        Error::Numeric(_) => EXIT_NUMERIC,
        _ => EXIT_DATA,
    }
}

fn init_logging() {
    let env = env_logger::Env::new().filter_or("CONTROVERSY_LOG", "warn");
    let _ = env_logger::Builder::from_env(env).format_timestamp(None).try_init();
}

/// Parses `argv` (program name first) and runs the chosen verb.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    init_logging();
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.jobs {
        if n == 0 {
            eprintln!("error: --jobs must be at least 1");
            return EXIT_USAGE;
        }
        pool = pool.num_threads(n);
    }
    let pool = match pool.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start worker pool: {e}");
            return EXIT_USAGE;
        }
    };
    match pool.install(|| commands::dispatch(cli.verb)) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
