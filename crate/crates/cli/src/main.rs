//! `recembed`: dataset generation, decomposition experiments, ANN benchmarks,
//! embedding certificates and exponent tables from the command line.
//!
//! Exit status is 0 on success, 1 when the library rejects the request and 2
//! on usage errors. `RECEMBED_THREADS` caps the worker pool.

mod args;
mod cmd;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use recembed::ann::BaseStrategy;
use recembed::lipschitz::{BaseKind, BetaSource};
use recembed::metric::{DatasetKind, NormExponent};
use serde::Serialize;

use args::{ChainArg, DeltaArg, GlobalArg, ScheduleArg};

#[derive(Debug, Parser)]
#[command(
    name = "recembed",
    version,
    about = "Recursive Mazur-map embeddings of finite lp point sets"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a point set (CSV plus JSON sidecar).
    Gen(GenArgs),
    /// Draw one partition from a decomposition sampler.
    Decompose(DecomposeArgs),
    /// Monte-Carlo estimate of a sampler's separation parameter.
    EstimateBeta(EstimateBetaArgs),
    /// Build a recursive ANN structure and dump it to a directory.
    AnnBuild(AnnBuildArgs),
    /// Query a dumped ANN structure.
    AnnQuery(AnnQueryArgs),
    /// Build and benchmark an ANN structure against brute force.
    AnnBench(AnnBenchArgs),
    /// Certify a localized map, optionally composed with a global map.
    EmbedVerify(EmbedVerifyArgs),
    /// Distortion-exponent comparison table over a grid of p.
    ExponentTable(ExponentTableArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct GenArgs {
    #[arg(long, default_value = "uniform-cube")]
    #[serde(serialize_with = "as_display")]
    pub kind: DatasetKind,
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub d: usize,
    /// Norm exponent; `inf` allowed.
    #[arg(long, default_value = "2")]
    #[serde(serialize_with = "as_display")]
    pub p: NormExponent,
    #[arg(long)]
    pub seed: u64,
    /// Planted queries (planted-clusters only).
    #[arg(long, default_value_t = 200)]
    pub queries: usize,
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplerKind {
    /// Full recursive decomposition down the exponent chain.
    Recursive,
    Ckr,
    L2Grid,
    L2Ballcarve,
}

#[derive(Debug, Args, Serialize)]
pub struct SamplerArgs {
    #[arg(long, value_enum, default_value_t = SamplerKind::Recursive)]
    pub sampler: SamplerKind,
    /// Exponent chain from p down to 2, e.g. `8,4,2`.
    #[arg(long)]
    pub chain: Option<ChainArg>,
    /// Floor sampler: `auto`, `ckr`, `l2-grid` or `l2-ballcarve`.
    #[arg(long, default_value = "auto")]
    #[serde(serialize_with = "as_display")]
    pub base: BaseKind,
    #[arg(long, default_value = "formula")]
    #[serde(serialize_with = "as_debug")]
    pub beta_source: BetaSource,
    #[arg(long)]
    pub inner_k: Option<usize>,
    #[arg(long)]
    pub abort_on_worse: bool,
    /// JL pre-projection inside the l2 floor.
    #[arg(long)]
    pub jl: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct DecomposeArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Absolute scale, `median` or `qX`.
    #[arg(long, default_value = "median")]
    pub delta: DeltaArg,
    #[arg(long)]
    pub seed: u64,
    #[command(flatten)]
    pub sampler: SamplerArgs,
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct EstimateBetaArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, default_value = "median")]
    pub delta: DeltaArg,
    #[arg(long, default_value_t = 200)]
    pub draws: usize,
    /// Pairs audited; every pair when `n(n-1)/2` fits.
    #[arg(long, default_value_t = 200_000)]
    pub pair_budget: usize,
    #[arg(long)]
    pub seed: u64,
    #[command(flatten)]
    pub sampler: SamplerArgs,
    /// Defaults to `beta.csv` in the current directory.
    #[arg(long, default_value = "beta.csv")]
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct AnnFlags {
    /// Index at the top of every lp node.
    #[arg(long, default_value = "crude-grid")]
    #[serde(serialize_with = "as_display")]
    pub base: BaseStrategy,
    /// Index for l2 nodes.
    #[arg(long, default_value = "exact-oracle")]
    #[serde(serialize_with = "as_display")]
    pub floor: BaseStrategy,
    /// `halving` or `geometric:EPS`.
    #[arg(long, default_value = "halving")]
    pub schedule: ScheduleArg,
    #[arg(long)]
    pub inner_k: Option<usize>,
    #[arg(long)]
    pub reps_inner: Option<usize>,
    #[arg(long)]
    pub reps_outer: Option<usize>,
    #[arg(long)]
    pub no_jl: bool,
    #[arg(long)]
    pub no_holder: bool,
    #[arg(long, default_value_t = 200)]
    pub audit_queries: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct AnnBuildArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub r: f64,
    #[arg(long)]
    pub seed: u64,
    #[command(flatten)]
    pub ann: AnnFlags,
    /// Output directory.
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct AnnQueryArgs {
    /// Directory written by `ann-build`.
    #[arg(long)]
    pub index: PathBuf,
    #[arg(long)]
    pub queries: PathBuf,
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct AnnBenchArgs {
    /// Existing dataset; omit to generate a planted-clusters instance.
    #[arg(long = "in", requires_all = ["query_file", "r"])]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub query_file: Option<PathBuf>,
    /// Near-neighbor radius; planted instances carry their own.
    #[arg(long)]
    pub r: Option<f64>,
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    #[arg(long, default_value_t = 16)]
    pub d: usize,
    #[arg(long, default_value_t = 4.0)]
    pub p: f64,
    #[arg(long, default_value_t = 200)]
    pub queries: usize,
    #[arg(long)]
    pub seed: u64,
    #[command(flatten)]
    pub ann: AnnFlags,
    #[arg(long, default_value = "ann_bench.csv")]
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct EmbedVerifyArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, default_value_t = 8.0)]
    pub k: f64,
    /// Scale; defaults to diameter / K.
    #[arg(long)]
    pub delta: Option<DeltaArg>,
    /// Target exponent of the localized map.
    #[arg(long, default_value_t = 2.0)]
    pub q: f64,
    /// Certificate threshold is `D = c·K`; defaults to `(p/q)·2^(p/q - 1)`.
    #[arg(long)]
    pub c: Option<f64>,
    /// `none`, `identity`, `scale:F` or `mazur:T`.
    #[arg(long, default_value = "none")]
    pub global: GlobalArg,
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct ExponentTableArgs {
    #[arg(long, default_value_t = 3.05)]
    pub p_min: f64,
    #[arg(long, default_value_t = 4.9)]
    pub p_max: f64,
    #[arg(long, default_value_t = 100)]
    pub steps: usize,
    #[arg(long, default_value_t = 50)]
    pub k: u64,
    #[arg(long, default_value_t = 1e-9)]
    pub eps: f64,
    #[arg(long, default_value = "exponents.csv")]
    #[serde(skip)]
    pub out: PathBuf,
}

fn as_display<T: std::fmt::Display, S: serde::Serializer>(v: &T, s: S) -> Result<S::Ok, S::Error> {
    s.collect_str(v)
}

fn as_debug<T: std::fmt::Debug, S: serde::Serializer>(v: &T, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&format!("{v:?}").to_lowercase())
}

#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Domain(recembed::Error),
}

impl From<recembed::Error> for Failure {
    fn from(e: recembed::Error) -> Self {
        Failure::Domain(e)
    }
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(raw) = std::env::var("RECEMBED_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Failure::Usage(format!("RECEMBED_THREADS must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::Usage(format!("cannot size the thread pool: {e}")))
}

fn run(cli: Cli) -> Result<(), Failure> {
    configure_threads()?;
    match cli.command {
        Command::Gen(a) => cmd::gen(&a),
        Command::Decompose(a) => cmd::decompose(&a),
        Command::EstimateBeta(a) => cmd::estimate_beta(&a),
        Command::AnnBuild(a) => cmd::ann_build(&a),
        Command::AnnQuery(a) => cmd::ann_query(&a),
        Command::AnnBench(a) => cmd::ann_bench(&a),
        Command::EmbedVerify(a) => cmd::embed_verify(&a),
        Command::ExponentTable(a) => cmd::exponent_table(&a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Domain(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
