mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "hominem", version, about = "Ad hominem corpus analytics, sampling, models and explanations")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Global {
    /// Directory receiving every artifact
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Master seed for all stochastic steps
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads (default: all cores)
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// key=value file supplying defaults for flags not given on the command line
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Rebuild discussion trees and report quarantined records
    Ingest(CorpusArgs),
    /// Corpus dynamics statistics
    Stats(CorpusArgs),
    /// Build datasets from a corpus
    #[command(subcommand)]
    Sample(SampleCommand),
    /// Aggregate crowd annotations
    #[command(subcommand)]
    Annotate(AnnotateCommand),
    /// Topic model fitting and inference
    #[command(subcommand)]
    Lda(LdaCommand),
    /// Train a model on a dataset
    #[command(subcommand)]
    Train(TrainCommand),
    /// K-fold cross-validation of one or more models
    Cv(CvArgs),
    /// Score a dataset with a trained model
    Predict(PredictArgs),
    /// Score two held-out groups with a regressor and compare them
    Extrapolate(ExtrapolateArgs),
    /// Two-sample Kolmogorov-Smirnov test
    Kstest(PairArgs),
    /// Cohen's kappa between two label columns
    Kappa(PairArgs),
    /// Spearman rank correlation between two number columns
    Spearman(PairArgs),
    /// Attention heat maps, error buckets and trigger phrases
    Explain(ExplainArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct CorpusArgs {
    /// Line-delimited post records
    #[arg(long)]
    pub corpus: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct EncoderArgs {
    /// Word vector file; words missing from it get seeded random rows
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// Vector size when no vector file is given
    #[arg(long, default_value_t = 50)]
    pub dim: usize,
    #[arg(long)]
    pub lowercase: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct SampleArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[command(flatten)]
    pub encoder: EncoderArgs,
}

#[derive(Debug, Subcommand)]
pub enum SampleCommand {
    /// Ad hominem posts against similarity-matched negatives
    Binary(SampleArgs),
    /// Original posts of ad hominem-only and delta-only debates
    OpGroups(CorpusArgs),
    /// Three-post two-person contexts ending in ad hominem or a delta
    Triplets(SampleArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct EmArgs {
    #[arg(long, default_value_t = 10)]
    pub restarts: usize,
    #[arg(long, default_value_t = 50)]
    pub iterations: usize,
    #[arg(long, default_value_t = 0.1)]
    pub smoothing: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct MaceArgs {
    /// Tab-separated item_id, annotator_id, label
    #[arg(long)]
    pub annotations: PathBuf,
    /// Label domain size (default: largest label + 1)
    #[arg(long)]
    pub labels: Option<usize>,
    /// Fraction of most confident items to keep
    #[arg(long, default_value_t = 0.9)]
    pub threshold: f64,
    /// Also split workers into this many groups and report agreement between their golds
    #[arg(long)]
    pub groups: Option<usize>,
    #[command(flatten)]
    pub em: EmArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct DistributionArgs {
    #[arg(long)]
    pub annotations: PathBuf,
    #[arg(long)]
    pub labels: Option<usize>,
}

#[derive(Debug, Args, Serialize)]
pub struct SpanArgs {
    /// Token items named <doc>#<index>, labels 0/1
    #[arg(long)]
    pub annotations: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    pub threshold: f64,
    #[command(flatten)]
    pub em: EmArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct ScaleArgs {
    /// Labels 0.. stand for scale points 1..
    #[arg(long)]
    pub annotations: PathBuf,
    #[arg(long)]
    pub labels: Option<usize>,
    /// Corpus whose submissions supply texts for a regression dataset
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Dataset name when --corpus is given
    #[arg(long, default_value = "scale")]
    pub name: String,
}

#[derive(Debug, Subcommand)]
pub enum AnnotateCommand {
    /// Gold labels from the annotator-competence model
    Mace(MaceArgs),
    /// Empirical label distribution per item
    Distribution(DistributionArgs),
    /// Gold token spans
    Spans(SpanArgs),
    /// Mean ordinal score per item
    Scale(ScaleArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct LdaFitArgs {
    /// Fit on the submissions of this corpus
    #[arg(long, required_unless_present = "data")]
    pub corpus: Option<PathBuf>,
    /// Fit on the texts of this dataset
    #[arg(long, conflicts_with = "corpus")]
    pub data: Option<PathBuf>,
    /// Dataset whose instance ids must be left out of fitting
    #[arg(long)]
    pub exclude: Option<PathBuf>,
    #[arg(long, default_value_t = 50)]
    pub k: usize,
    /// Default 50 / k
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long, default_value_t = 0.01)]
    pub beta: f64,
    #[arg(long, default_value_t = 500)]
    pub iterations: usize,
    /// Words listed per topic in the report
    #[arg(long, default_value_t = 10)]
    pub top: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct LdaInferArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 50)]
    pub iterations: usize,
}

#[derive(Debug, Subcommand)]
pub enum LdaCommand {
    /// Fit a topic model on a dataset or a corpus
    Fit(LdaFitArgs),
    /// Topic mixture of every instance under a fitted model
    Infer(LdaInferArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerArg {
    Adam,
    Sgd,
}

#[derive(Debug, Args, Serialize)]
pub struct ModelArgs {
    /// Convolution filter widths
    #[arg(long, value_delimiter = ',', default_value = "3,4,5")]
    pub widths: Vec<usize>,
    /// Feature maps per filter width
    #[arg(long, default_value_t = 100)]
    pub maps: usize,
    /// LSTM hidden size per direction
    #[arg(long, default_value_t = 64)]
    pub hidden: usize,
    #[arg(long, default_value_t = 64)]
    pub attention_hidden: usize,
    #[arg(long, default_value_t = 8)]
    pub attention_rows: usize,
    #[arg(long, default_value_t = 0.0)]
    pub attention_penalty: f64,
    #[arg(long, default_value_t = 0.5)]
    pub dropout: f64,
    #[arg(long)]
    pub train_embeddings: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct FitArgs {
    #[arg(long, default_value_t = 10)]
    pub epochs: usize,
    #[arg(long, default_value_t = 16)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    #[arg(long, default_value_t = 3)]
    pub patience: usize,
    #[arg(long, value_enum, default_value_t = OptimizerArg::Adam)]
    pub optimizer: OptimizerArg,
    #[arg(long, default_value_t = 0.1)]
    pub validation_fraction: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct TopicArgs {
    /// Topic model whose mixtures are fused into cnn-lda
    #[arg(long)]
    pub lda: Option<PathBuf>,
    /// Gibbs sweeps when inferring a document's topic mixture
    #[arg(long, default_value_t = 50)]
    pub infer_iterations: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[command(flatten)]
    pub encoder: EncoderArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub fit: FitArgs,
    #[command(flatten)]
    pub topics: TopicArgs,
}

#[derive(Debug, Subcommand)]
pub enum TrainCommand {
    Cnn(TrainArgs),
    Bilstm(TrainArgs),
    Ssae(TrainArgs),
    CnnLda(TrainArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReferenceTable {
    /// binary ad hominem accuracy
    AdHominem,
    /// controversy Spearman correlation
    Controversy,
    /// reasonableness Spearman correlation
    Reasonableness,
    /// thread-context accuracy
    Triplets,
}

#[derive(Debug, Args, Serialize)]
pub struct CvArgs {
    /// Comma-separated: cnn, bilstm, ssae, cnn-lda
    #[arg(long, value_delimiter = ',', required = true)]
    pub model: Vec<String>,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub folds: usize,
    /// Published figures to print beside the measured ones
    #[arg(long, value_enum)]
    pub reference: Option<ReferenceTable>,
    #[command(flatten)]
    pub encoder: EncoderArgs,
    #[command(flatten)]
    pub model_args: ModelArgs,
    #[command(flatten)]
    pub fit: FitArgs,
    #[command(flatten)]
    pub topics: TopicArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct PredictArgs {
    /// Model checkpoint
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[command(flatten)]
    pub topics: TopicArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct ExtrapolateArgs {
    /// Regression checkpoint
    #[arg(long)]
    pub model: PathBuf,
    /// Held-out documents labelled with their group
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "AD_HOMINEM_GROUP,DELTA_GROUP")]
    pub groups: Vec<String>,
    #[command(flatten)]
    pub topics: TopicArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct PairArgs {
    /// One value per line
    #[arg(long)]
    pub a: PathBuf,
    #[arg(long)]
    pub b: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct ExplainArgs {
    /// Self-attentive model checkpoint
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "AD_HOMINEM")]
    pub positive: String,
    /// N-gram length for trigger phrases
    #[arg(long, default_value_t = 1)]
    pub ngram: usize,
    #[arg(long, default_value_t = 20)]
    pub top_k: usize,
}

fn main() -> ExitCode {
    let argv = match config::expand(std::env::args_os().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    if let Some(n) = cli.global.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
