use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(
    name = "augssl",
    about = "Audio augmentation for self-supervised speech pre-training"
)]
#[command(arg_required_else_help = true, propagate_version = true)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Serialize)]
pub struct GlobalArgs {
    /// Seed for every random draw; overrides the seed in config files.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// env_logger filter, e.g. `info` or `augssl_core=debug`.
    #[arg(long, global = true, default_value = "warn")]
    pub log_level: String,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Generate a synthetic labelled speech corpus or a noise corpus.
    SynthCorpus(SynthCorpusArgs),
    /// Write one AFEA log-mel file per manifest entry.
    Featurize(FeaturizeArgs),
    /// Grow a base corpus by an integer ratio.
    Augment(AugmentArgs),
    /// Pre-train an APC model.
    Pretrain(PretrainArgs),
    /// Fit a frame-level phoneme probe.
    Finetune(FinetuneArgs),
    /// Score a probe on a labelled manifest.
    Evaluate(EvaluateArgs),
    /// Run an augmentation-ratio grid.
    Experiment(ExperimentArgs),
    /// Summarize a finished grid.
    Report(ReportArgs),
    /// Check analytic gradients against finite differences.
    Gradcheck(GradcheckArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CorpusKind {
    Speech,
    Noise,
}

#[derive(Debug, Args, Serialize)]
pub struct SynthCorpusArgs {
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, value_enum, default_value = "speech")]
    pub kind: CorpusKind,
    /// Utterances (speech) or files (noise).
    #[arg(long, default_value_t = 50)]
    pub count: usize,
    #[arg(long, default_value_t = 2.0)]
    pub duration: f64,
    #[arg(long, default_value_t = 5)]
    pub classes: usize,
    #[arg(long)]
    pub id_prefix: Option<String>,
    /// Scales every class frequency; use e.g. 1.15 for a second "accent".
    #[arg(long, default_value_t = 1.0)]
    pub formant_scale: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct FeaturizeArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// FeatureConfig JSON; normalization is always skipped on disk.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum AugmentKind {
    Noise,
    Pitch,
    Mix,
    Corpus,
}

#[derive(Debug, Args, Serialize)]
pub struct AugmentArgs {
    #[arg(long)]
    pub base: PathBuf,
    #[arg(long, value_enum)]
    pub strategy: AugmentKind,
    #[arg(long)]
    pub ratio: u32,
    #[arg(long)]
    pub noise_manifest: Option<PathBuf>,
    #[arg(long)]
    pub other_manifest: Option<PathBuf>,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Comma-separated SNR choices in dB.
    #[arg(long, value_delimiter = ',', default_values_t = [5.0, 10.0, 15.0])]
    pub snr_db: Vec<f64>,
    #[arg(long, default_value_t = 2.0)]
    pub max_semitones: f64,
    #[arg(long, default_value_t = 0.25)]
    pub dead_zone: f64,
    /// With `mix`, apply pitch then noise to every copy instead of one of them.
    #[arg(long)]
    pub stack_effects: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct PretrainArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// PretrainConfig JSON; missing keys take defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub hidden_dim: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    /// Loss curve CSV (default: `<out>.loss.csv`).
    #[arg(long)]
    pub loss_curve: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct FinetuneArgs {
    /// APC checkpoint; omit together with `--identity` to probe raw features.
    #[arg(long, required_unless_present = "identity")]
    pub ckpt: Option<PathBuf>,
    #[arg(long, conflicts_with = "ckpt")]
    pub identity: bool,
    #[arg(long)]
    pub manifest: PathBuf,
    /// FinetuneConfig JSON; missing keys take defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Train the backbone too.
    #[arg(long)]
    pub unfreeze: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub probe: PathBuf,
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub report: PathBuf,
    /// Labels copied into the report row.
    #[arg(long, default_value = "")]
    pub run_id: String,
    #[arg(long, default_value = "")]
    pub strategy: String,
    #[arg(long)]
    pub ratio: Option<u32>,
}

#[derive(Debug, Args, Serialize)]
pub struct ExperimentArgs {
    #[arg(long)]
    pub spec: PathBuf,
    /// Overrides `output_dir` in the spec.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Stop after training this many new cells (rerun to resume).
    #[arg(long)]
    pub max_cells: Option<usize>,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReportKind {
    Deltas,
    Scaling,
}

#[derive(Debug, Args, Serialize)]
pub struct ReportArgs {
    #[arg(long)]
    pub dir: PathBuf,
    #[arg(long, value_enum)]
    pub kind: ReportKind,
    #[arg(long)]
    pub out: PathBuf,
    /// Restrict the delta table to one ratio.
    #[arg(long)]
    pub ratio: Option<u32>,
}

#[derive(Debug, Args, Serialize)]
pub struct GradcheckArgs {
    #[arg(long, default_value_t = 5)]
    pub instances: usize,
}
