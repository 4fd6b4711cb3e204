use std::fmt::Display;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use dmbn_core::graph::SynthParams;
use dmbn_core::layers::InitFeatures;
use dmbn_core::saliency::DEFAULT_TOP_K;
use dmbn_core::training::Ablation;
use dmbn_core::{ModelConfig, TrainConfig};

fn with_default(text: &str, value: impl Display) -> String {
    format!("{text} [default: {value}]")
}

fn train_default() -> TrainConfig {
    TrainConfig::default()
}

fn model_default() -> ModelConfig {
    ModelConfig::default()
}

fn synth_default() -> SynthParams {
    SynthParams::default()
}

fn parse_init_features(s: &str) -> Result<InitFeatures, String> {
    match s {
        "adjacency-row" => Ok(InitFeatures::AdjacencyRow),
        "one-hot" => Ok(InitFeatures::OneHot),
        _ => Err(format!(
            "unknown init features `{s}` (expected adjacency-row or one-hot)"
        )),
    }
}

/// Deep multimodal brain networks: structural-to-functional encoders,
/// subject classification and node saliency.
#[derive(Debug, Parser)]
#[command(name = "dmbn", version)]
pub struct Cli {
    /// Worker threads for per-subject parallelism (0 = all cores)
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic paired structural/functional cohort
    Synth(SynthArgs),
    /// Cross-validated training with per-fold checkpoints and loss curves
    Train(TrainArgs),
    /// Predict functional connectivity from structure and score it
    Reconstruct(ReconstructArgs),
    /// Group node saliency from a trained checkpoint
    Saliency(SaliencyArgs),
    /// Finite-difference check of every loss gradient on a small model
    Gradcheck(GradcheckArgs),
    /// Cross-validate every (μ1, μ2) pair of the loss-weight grid
    Grid(TrainArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Output dataset directory
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = synth_default().n_subjects)]
    pub subjects: usize,
    #[arg(long, default_value_t = synth_default().n_nodes)]
    pub nodes: usize,
    #[arg(long, default_value_t = synth_default().n_classes)]
    pub classes: usize,
    /// Structural modules
    #[arg(long, default_value_t = synth_default().n_modules)]
    pub modules: usize,
    /// Edge probability within a module
    #[arg(long, default_value_t = synth_default().p_in)]
    pub p_in: f64,
    /// Edge probability between modules
    #[arg(long, default_value_t = synth_default().p_out)]
    pub p_out: f64,
    #[arg(long, default_value_t = synth_default().diffusion_time)]
    pub diffusion_time: f64,
    /// Planted nodes per class
    #[arg(long, default_value_t = synth_default().planted_size)]
    pub planted_size: usize,
    /// Functional boost among a class's planted nodes
    #[arg(long, default_value_t = synth_default().delta)]
    pub delta: f64,
    /// Functional noise standard deviation
    #[arg(long, default_value_t = synth_default().noise)]
    pub noise: f64,
    #[arg(
        long,
        help = with_default(
            "Structural edge probability among a class's planted nodes",
            synth_default().planted_edge_prob.map_or("none".into(), |p| p.to_string()),
        )
    )]
    pub planted_edge_prob: Option<f64>,
    /// Keep the structural graphs class-independent
    #[arg(long, conflicts_with = "planted_edge_prob")]
    pub class_independent_structure: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl SynthArgs {
    pub fn params(&self) -> SynthParams {
        SynthParams {
            n_subjects: self.subjects,
            n_nodes: self.nodes,
            n_classes: self.classes,
            n_modules: self.modules,
            p_in: self.p_in,
            p_out: self.p_out,
            diffusion_time: self.diffusion_time,
            planted_size: self.planted_size,
            delta: self.delta,
            noise: self.noise,
            planted_edge_prob: if self.class_independent_structure {
                None
            } else {
                self.planted_edge_prob.or(synth_default().planted_edge_prob)
            },
            seed: self.seed,
        }
    }
}

/// Training flags; each overrides the matching `--config` entry.
#[derive(Debug, Default, Args)]
pub struct TrainOpts {
    /// JSON run configuration (`model`, `train`, `data`, `out`)
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Dataset directory
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Output directory
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, help = with_default("Training epochs", train_default().epochs))]
    pub epochs: Option<usize>,
    #[arg(long, help = with_default("Learning rate", train_default().optimizer.lr))]
    pub lr: Option<f64>,
    #[arg(long, help = with_default("Weight decay", train_default().optimizer.weight_decay))]
    pub weight_decay: Option<f64>,
    #[arg(long, help = "Subjects per gradient step [default: full batch]")]
    pub batch_size: Option<usize>,
    /// Use the whole training set for every step
    #[arg(long, conflicts_with = "batch_size")]
    pub full_batch: bool,
    #[arg(long, help = with_default("Seed for initialization, folds and batching", train_default().seed))]
    pub seed: Option<u64>,
    #[arg(long, help = with_default("Cross-validation folds", train_default().folds))]
    pub folds: Option<usize>,
    #[arg(long, help = with_default(
        "Early-stopping patience in epochs",
        train_default().patience.map_or("off".into(), |p| p.to_string()),
    ))]
    pub patience: Option<usize>,
    /// Train for the full epoch budget
    #[arg(long, conflicts_with = "patience")]
    pub no_early_stop: bool,
    #[arg(long, help = with_default(
        "Share of each class held out for early stopping",
        train_default().validation_fraction,
    ))]
    pub validation_fraction: Option<f64>,
    #[arg(long, help = with_default("Global reconstruction loss weight μ1", train_default().loss.global))]
    pub mu_global: Option<f64>,
    #[arg(long, help = with_default("Local proximity loss weight μ2", train_default().loss.local))]
    pub mu_local: Option<f64>,
    #[arg(long, help = with_default("Structural threshold γ", model_default().gamma))]
    pub gamma: Option<f64>,
    /// Ablation to apply; repeatable (no-recon, no-global, no-local,
    /// no-attention, no-threshold, recon-only)
    #[arg(long, value_name = "NAME")]
    pub ablate: Vec<Ablation>,
    #[arg(long, help = with_default("Width of every MGCK layer", model_default().hidden_dim))]
    pub hidden_dim: Option<usize>,
    #[arg(long, help = with_default("Attention heads per layer", model_default().heads))]
    pub heads: Option<usize>,
    #[arg(long, help = with_default("Positive-branch MGCK layers", model_default().pos_layers))]
    pub pos_layers: Option<usize>,
    #[arg(long, help = with_default("Negative-branch MGCK layers", model_default().neg_layers))]
    pub neg_layers: Option<usize>,
    #[arg(long, value_delimiter = ',', help = with_default(
        "Comma-separated node-wise MLP widths",
        format!("{:?}", model_default().head_hidden),
    ))]
    pub head_hidden: Option<Vec<usize>>,
    #[arg(long, help = with_default("Initial value of every α and β", model_default().mixer_init))]
    pub mixer_init: Option<f64>,
    #[arg(long, value_parser = parse_init_features, help = "Input node features: adjacency-row or one-hot [default: adjacency-row]")]
    pub init_features: Option<InitFeatures>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub opts: TrainOpts,
}

#[derive(Debug, Args)]
pub struct ReconstructArgs {
    #[command(flatten)]
    pub opts: TrainOpts,
    /// Trained checkpoint directory; predicts every subject in --data
    #[arg(long, conflicts_with_all = ["train_recon_only", "oracle_predictions"])]
    pub checkpoint: Option<PathBuf>,
    /// Cross-validate with the supervised loss disabled and score held-out subjects
    #[arg(long, conflicts_with = "oracle_predictions")]
    pub train_recon_only: bool,
    /// Use the targets themselves as predictions
    #[arg(long, hide = true)]
    pub oracle_predictions: bool,
}

#[derive(Debug, Args)]
pub struct SaliencyArgs {
    /// Trained checkpoint directory
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Dataset directory
    #[arg(long)]
    pub data: PathBuf,
    /// Nodes voted for per subject
    #[arg(long, default_value_t = DEFAULT_TOP_K)]
    pub top_k: usize,
    /// Directory for saliency.csv and saliency.json
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Only score the test subjects recorded in the checkpoint
    #[arg(long)]
    pub held_out: bool,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 6)]
    pub nodes: usize,
    #[arg(long, default_value_t = 2)]
    pub subjects: usize,
    /// Central-difference step
    #[arg(long, default_value_t = 1e-5)]
    pub epsilon: f64,
    /// Largest acceptable relative error
    #[arg(long, default_value_t = 1e-4)]
    pub tolerance: f64,
    /// Debug: break one backward rule so the check must fail
    #[arg(long)]
    pub corrupt_backward: bool,
}
