use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

const EXIT_CODES: &str = "Exit codes: 0 success, 2 configuration error, 3 data error, \
4 numeric divergence, 5 check failure.\nThe default seed comes from MISP_SEED; --seed overrides it.";

#[derive(Debug, Parser)]
#[command(name = "misp", version, about = "SAE-guided multi-negative preference pipelines", after_help = EXIT_CODES)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fuse image and text embeddings (matched by id) into the binary format.
    Fuse(FuseArgs),
    /// Train a sparse autoencoder on difference vectors.
    TrainSae(TrainSaeArgs),
    /// Score candidates and greedily select diverse negatives per positive.
    Select(SelectArgs),
    /// Train the toy policy on a planted task and write a metric trace.
    TrainToy(TrainToyArgs),
    /// Compare analytic gradients against finite differences.
    GradCheck(GradCheckArgs),
    /// Write 2-D PCA coordinates of a candidate pool, flagging selected rows.
    ExportViz(ExportVizArgs),
    /// Emit synthetic datasets.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct FuseArgs {
    /// Image embeddings (JSONL or binary).
    #[arg(long)]
    pub image: Option<PathBuf>,
    /// Text embeddings (JSONL or binary).
    #[arg(long)]
    pub text: Option<PathBuf>,
    /// Fused output in the binary format; ids go to `<output>.ids`.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Project fused vectors wider than this with a seeded random-sign map.
    #[arg(long)]
    pub max_dim: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Default, Args, Serialize)]
pub struct SaeFlags {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hidden_dim: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sparsity_weight: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target_activation: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub batch_size: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epochs: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// adam or sgd
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub optimizer: Option<String>,
}

#[derive(Debug, Args)]
pub struct TrainSaeArgs {
    /// Difference vectors (JSONL or binary).
    #[arg(long)]
    pub diffs: Option<PathBuf>,
    /// Output checkpoint (misp-sae-v1 JSON).
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Loss history JSON; defaults to `<checkpoint>.history.json`.
    #[arg(long)]
    pub history: Option<PathBuf>,
    #[command(flatten)]
    pub sae: SaeFlags,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Default, Args, Serialize)]
pub struct SelectionFlags {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diversity_weight: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DiversitySpace {
    /// Cosine between SAE codes.
    Code,
    /// Cosine between the difference vectors themselves.
    Difference,
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    /// Fused positives (JSONL or binary).
    #[arg(long)]
    pub positives: Option<PathBuf>,
    /// Fused candidates. Ids of the form `<positive id>:<name>` form that
    /// positive's pool; otherwise every candidate is in every pool.
    #[arg(long)]
    pub candidates: Option<PathBuf>,
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// JSON-lines output, one manifest per positive.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[command(flatten)]
    pub selection: SelectionFlags,
    #[arg(long, value_enum, default_value_t = DiversitySpace::Code)]
    pub diversity_space: DiversitySpace,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Default, Args, Serialize)]
pub struct DpoFlags {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
}

#[derive(Debug, Default, Args, Serialize)]
pub struct ToyFlags {
    #[command(flatten)]
    pub dpo: DpoFlags,
    /// diverse, top-score or random
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sampler: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub num_negatives: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diversity_weight: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vocab: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub num_factors: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prompt_dim: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub train_instances: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub heldout_instances: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub candidates_per_factor: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub context_noise: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub init_scale: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sae_hidden: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sae_epochs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TrainToyArgs {
    /// JSON-lines metric trace.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    #[command(flatten)]
    pub toy: ToyFlags,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
pub enum Scope {
    Sae,
    #[value(name = "pl_dpo", alias = "pl-dpo")]
    #[serde(rename = "pl_dpo")]
    PlDpo,
    Toy,
}

#[derive(Debug, Args)]
pub struct GradCheckArgs {
    #[arg(value_enum)]
    pub scope: Scope,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct ExportVizArgs {
    /// Selection manifests (JSON lines).
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// The fused candidates the manifest was built from.
    #[arg(long)]
    pub candidates: Option<PathBuf>,
    /// Which manifest to plot; defaults to the first.
    #[arg(long)]
    pub positive_id: Option<String>,
    /// CSV with columns id,x,y,label.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[command(subcommand)]
    pub kind: SynthKind,
}

#[derive(Debug, Subcommand)]
pub enum SynthKind {
    /// Rows that are sparse combinations of orthonormal atoms.
    Sparse {
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value_t = 2000)]
        rows: usize,
        #[arg(long, default_value_t = 64)]
        dim: usize,
        #[arg(long, default_value_t = 32)]
        num_atoms: usize,
        #[arg(long, default_value_t = 3)]
        active_atoms: usize,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Positives with planted-factor candidate pools. Writes positives.jsonl,
    /// candidates.jsonl, diffs.jsonl and labels.jsonl into the directory.
    Planted {
        #[arg(long)]
        output_dir: PathBuf,
        #[arg(long, default_value_t = 1)]
        prompts: usize,
        #[arg(long, default_value_t = 4)]
        num_factors: usize,
        #[arg(long, default_value_t = 3)]
        samples_per_factor: usize,
        #[arg(long, default_value_t = 0.05)]
        factor_noise: f64,
        #[arg(long, default_value_t = 16)]
        dim: usize,
        #[arg(long)]
        seed: Option<u64>,
    },
}
