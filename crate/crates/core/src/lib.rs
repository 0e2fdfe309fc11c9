//! Multi-negative Plackett–Luce preference optimization with
//! sparse-autoencoder-guided selection of diverse negatives.
//!
//! * [`embed`]: fused prompt–image embeddings, difference vectors, cosine,
//!   PCA export and the embedding file formats.
//! * [`sae`]: sparse autoencoder with KL sparsity, analytic gradients and a
//!   deterministic trainer.
//! * [`negselect`]: candidate scoring and greedy diversity-promoting selection.
//! * [`pl_dpo`]: pairwise and multi-negative DPO losses, the softmax-weighted
//!   gradient decomposition and importance-sampling estimators.
//! * [`toy`]: a small differentiable policy and planted-factor tasks that
//!   drive the whole pipeline end to end.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`). The aliases
//! below fix the scalar to `f64`, which is what the CLI uses.

pub mod embed;
pub mod error;
pub mod gradcheck;
pub mod linalg;
pub mod negselect;
pub mod numeric;
pub mod pl_dpo;
pub mod sae;
pub mod scalar;
pub mod toy;

pub use error::{ErrorKind, MispError, Result};
pub use scalar::Scalar;

pub type Embedding = embed::Embedding<f64>;
pub type FusedEmbedding = embed::FusedEmbedding<f64>;
pub type DifferenceVector = embed::DifferenceVector<f64>;
pub type SaeModel = sae::SaeModel<f64>;
pub type SaeConfig = sae::SaeConfig<f64>;
pub type SaeGradient = sae::SaeGradient<f64>;
pub type CandidateScore = negselect::CandidateScore<f64>;
pub type SelectionConfig = negselect::SelectionConfig<f64>;
pub type SelectionManifest = negselect::SelectionManifest<f64>;
pub type PreferenceInstance = pl_dpo::PreferenceInstance<f64>;
pub type DpoConfig = pl_dpo::DpoConfig<f64>;
pub type MnGradientReport = pl_dpo::MnGradientReport<f64>;
pub type ToyPolicy = toy::ToyPolicy<f64>;
pub type ToyContext = toy::ToyContext<f64>;

pub type SaeModel32 = sae::SaeModel<f32>;
pub type SaeConfig32 = sae::SaeConfig<f32>;
pub type PreferenceInstance32 = pl_dpo::PreferenceInstance<f32>;
