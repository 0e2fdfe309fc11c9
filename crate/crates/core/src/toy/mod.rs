//! Desk-scale stand-ins for the policy and the data: a softmax bag-of-tokens
//! policy, planted-factor candidate pools, and an end-to-end training loop
//! that selects negatives with the SAE pipeline and descends the combined
//! preference loss.

mod planted;
mod policy;
mod sparse;
mod training;

pub use planted::{coverage, make_planted_pool, PlantedFactorSpec, PlantedPool};
pub use sparse::{make_sparse_dataset, SparseDatasetSpec};
pub use policy::{toy_logprob, toy_logprob_grad, ToyContext, ToyPolicy};
pub use training::{
    build_task, heldout_margin, run_toy_training, write_trace, Sampler, ToyTask, ToyTrace, ToyTrainConfig,
    TraceRecord,
};
