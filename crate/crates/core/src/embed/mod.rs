//! Relation-aware graph attention embeddings for a pair of graphs.
//!
//! Both graphs go through one forward pass over the union index with a single
//! shared parameter set. Each layer aggregates neighbor states reflected
//! through the hyperplane of the connecting relation,
//!
//! ```text
//! h_i' = tanh( sum_j a_ij * (h_j - 2 (r·h_j) r) )
//! a_ij = softmax_j( q · tanh(h_i + h_j) )
//! ```
//!
//! and the output row of an entity concatenates the initial embedding with
//! every layer's output. Gradients are derived by hand; see [`model`].

mod loss;
pub mod model;
mod params;
mod reflect;
mod train;

pub use loss::{
    augment_seeds, pair_distance, triplet_loss, triplet_loss_with_grad, update_negative_pool,
    NegativePool,
};
pub use model::{
    attention_weights, forward, forward_with_cache, loss_and_gradients, ragat_layer, ForwardCache,
    ParamGrads,
};
pub use params::{init_parameters, Activation, ModelParams, TrainConfig};
pub use reflect::{materialize_reflection, reflect, reflect_unchecked};
pub use train::{train, EpochStats, RmsProp, TrainOutcome};

#[derive(Debug, thiserror::Error)]
pub enum EmbedError {
    #[error("relation vector is not unit length (norm {norm})")]
    NotUnit { norm: f64 },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },
    #[error("the {side:?} graph needs at least 2 entities to pick a negative, found {found}")]
    TooFewNegatives {
        side: crate::kg::Side,
        found: usize,
    },
    #[error("seed ({source_id}, {target_id}) does not exist in the graph pair")]
    UnknownSeed { source_id: u64, target_id: u64 },
    #[error("non-finite loss {loss} at epoch {epoch}, step {step}")]
    NonFinite { epoch: usize, step: usize, loss: f64 },
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error("no training seeds")]
    NoSeeds,
    #[error("checkpoint i/o: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = EmbedError> = std::result::Result<T, E>;
