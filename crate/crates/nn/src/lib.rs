//! Small reverse-mode autodiff library over `f64` tensors, with the layers
//! and optimizer needed by the ChainHOI denoiser.

pub mod checkpoint;
pub mod error;
pub mod gradcheck;
pub mod layers;
pub mod module;
pub mod ops;
pub mod optim;
pub mod tensor;

pub use error::{NnError, Result};
pub use layers::{
    sinusoidal, Embedding, FeedForward, GraphConv, LayerNorm, Linear, MultiHeadAttention, TemporalConfig,
    TemporalMultiBranch, TEMPORAL_BRANCHES,
};
pub use module::Module;
pub use ops::nnops::Mask;
pub use optim::AdamW;
pub use tensor::{Gradients, Tensor};
