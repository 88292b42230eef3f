//! Minimal f64 tensor engine with tape-based reverse-mode differentiation,
//! an optimizer, and the text+layout encoder built on top of it.

mod attention;
pub mod checkpoint;
pub mod encoder;
mod gradcheck;
mod graph;
mod loss;
mod optim;
mod params;
mod tensor;

pub use attention::{attention, multi_head_attention, AttentionBias, AttentionOutput};
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, FORMAT_VERSION};
pub use encoder::{
    encode, encoder_forward, init_encoder_params, BiasLayers, EncoderConfig, EncoderInput, RelationBias,
};
pub use gradcheck::{grad_check, GradCheckOptions, GradCheckReport};
pub use graph::{Gradients, Graph, NodeId};
pub use loss::{pair_loss, PairLoss};
pub use optim::AdamW;
pub use params::{Param, ParamOptions, ParameterStore};
pub use tensor::Tensor;

#[derive(Debug, thiserror::Error)]
pub enum NnError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("parameter {0} already exists")]
    DuplicateParam(String),
    #[error("unknown parameter {0}")]
    MissingParam(String),
    #[error("parameter {0} has no gradient")]
    MissingGradient(String),
    #[error("{got} tokens exceed the limit of {max}")]
    TooManyTokens { got: usize, max: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}
