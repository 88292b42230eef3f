//! Reading order as relation extraction: element embeddings are pooled from
//! the encoder, every ordered pair is scored by a pointer head, and pairs with
//! a positive score are predicted as immediate successions.

mod decode;
mod head;
mod model;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::layout::LayoutError;
use crate::nn::{BiasLayers, NnError};
use crate::order::OrderError;

pub use decode::decode;
pub use head::{gp_loss, pool_elements, score_pairs, GlobalPointerHead, ScoreMatrix};
pub use model::{
    loss_graph, predict_pseudo_labels, train, train_examples, Example, PredictionReport, PredictionSummary, RopModel, TrainReport,
};

#[derive(Debug, Error)]
pub enum RopError {
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Layout(#[from] LayoutError),
    #[error(transparent)]
    Order(#[from] OrderError),
    #[error("document {doc}: {got} elements exceed the limit of {max}")]
    TooManyElements { doc: String, got: usize, max: usize },
    #[error("document {doc}: {got} tokens exceed the limit of {max}")]
    TooManyTokens { doc: String, got: usize, max: usize },
    #[error("no usable training documents")]
    EmptyTrainingSplit,
    #[error("invalid configuration: {0}")]
    Config(String),
}

impl RopError {
    /// Document-size violations; training and prediction skip such documents.
    pub fn is_overflow(&self) -> bool {
        matches!(self, RopError::TooManyElements { .. } | RopError::TooManyTokens { .. })
    }
}

/// Granularity of reading order elements or of the boxes fed to the encoder.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Word,
    #[default]
    Segment,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RopConfig {
    pub task_level: Level,
    pub bbox_level: Level,
    /// Defaults to 512 at word level and 256 at segment level.
    pub max_elements: Option<usize>,
    pub max_tokens: usize,
    pub threshold: f64,
    pub enforce_acyclic: bool,
    pub seed: u64,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    pub patience: usize,
    pub batch_size: usize,
    pub head_size: usize,
    /// Leave the `(i, i)` entries out of the loss's negative set.
    pub mask_diagonal: bool,
    /// Blocks that receive an example's token relation, when it has one.
    pub bias_layers: BiasLayers,
}

impl Default for RopConfig {
    fn default() -> Self {
        Self {
            task_level: Level::Segment,
            bbox_level: Level::Segment,
            max_elements: None,
            max_tokens: 2048,
            threshold: 0.0,
            enforce_acyclic: false,
            seed: 0,
            learning_rate: 1e-3,
            weight_decay: 0.01,
            epochs: 200,
            patience: 20,
            batch_size: 8,
            head_size: 128,
            mask_diagonal: false,
            bias_layers: BiasLayers::All,
        }
    }
}

impl RopConfig {
    pub fn element_limit(&self) -> usize {
        self.max_elements.unwrap_or(match self.task_level {
            Level::Word => 512,
            Level::Segment => 256,
        })
    }

    pub fn validate(&self) -> Result<(), RopError> {
        if self.element_limit() == 0 || self.max_tokens == 0 || self.batch_size == 0 || self.head_size == 0 {
            return Err(RopError::Config(
                "max_elements, max_tokens, batch_size and head_size must be positive".into(),
            ));
        }
        if !(self.learning_rate > 0.0) || !self.threshold.is_finite() {
            return Err(RopError::Config("learning_rate must be positive and threshold finite".into()));
        }
        Ok(())
    }
}
