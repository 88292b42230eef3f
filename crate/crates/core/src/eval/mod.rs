//! Pair metrics, a row-major geometric baseline, adapters from word
//! sequences to relations, and benchmark reports.

mod baseline;
mod metrics;
mod report;

use thiserror::Error;

use crate::layout::LayoutError;
use crate::order::OrderError;
use crate::rop::RopError;

pub use baseline::{heuristic_reading_order, heuristic_relation, sequence_to_relation};
pub use metrics::{corpus_f1, pair_f1, PairMetrics};
pub use report::{benchmark_report, BenchmarkReport, Ceiling, System, SystemScore};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("gold relation over {gold} elements, prediction over {pred}")]
    ElementCount { gold: usize, pred: usize },
    #[error("not a permutation of the document's {expected} words: {message}")]
    NotAPermutation { expected: usize, message: String },
    #[error(transparent)]
    Layout(#[from] LayoutError),
    #[error(transparent)]
    Order(#[from] OrderError),
    #[error(transparent)]
    Rop(#[from] RopError),
}
