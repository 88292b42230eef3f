//! Layout data model: boxes, words, segments, documents and corpora, plus
//! corpus files, word-level label derivation, statistics and synthetic pages.

mod derive;
pub mod io;
mod stats;
pub mod synth;
mod types;
mod validate;

use std::path::PathBuf;

use thiserror::Error;

use crate::order::OrderError;

pub use derive::{collapse_to_segments, derive_word_level};
pub use io::{load_corpus, save_corpus, DocumentRecord};
pub use stats::{corpus_stats, nonlinear_stats, CorpusStats, DocumentNonLinear, NonLinearDefinition, NonLinearStats};
pub use synth::{synth_generate, LayoutMix, LayoutSpec, SynthConfig};
pub use types::{BBox, Corpus, Document, Segment, Split, Word, COORD_MAX};
pub use validate::{validate_annotation, validate_document, AnnotationReport};

#[derive(Debug, Error)]
pub enum LayoutError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("document {doc}: {message}")]
    Validation { doc: String, message: String },
    #[error("document {0} has no isdr annotation")]
    MissingIsdr(String),
    #[error("documents without isdr annotation: {}", .0.join(", "))]
    MissingIsdrMany(Vec<String>),
    #[error("generation failed: {0}")]
    Generation(String),
    #[error(transparent)]
    Order(#[from] OrderError),
}

impl LayoutError {
    /// True for failures reading, writing or parsing files.
    pub fn is_io(&self) -> bool {
        matches!(self, LayoutError::Io { .. } | LayoutError::Parse { .. })
    }
}
