//! Reading order of document layouts modelled as relations between layout
//! elements rather than as a single permutation.
//!
//! - [`order`]: relation algebra (acyclicity, transitive closure, order checks, linearization)
//! - [`layout`]: documents, corpus I/O, word-level label derivation, statistics, synthetic layouts
//! - [`nn`]: a small f64 tensor engine with reverse-mode gradients and a text+layout encoder
//! - [`rop`]: pair-scoring reading order predictor (pooling, scoring head, loss, decoding, training)
//! - [`rore`]: token-level relation matrices and relation-aware encoding
//! - [`eval`]: pair metrics, geometric baselines and benchmark reports
//! - [`render`]: SVG rendering of a document and its relation

pub mod order;
pub mod layout;
pub mod nn;
pub mod rop;
pub mod eval;
pub mod rore;
pub mod render;
