//! Reading order relations as attention bias: element relations are lifted
//! to a token-level `n×n` 0/1 matrix that relation-aware attention adds,
//! weighted per layer, to its logits.

mod demo;

use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::layout::LayoutError;
use crate::nn::{encode, BiasLayers, EncoderConfig, EncoderInput, NnError, ParameterStore, RelationBias, Tensor};
use crate::order::{is_acyclic, transitive_closure, OrderError, Relation};
use crate::rop::RopError;

pub use demo::{rore_demo_entity_linking, ArmResult, DemoReport, LabelSource, RoreDemoConfig};

#[derive(Debug, Error)]
pub enum RoreError {
    #[error("relation has a cycle through {0:?}")]
    Cyclic(Vec<usize>),
    #[error("invalid span map: {0}")]
    Spans(String),
    #[error("documents without link labels: {}", .0.join(", "))]
    MissingLinks(Vec<String>),
    #[error(transparent)]
    Layout(#[from] LayoutError),
    #[error(transparent)]
    Order(#[from] OrderError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Rop(#[from] RopError),
}

/// Immediate successions as given, or their transitive closure.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RelationKind {
    #[default]
    Isdr,
    Gsdr,
}

impl std::fmt::Display for RelationKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            RelationKind::Isdr => "isdr",
            RelationKind::Gsdr => "gsdr",
        })
    }
}

/// Contiguous token range of every element; ranges are ordered, disjoint
/// and cover `0..n`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SpanMap {
    spans: Vec<Range<usize>>,
    tokens: usize,
}

impl SpanMap {
    pub fn new(spans: Vec<Range<usize>>) -> Result<Self, RoreError> {
        let mut next = 0;
        for (i, s) in spans.iter().enumerate() {
            if s.start != next || s.end < s.start {
                return Err(RoreError::Spans(format!("element {i} spans {s:?}, expected start {next}")));
            }
            next = s.end;
        }
        Ok(Self { spans, tokens: next })
    }

    pub fn elements(&self) -> usize {
        self.spans.len()
    }

    pub fn tokens(&self) -> usize {
        self.tokens
    }

    pub fn span(&self, element: usize) -> Range<usize> {
        self.spans[element].clone()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RelationMatrix {
    pub n: usize,
    pub bits: Vec<bool>,
    pub kind: RelationKind,
}

#[derive(Serialize)]
struct MatrixJson {
    n: usize,
    ones: Vec<[usize; 2]>,
}

impl RelationMatrix {
    pub fn get(&self, a: usize, b: usize) -> bool {
        self.bits[a * self.n + b]
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Set positions in row-major (lexicographic) order.
    pub fn ones(&self) -> Vec<[usize; 2]> {
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(|(k, _)| [k / self.n, k % self.n])
            .collect()
    }

    /// `{"n": n, "ones": [[a, b], ...]}`.
    pub fn to_json(&self) -> String {
        serde_json::to_string(&MatrixJson {
            n: self.n,
            ones: self.ones(),
        })
        .expect("matrix serializes")
    }
}

/// Bit `(a, b)` is set when token `a` lies in element `i`, token `b` in
/// element `j`, and `(i, j)` is in the relation (closed first for GSDR).
/// Tokens of the same element are never linked.
pub fn build_relation_matrix(rel: &Relation, spans: &SpanMap, kind: RelationKind) -> Result<RelationMatrix, RoreError> {
    if rel.element_count() != spans.elements() {
        return Err(RoreError::Spans(format!(
            "relation over {} elements, span map has {}",
            rel.element_count(),
            spans.elements()
        )));
    }
    is_acyclic(rel).map_err(|v| RoreError::Cyclic(v.witness))?;
    let closed;
    let rel = match kind {
        RelationKind::Isdr => rel,
        RelationKind::Gsdr => {
            closed = transitive_closure(rel);
            &closed
        }
    };
    let n = spans.tokens();
    let mut bits = vec![false; n * n];
    for (i, j) in rel.pairs() {
        for a in spans.span(i) {
            for b in spans.span(j) {
                bits[a * n + b] = true;
            }
        }
    }
    Ok(RelationMatrix { n, bits, kind })
}

/// Encoder output with the matrix as attention bias in the selected blocks.
pub fn enhanced_encode(
    cfg: &EncoderConfig,
    store: &ParameterStore,
    input: &EncoderInput,
    matrix: &RelationMatrix,
    layers: BiasLayers,
) -> Result<Tensor, RoreError> {
    if matrix.n != input.len() {
        return Err(NnError::Shape(format!("matrix for {} tokens, input has {}", matrix.n, input.len())).into());
    }
    let bias = RelationBias::new(matrix.n, &matrix.bits, layers)?;
    Ok(encode(cfg, store, input, Some(&bias))?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spans(v: &[Range<usize>]) -> SpanMap {
        SpanMap::new(v.to_vec()).unwrap()
    }

    #[test]
    fn isdr_lifts_to_tokens() {
        let m = build_relation_matrix(&Relation::new(2, [(0, 1)]).unwrap(), &spans(&[0..2, 2..3]), RelationKind::Isdr)
            .unwrap();
        assert_eq!(m.ones(), vec![[0, 2], [1, 2]]);
        assert_eq!(m.count_ones(), 2);
        assert_eq!(m.to_json(), r#"{"n":3,"ones":[[0,2],[1,2]]}"#);
    }

    #[test]
    fn gsdr_closes_first() {
        let chain = Relation::new(3, [(0, 1), (1, 2)]).unwrap();
        let m = build_relation_matrix(&chain, &spans(&[0..1, 1..2, 2..3]), RelationKind::Gsdr).unwrap();
        assert_eq!(m.ones(), vec![[0, 1], [0, 2], [1, 2]]);
    }

    #[test]
    fn empty_and_invalid() {
        let m = build_relation_matrix(&Relation::empty(2), &spans(&[0..1, 1..3]), RelationKind::Isdr).unwrap();
        assert_eq!(m.count_ones(), 0);
        let cyc = Relation::new(2, [(0, 1), (1, 0)]).unwrap();
        assert!(matches!(
            build_relation_matrix(&cyc, &spans(&[0..1, 1..2]), RelationKind::Gsdr),
            Err(RoreError::Cyclic(_))
        ));
        assert!(build_relation_matrix(&Relation::empty(3), &spans(&[0..1, 1..2]), RelationKind::Isdr).is_err());
        assert!(SpanMap::new(vec![0..1, 2..3]).is_err());
    }
}
