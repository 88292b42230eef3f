//! Ordering relations over layout elements.
//!
//! Immediate succession between elements is a directed acyclic relation;
//! its transitive closure is a strict partial order. This module provides the
//! relation type, closure, order-property checks with violation witnesses,
//! and conversions between permutations and relations.

mod closure;
mod linearize;
mod properties;
mod relation;

use std::fmt;

use thiserror::Error;

pub use closure::{transitive_closure, transitive_closure_bfs, transitive_closure_warshall, WARSHALL_LIMIT};
pub use linearize::{
    best_permutation_recall, permutation_to_relation, topological_linearization, PermutationRecall,
    TieBreak, BRUTE_FORCE_LIMIT,
};
pub use properties::{find_cycle, is_acyclic, is_strict_partial_order, is_strict_total_order};
pub use relation::Relation;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ViolationKind {
    Cycle,
    ReflexivePair,
    AntisymmetryPair,
    MissingTransitivePair,
    IncomparablePair,
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ViolationKind::Cycle => "cycle",
            ViolationKind::ReflexivePair => "reflexive-pair",
            ViolationKind::AntisymmetryPair => "antisymmetry-pair",
            ViolationKind::MissingTransitivePair => "missing-transitive-pair",
            ViolationKind::IncomparablePair => "incomparable-pair",
        };
        f.write_str(s)
    }
}

/// The first property violation found by a deterministic scan.
///
/// `witness` is never empty. For a cycle it lists the closed walk with the
/// start repeated at the end; for a missing transitive pair it is `[i, j, k]`
/// where `(i, j)` and `(j, k)` are present but `(i, k)` is not.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrderViolation {
    pub kind: ViolationKind,
    pub witness: Vec<usize>,
}

impl fmt::Display for OrderViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {:?}", self.kind, self.witness)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OrderError {
    #[error("pair {pair:?} out of range for {element_count} elements")]
    IndexOutOfRange {
        pair: (usize, usize),
        element_count: usize,
    },
    #[error("invalid permutation: {0}")]
    InvalidPermutation(String),
    #[error("relation is cyclic: {witness:?}")]
    Cycle { witness: Vec<usize> },
    #[error("{n} elements exceeds the brute-force limit of {max}")]
    TooLarge { n: usize, max: usize },
    #[error("tie-break key has {got} entries, expected {expected}")]
    KeyLength { expected: usize, got: usize },
}
