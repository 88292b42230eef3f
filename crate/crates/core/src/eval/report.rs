use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;

use crate::layout::{Corpus, Document};
use crate::order::{
    best_permutation_recall, permutation_to_relation, topological_linearization, Relation, TieBreak,
    BRUTE_FORCE_LIMIT,
};
use crate::rop::RopModel;

use super::{heuristic_relation, EvalError, PairMetrics};

/// A reading order system under evaluation.
pub enum System<'a> {
    Model { name: String, model: &'a RopModel },
    /// Row-major banding heuristic.
    Heuristic,
    /// Best single permutation for the gold relation: exhaustive on documents
    /// of at most nine segments, a geometric linear extension beyond that.
    PermutationOracle,
}

impl System<'_> {
    pub fn name(&self) -> String {
        match self {
            System::Model { name, .. } => name.clone(),
            System::Heuristic => "heuristic".into(),
            System::PermutationOracle => "permutation-oracle".into(),
        }
    }

    fn predict(&self, doc: &Document, gold: &Relation) -> Result<Relation, EvalError> {
        match self {
            System::Model { model, .. } => match model.predict_segments(doc) {
                Ok(r) => Ok(r),
                Err(e) if e.is_overflow() => {
                    log::warn!("{e}; scored as an empty prediction");
                    Ok(Relation::empty(doc.segment_count()))
                }
                Err(e) => Err(e.into()),
            },
            System::Heuristic => Ok(heuristic_relation(doc)),
            System::PermutationOracle => {
                let perm = if doc.segment_count() <= BRUTE_FORCE_LIMIT {
                    best_permutation_recall(gold)?.permutation
                } else {
                    let geometry = doc.segments.iter().map(|s| [s.bbox.y0 as i64, s.bbox.x0 as i64]).collect();
                    topological_linearization(gold, &TieBreak::Geometry(geometry))?
                };
                Ok(permutation_to_relation(&perm)?)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SystemScore {
    pub name: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub docs: usize,
    #[serde(skip)]
    pub metrics: PairMetrics,
}

/// Structural recall ceiling of any permutation-based system.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Ceiling {
    /// Mean best-permutation recall over documents small enough for
    /// exhaustive search; `None` when there are none.
    pub mean_best_recall: Option<f64>,
    pub docs: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchmarkReport {
    pub systems: Vec<SystemScore>,
    pub ceiling: Ceiling,
}

impl BenchmarkReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Aligned plain-text table.
    pub fn to_text(&self) -> String {
        let width = self.systems.iter().map(|s| s.name.len()).max().unwrap_or(0).max(6);
        let mut out = String::new();
        let _ = writeln!(out, "{:<width$}  {:>9}  {:>9}  {:>9}  {:>6}", "system", "precision", "recall", "f1", "docs");
        for s in &self.systems {
            let _ = writeln!(
                out,
                "{:<width$}  {:>9.4}  {:>9.4}  {:>9.4}  {:>6}",
                s.name, s.precision, s.recall, s.f1, s.docs
            );
        }
        match self.ceiling.mean_best_recall {
            Some(r) => {
                let _ = writeln!(out, "permutation recall ceiling: {r:.4} over {} documents", self.ceiling.docs);
            }
            None => {
                let _ = writeln!(out, "permutation recall ceiling: n/a");
            }
        }
        out
    }
}

/// Micro pair-F1 of each system on the segment-level gold relations.
pub fn benchmark_report(corpus: &Corpus, systems: &[System<'_>]) -> Result<BenchmarkReport, EvalError> {
    let docs: Vec<(&Document, &Relation)> = corpus
        .documents
        .iter()
        .map(|d| Ok((d, d.require_isdr()?)))
        .collect::<Result<_, EvalError>>()?;
    let mut scores = Vec::new();
    for system in systems {
        let parts = docs
            .par_iter()
            .map(|(doc, gold)| PairMetrics::of(gold, &system.predict(doc, gold)?))
            .collect::<Result<Vec<_>, _>>()?;
        let m = parts.iter().fold(PairMetrics::from_counts(0, 0, 0), |a, b| a.merge(b));
        scores.push(SystemScore {
            name: system.name(),
            precision: m.precision,
            recall: m.recall,
            f1: m.f1,
            docs: docs.len(),
            metrics: m,
        });
    }
    let recalls = docs
        .par_iter()
        .filter(|(d, _)| d.segment_count() <= BRUTE_FORCE_LIMIT)
        .map(|(_, gold)| best_permutation_recall(gold).map(|r| r.recall))
        .collect::<Result<Vec<_>, _>>()?;
    let ceiling = Ceiling {
        mean_best_recall: (!recalls.is_empty()).then(|| recalls.iter().sum::<f64>() / recalls.len() as f64),
        docs: recalls.len(),
    };
    Ok(BenchmarkReport { systems: scores, ceiling })
}
