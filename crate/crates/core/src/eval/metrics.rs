use serde::Serialize;

use crate::order::Relation;

use super::EvalError;

/// Exact ordered-pair matching counts and the derived ratios.
///
/// A ratio with an empty denominator is 1.0 when the opposite error count is
/// also zero (nothing predicted and nothing to find) and 0.0 otherwise.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct PairMetrics {
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl PairMetrics {
    pub fn from_counts(tp: usize, fp: usize, fn_: usize) -> Self {
        let ratio = |den: usize, other_err: usize| {
            if den == 0 {
                if other_err == 0 {
                    1.0
                } else {
                    0.0
                }
            } else {
                tp as f64 / den as f64
            }
        };
        let precision = ratio(tp + fp, fn_);
        let recall = ratio(tp + fn_, fp);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Self {
            true_positives: tp,
            false_positives: fp,
            false_negatives: fn_,
            precision,
            recall,
            f1,
        }
    }

    pub fn of(gold: &Relation, pred: &Relation) -> Result<Self, EvalError> {
        if gold.element_count() != pred.element_count() {
            return Err(EvalError::ElementCount {
                gold: gold.element_count(),
                pred: pred.element_count(),
            });
        }
        let tp = pred.pair_set().intersection(gold.pair_set()).count();
        Ok(Self::from_counts(tp, pred.len() - tp, gold.len() - tp))
    }

    /// Pools the counts of two results.
    pub fn merge(&self, other: &Self) -> Self {
        Self::from_counts(
            self.true_positives + other.true_positives,
            self.false_positives + other.false_positives,
            self.false_negatives + other.false_negatives,
        )
    }
}

pub fn pair_f1(gold: &Relation, pred: &Relation) -> Result<PairMetrics, EvalError> {
    PairMetrics::of(gold, pred)
}

/// Micro average: counts are pooled over all documents before the ratios.
pub fn corpus_f1<'a, I>(pairs: I) -> Result<PairMetrics, EvalError>
where
    I: IntoIterator<Item = (&'a Relation, &'a Relation)>,
{
    let mut acc = PairMetrics::from_counts(0, 0, 0);
    for (gold, pred) in pairs {
        acc = acc.merge(&PairMetrics::of(gold, pred)?);
    }
    Ok(acc)
}
