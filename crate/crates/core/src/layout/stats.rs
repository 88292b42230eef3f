use serde::Serialize;

use super::{Corpus, Document, LayoutError};

/// Which segments count as taking part in non-linear reading order.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum NonLinearDefinition {
    /// In-degree ≥ 2 or out-degree ≥ 2.
    #[default]
    Degree,
    /// Exactly one predecessor and exactly one successor.
    Literal,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DocumentNonLinear {
    pub id: String,
    pub segments: usize,
    pub nonlinear: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NonLinearStats {
    pub definition: NonLinearDefinition,
    /// `None` when the corpus has no segments.
    pub fraction: Option<f64>,
    pub per_document: Vec<DocumentNonLinear>,
}

fn count_nonlinear(doc: &Document, def: NonLinearDefinition) -> Result<usize, LayoutError> {
    let isdr = doc.require_isdr()?;
    let (ins, outs) = (isdr.in_degrees(), isdr.out_degrees());
    Ok(ins
        .iter()
        .zip(&outs)
        .filter(|&(&i, &o)| match def {
            NonLinearDefinition::Degree => i >= 2 || o >= 2,
            NonLinearDefinition::Literal => i == 1 && o == 1,
        })
        .count())
}

/// Fraction of all segments in the corpus involved in non-linear reading order.
/// Fails listing every document without an `isdr`.
pub fn nonlinear_stats(corpus: &Corpus, def: NonLinearDefinition) -> Result<NonLinearStats, LayoutError> {
    let missing: Vec<String> = corpus
        .documents
        .iter()
        .filter(|d| d.isdr.is_none())
        .map(|d| d.id.clone())
        .collect();
    if !missing.is_empty() {
        return Err(LayoutError::MissingIsdrMany(missing));
    }
    let per_document = corpus
        .documents
        .iter()
        .map(|d| {
            Ok(DocumentNonLinear {
                id: d.id.clone(),
                segments: d.segment_count(),
                nonlinear: count_nonlinear(d, def)?,
            })
        })
        .collect::<Result<Vec<_>, LayoutError>>()?;
    let total: usize = per_document.iter().map(|d| d.segments).sum();
    let nonlinear: usize = per_document.iter().map(|d| d.nonlinear).sum();
    Ok(NonLinearStats {
        definition: def,
        fraction: (total > 0).then(|| nonlinear as f64 / total as f64),
        per_document,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CorpusStats {
    pub documents: usize,
    pub segments: usize,
    pub words: usize,
    pub pairs: usize,
    /// Absent when some document lacks an `isdr`.
    pub nonlinear_fraction: Option<f64>,
    pub nonlinear_fraction_literal: Option<f64>,
}

pub fn corpus_stats(corpus: &Corpus) -> CorpusStats {
    let frac = |def| nonlinear_stats(corpus, def).ok().and_then(|s| s.fraction);
    CorpusStats {
        documents: corpus.len(),
        segments: corpus.documents.iter().map(Document::segment_count).sum(),
        words: corpus.documents.iter().map(Document::word_count).sum(),
        pairs: corpus.documents.iter().filter_map(|d| d.isdr.as_ref()).map(|r| r.len()).sum(),
        nonlinear_fraction: frac(NonLinearDefinition::Degree),
        nonlinear_fraction_literal: frac(NonLinearDefinition::Literal),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layout::{BBox, Segment, Split, Word};
    use crate::order::Relation;

    fn doc(id: &str, n: usize, pairs: &[(usize, usize)]) -> Document {
        let segments = (0..n)
            .map(|i| {
                let b = BBox::new(10, 30 * i as i64, 100, 30 * i as i64 + 20).unwrap();
                Segment {
                    id: i,
                    words: vec![Word { text: format!("w{i}"), bbox: b }],
                    bbox: b,
                }
            })
            .collect();
        Document {
            id: id.into(),
            page_width: 1000,
            page_height: 1000,
            segments,
            isdr: Some(Relation::new(n, pairs.iter().copied()).unwrap()),
            links: None,
        }
    }

    #[test]
    fn chain_is_linear() {
        let c = Corpus::uniform(vec![doc("a", 3, &[(0, 1), (1, 2)])], Split::Train);
        let s = nonlinear_stats(&c, NonLinearDefinition::Degree).unwrap();
        assert_eq!(s.fraction, Some(0.0));
        let lit = nonlinear_stats(&c, NonLinearDefinition::Literal).unwrap();
        assert!((lit.fraction.unwrap() - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn fork_marks_its_root() {
        let c = Corpus::uniform(vec![doc("a", 3, &[(0, 1), (0, 2)])], Split::Train);
        let s = nonlinear_stats(&c, NonLinearDefinition::Degree).unwrap();
        assert!((s.fraction.unwrap() - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(s.per_document[0].nonlinear, 1);
    }

    #[test]
    fn totals_and_missing_labels() {
        let mut d = doc("b", 2, &[]);
        d.isdr = None;
        let c = Corpus::uniform(vec![doc("a", 3, &[(0, 1)]), d], Split::Train);
        let st = corpus_stats(&c);
        assert_eq!((st.documents, st.segments, st.words, st.pairs), (2, 5, 5, 1));
        assert_eq!(st.nonlinear_fraction, None);
        assert!(matches!(
            nonlinear_stats(&c, NonLinearDefinition::Degree),
            Err(LayoutError::MissingIsdrMany(ids)) if ids == vec!["b".to_string()]
        ));
    }

    #[test]
    fn empty_corpus_has_no_fraction() {
        let st = corpus_stats(&Corpus::default());
        assert_eq!(st.documents, 0);
        assert_eq!(st.nonlinear_fraction, None);
    }
}
