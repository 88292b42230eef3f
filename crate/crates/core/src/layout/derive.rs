use crate::order::Relation;

use super::{Document, LayoutError};

/// Word-level relation implied by a segment-level one.
///
/// Consecutive words inside a segment are chained, and every segment pair
/// `(A, B)` becomes `(last word of A, first word of B)`. Nothing else is added,
/// so an acyclic segment relation yields an acyclic word relation.
pub fn derive_word_level(doc: &Document) -> Result<Relation, LayoutError> {
    let isdr = doc.require_isdr()?;
    let spans = doc.word_spans();
    let mut rel = Relation::empty(doc.word_count());
    for span in &spans {
        for w in span.start..span.end.saturating_sub(1) {
            rel.insert(w, w + 1)?;
        }
    }
    for (a, b) in isdr.pairs() {
        rel.insert(spans[a].end - 1, spans[b].start)?;
    }
    Ok(rel)
}

/// Maps a word relation back to segments, dropping pairs inside one segment.
pub fn collapse_to_segments(doc: &Document, words: &Relation) -> Result<Relation, LayoutError> {
    let owner = doc.word_segments();
    let mut rel = Relation::empty(doc.segment_count());
    for (i, j) in words.pairs() {
        let (a, b) = (owner[i], owner[j]);
        if a != b {
            rel.insert(a, b)?;
        }
    }
    Ok(rel)
}
