
use crate::layout::Document;
use crate::order::{permutation_to_relation, Relation};
use crate::rop::Level;

use super::EvalError;

/// Row-major segment order. Segments sorted by vertical centre are cut into
/// bands wherever consecutive centres are more than half the median segment
/// height apart; bands go top to bottom, segments within a band by `x0`.
pub fn heuristic_reading_order(doc: &Document) -> Vec<usize> {
    let n = doc.segment_count();
    if n == 0 {
        return Vec::new();
    }
    let mut heights: Vec<u32> = doc.segments.iter().map(|s| s.bbox.height()).collect();
    heights.sort_unstable();
    let median = if n % 2 == 1 {
        heights[n / 2] as f64
    } else {
        (heights[n / 2 - 1] + heights[n / 2]) as f64 / 2.0
    };
    let cy: Vec<f64> = doc.segments.iter().map(|s| s.bbox.center_y()).collect();
    let x0: Vec<u32> = doc.segments.iter().map(|s| s.bbox.x0).collect();
    let mut by_y: Vec<usize> = (0..n).collect();
    by_y.sort_by(|&a, &b| cy[a].total_cmp(&cy[b]).then(x0[a].cmp(&x0[b])).then(a.cmp(&b)));

    let mut order = Vec::with_capacity(n);
    let mut band: Vec<usize> = Vec::new();
    let flush = |band: &mut Vec<usize>, order: &mut Vec<usize>| {
        band.sort_by(|&a, &b| x0[a].cmp(&x0[b]).then(a.cmp(&b)));
        order.append(band);
    };
    for (k, &s) in by_y.iter().enumerate() {
        if k > 0 && cy[s] - cy[by_y[k - 1]] > median / 2.0 {
            flush(&mut band, &mut order);
        }
        band.push(s);
    }
    flush(&mut band, &mut order);
    order
}

/// Adjacent pairs of the heuristic order.
pub fn heuristic_relation(doc: &Document) -> Relation {
    permutation_to_relation(&heuristic_reading_order(doc)).expect("heuristic order is a permutation")
}

/// Converts a word sequence into a relation: adjacent words at word level;
/// at segment level, segments ordered by first appearance of any of their
/// words, then adjacent segments.
pub fn sequence_to_relation(sequence: &[usize], doc: &Document, level: Level) -> Result<Relation, EvalError> {
    let n = doc.word_count();
    let bad = |message: String| EvalError::NotAPermutation { expected: n, message };
    if sequence.len() != n {
        return Err(bad(format!("sequence has {} entries", sequence.len())));
    }
    let mut seen = vec![false; n];
    for &w in sequence {
        if w >= n {
            return Err(bad(format!("word {w} out of range")));
        }
        if std::mem::replace(&mut seen[w], true) {
            return Err(bad(format!("word {w} repeated")));
        }
    }
    match level {
        Level::Word => {
            let mut rel = Relation::empty(n);
            for w in sequence.windows(2) {
                rel.insert(w[0], w[1])?;
            }
            Ok(rel)
        }
        Level::Segment => {
            let owner = doc.word_segments();
            let mut placed = vec![false; doc.segment_count()];
            let mut segs = Vec::new();
            for &w in sequence {
                if !std::mem::replace(&mut placed[owner[w]], true) {
                    segs.push(owner[w]);
                }
            }
            // segments without words never appear; append them in index order
            segs.extend((0..doc.segment_count()).filter(|&s| !placed[s]));
            let mut rel = Relation::empty(doc.segment_count());
            for w in segs.windows(2) {
                rel.insert(w[0], w[1])?;
            }
            Ok(rel)
        }
    }
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::layout::{BBox, Segment, Word};

    fn doc(boxes: &[(i64, i64, i64, i64)], words: &[usize]) -> Document {
        let segments = boxes
            .iter()
            .zip(words)
            .enumerate()
            .map(|(i, (&(x0, y0, x1, y1), &nw))| {
                let b = BBox::new(x0, y0, x1, y1).unwrap();
                Segment {
                    id: i,
                    words: (0..nw).map(|k| Word { text: format!("s{i}w{k}"), bbox: b }).collect(),
                    bbox: b,
                }
            })
            .collect();
        Document {
            id: "d".into(),
            page_width: 1000,
            page_height: 1000,
            segments,
            isdr: None,
            links: None,
        }
    }

    #[test]
    fn stacked_and_side_by_side() {
        let stacked = doc(&[(10, 100, 200, 120), (10, 40, 200, 60)], &[1, 1]);
        assert_eq!(heuristic_reading_order(&stacked), vec![1, 0]);
        let side = doc(&[(300, 40, 400, 60), (10, 42, 200, 62)], &[1, 1]);
        assert_eq!(heuristic_reading_order(&side), vec![1, 0]);
    }

    #[test]
    fn grid_is_row_major() {
        let g = doc(
            &[(60, 100, 200, 126), (300, 101, 450, 127), (60, 132, 200, 158), (300, 131, 450, 157)],
            &[1, 1, 1, 1],
        );
        assert_eq!(heuristic_reading_order(&g), vec![0, 1, 2, 3]);
    }

    #[test]
    fn sequences() {
        // segment A = words 0,1; segment B = word 2
        let d = doc(&[(10, 10, 100, 30), (10, 50, 100, 70)], &[2, 1]);
        let seg = sequence_to_relation(&[2, 0, 1], &d, Level::Segment).unwrap();
        assert_eq!(seg.pairs().collect::<Vec<_>>(), vec![(1, 0)]);
        let w = sequence_to_relation(&[0, 1, 2], &d, Level::Word).unwrap();
        assert_eq!(w.pairs().collect::<Vec<_>>(), vec![(0, 1), (1, 2)]);
        assert!(sequence_to_relation(&[0, 0, 1], &d, Level::Word).is_err());
        assert!(sequence_to_relation(&[0, 1], &d, Level::Word).is_err());
        let single = doc(&[(10, 10, 100, 30)], &[1]);
        assert!(sequence_to_relation(&[0], &single, Level::Word).unwrap().is_empty());
        assert!(sequence_to_relation(&[0], &single, Level::Segment).unwrap().is_empty());
    }
}
