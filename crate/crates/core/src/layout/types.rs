use std::collections::BTreeMap;
use std::fmt;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::order::Relation;

use super::LayoutError;

/// Largest coordinate value; boxes are normalized to `[0, COORD_MAX]`.
pub const COORD_MAX: u32 = 1000;

/// Axis-aligned box, top-left origin, y growing downward.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BBox {
    pub x0: u32,
    pub y0: u32,
    pub x1: u32,
    pub y1: u32,
}

impl BBox {
    pub fn new(x0: i64, y0: i64, x1: i64, y1: i64) -> Result<Self, String> {
        for v in [x0, y0, x1, y1] {
            if !(0..=COORD_MAX as i64).contains(&v) {
                return Err(format!("coordinate {v} outside [0, {COORD_MAX}]"));
            }
        }
        if x0 > x1 || y0 > y1 {
            return Err(format!("inverted box [{x0},{y0},{x1},{y1}]"));
        }
        Ok(Self {
            x0: x0 as u32,
            y0: y0 as u32,
            x1: x1 as u32,
            y1: y1 as u32,
        })
    }

    pub fn width(&self) -> u32 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> u32 {
        self.y1 - self.y0
    }

    pub fn center_y(&self) -> f64 {
        (self.y0 + self.y1) as f64 / 2.0
    }

    pub fn contains(&self, other: &BBox) -> bool {
        self.x0 <= other.x0 && self.y0 <= other.y0 && self.x1 >= other.x1 && self.y1 >= other.y1
    }

    /// True when the interiors intersect; shared edges do not count.
    pub fn overlaps(&self, other: &BBox) -> bool {
        self.x0 < other.x1 && other.x0 < self.x1 && self.y0 < other.y1 && other.y0 < self.y1
    }

    pub fn union(&self, other: &BBox) -> BBox {
        BBox {
            x0: self.x0.min(other.x0),
            y0: self.y0.min(other.y0),
            x1: self.x1.max(other.x1),
            y1: self.y1.max(other.y1),
        }
    }

    pub fn to_array(self) -> [i64; 4] {
        [self.x0 as i64, self.y0 as i64, self.x1 as i64, self.y1 as i64]
    }
}

impl fmt::Display for BBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{},{},{},{}]", self.x0, self.y0, self.x1, self.y1)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Word {
    pub text: String,
    pub bbox: BBox,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Segment {
    pub id: usize,
    /// Words in their within-segment reading order.
    pub words: Vec<Word>,
    pub bbox: BBox,
}

/// A page of segments with an optional immediate-succession relation over
/// segments (`isdr`) and optional key-to-value links (`links`).
#[derive(Clone, Debug, PartialEq)]
pub struct Document {
    pub id: String,
    pub page_width: u32,
    pub page_height: u32,
    pub segments: Vec<Segment>,
    pub isdr: Option<Relation>,
    pub links: Option<Relation>,
}

impl Document {
    pub fn segment_count(&self) -> usize {
        self.segments.len()
    }

    pub fn word_count(&self) -> usize {
        self.segments.iter().map(|s| s.words.len()).sum()
    }

    /// Range of global word indices covered by each segment. Words are numbered
    /// segment by segment, in within-segment order.
    pub fn word_spans(&self) -> Vec<Range<usize>> {
        let mut start = 0;
        self.segments
            .iter()
            .map(|s| {
                let r = start..start + s.words.len();
                start = r.end;
                r
            })
            .collect()
    }

    /// Segment index of every global word index.
    pub fn word_segments(&self) -> Vec<usize> {
        self.segments
            .iter()
            .enumerate()
            .flat_map(|(si, s)| std::iter::repeat_n(si, s.words.len()))
            .collect()
    }

    pub fn words(&self) -> impl Iterator<Item = &Word> {
        self.segments.iter().flat_map(|s| s.words.iter())
    }

    pub fn require_isdr(&self) -> Result<&Relation, LayoutError> {
        self.isdr.as_ref().ok_or_else(|| LayoutError::MissingIsdr(self.id.clone()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Validation => "validation",
            Split::Test => "test",
        })
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Corpus {
    pub documents: Vec<Document>,
    /// Split assignment for every document id.
    pub split: BTreeMap<String, Split>,
}

impl Corpus {
    /// Builds a corpus with every document assigned to `split`.
    pub fn uniform(documents: Vec<Document>, split: Split) -> Self {
        let split = documents.iter().map(|d| (d.id.clone(), split)).collect();
        Self { documents, split }
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn split_of(&self, id: &str) -> Split {
        self.split.get(id).copied().unwrap_or(Split::Train)
    }

    pub fn documents_in(&self, split: Split) -> Vec<&Document> {
        self.documents.iter().filter(|d| self.split_of(&d.id) == split).collect()
    }

    /// A new corpus holding only the documents of `split`.
    pub fn subset(&self, split: Split) -> Corpus {
        Corpus::uniform(self.documents_in(split).into_iter().cloned().collect(), split)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bbox_validation() {
        assert!(BBox::new(10, 0, 5, 10).is_err());
        assert!(BBox::new(0, 0, 1001, 10).is_err());
        assert!(BBox::new(-1, 0, 10, 10).is_err());
        let b = BBox::new(0, 0, 10, 10).unwrap();
        assert_eq!((b.width(), b.height()), (10, 10));
    }

    #[test]
    fn overlap_ignores_shared_edges() {
        let a = BBox::new(0, 0, 10, 10).unwrap();
        let b = BBox::new(10, 0, 20, 10).unwrap();
        let c = BBox::new(5, 5, 15, 15).unwrap();
        assert!(!a.overlaps(&b));
        assert!(a.overlaps(&c));
    }
}
