//! JSON-lines corpus files.
//!
//! One document per line, fields in the order `id`, `page`, `segments`,
//! `isdr` (optional), `links` (optional). Split assignments live in a sidecar
//! `<corpus>.splits.json` mapping document id to `train`/`validation`/`test`;
//! without a sidecar every document is a training document.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::order::{find_cycle, Relation};

use super::{BBox, Corpus, Document, LayoutError, Segment, Split, Word};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WordRecord {
    pub text: String,
    #[serde(rename = "box")]
    pub bbox: [i64; 4],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentRecord {
    pub id: i64,
    #[serde(rename = "box")]
    pub bbox: [i64; 4],
    pub words: Vec<WordRecord>,
}

/// A document exactly as it appears on disk, before any invariant checks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DocumentRecord {
    pub id: String,
    pub page: [i64; 2],
    pub segments: Vec<SegmentRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub isdr: Option<Vec<[i64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub links: Option<Vec<[i64; 2]>>,
}

fn relation_pairs(rel: &Relation) -> Vec<[i64; 2]> {
    rel.pairs().map(|(i, j)| [i as i64, j as i64]).collect()
}

impl From<&Document> for DocumentRecord {
    fn from(doc: &Document) -> Self {
        DocumentRecord {
            id: doc.id.clone(),
            page: [doc.page_width as i64, doc.page_height as i64],
            segments: doc
                .segments
                .iter()
                .map(|s| SegmentRecord {
                    id: s.id as i64,
                    bbox: s.bbox.to_array(),
                    words: s
                        .words
                        .iter()
                        .map(|w| WordRecord {
                            text: w.text.clone(),
                            bbox: w.bbox.to_array(),
                        })
                        .collect(),
                })
                .collect(),
            isdr: doc.isdr.as_ref().map(relation_pairs),
            links: doc.links.as_ref().map(relation_pairs),
        }
    }
}

/// Structural problems of a record: page size, segment ids, boxes, words and
/// relation index ranges. Acyclicity is not checked here.
pub fn structural_errors(rec: &DocumentRecord) -> Vec<String> {
    let mut errs = Vec::new();
    if rec.page[0] <= 0 || rec.page[1] <= 0 {
        errs.push(format!("page size {:?} must be positive", rec.page));
    }
    for (k, seg) in rec.segments.iter().enumerate() {
        if seg.id != k as i64 {
            errs.push(format!("segment at position {k} has id {}", seg.id));
        }
        let sbox = match to_bbox(seg.bbox) {
            Ok(b) => Some(b),
            Err(e) => {
                errs.push(format!("segment {k}: {e}"));
                None
            }
        };
        if seg.words.is_empty() {
            errs.push(format!("segment {k} has no words"));
        }
        for (w, word) in seg.words.iter().enumerate() {
            if word.text.is_empty() {
                errs.push(format!("segment {k} word {w}: empty text"));
            }
            match to_bbox(word.bbox) {
                Ok(wb) => {
                    if let Some(sb) = sbox {
                        if !sb.contains(&wb) {
                            errs.push(format!("segment {k} box {sb} does not contain word {w} box {wb}"));
                        }
                    }
                }
                Err(e) => errs.push(format!("segment {k} word {w}: {e}")),
            }
        }
    }
    let n = rec.segments.len() as i64;
    for (name, pairs) in [("isdr", &rec.isdr), ("links", &rec.links)] {
        for p in pairs.iter().flatten() {
            if !(0..n).contains(&p[0]) || !(0..n).contains(&p[1]) {
                errs.push(format!("{name} pair {p:?} out of range for {n} segments"));
            }
        }
    }
    errs
}

fn to_bbox(b: [i64; 4]) -> Result<BBox, String> {
    BBox::new(b[0], b[1], b[2], b[3])
}

fn to_relation(n: usize, pairs: &[[i64; 2]]) -> Result<Relation, String> {
    Relation::new(n, pairs.iter().map(|p| (p[0] as usize, p[1] as usize))).map_err(|e| e.to_string())
}

impl TryFrom<&DocumentRecord> for Document {
    type Error = LayoutError;

    /// Enforces every document invariant, including an acyclic `isdr`.
    fn try_from(rec: &DocumentRecord) -> Result<Self, LayoutError> {
        let invalid = |message: String| LayoutError::Validation {
            doc: rec.id.clone(),
            message,
        };
        if let Some(first) = structural_errors(rec).into_iter().next() {
            return Err(invalid(first));
        }
        let n = rec.segments.len();
        let segments = rec
            .segments
            .iter()
            .map(|s| Segment {
                id: s.id as usize,
                bbox: to_bbox(s.bbox).expect("checked"),
                words: s
                    .words
                    .iter()
                    .map(|w| Word {
                        text: w.text.clone(),
                        bbox: to_bbox(w.bbox).expect("checked"),
                    })
                    .collect(),
            })
            .collect();
        let isdr = rec.isdr.as_deref().map(|p| to_relation(n, p)).transpose().map_err(invalid)?;
        if let Some(rel) = &isdr {
            if let Some(cycle) = find_cycle(rel) {
                return Err(invalid(format!("isdr is cyclic: {cycle:?}")));
            }
        }
        let links = rec.links.as_deref().map(|p| to_relation(n, p)).transpose().map_err(invalid)?;
        Ok(Document {
            id: rec.id.clone(),
            page_width: rec.page[0] as u32,
            page_height: rec.page[1] as u32,
            segments,
            isdr,
            links,
        })
    }
}

pub fn splits_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".splits.json");
    PathBuf::from(s)
}

fn io_err(path: &Path, source: std::io::Error) -> LayoutError {
    LayoutError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Parses JSON-lines text into raw records. Blank lines are skipped; line
/// numbers in errors are 1-based.
pub fn parse_records(text: &str) -> Result<Vec<DocumentRecord>, LayoutError> {
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(line).map_err(|e| LayoutError::Parse {
            line: idx + 1,
            message: e.to_string(),
        })?;
        out.push(rec);
    }
    Ok(out)
}

/// Reads raw records without validating document invariants.
pub fn read_records(path: &Path) -> Result<Vec<DocumentRecord>, LayoutError> {
    let file = fs::File::open(path).map_err(|e| io_err(path, e))?;
    let mut out = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| io_err(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| LayoutError::Parse {
            line: idx + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

pub fn read_splits(path: &Path) -> Result<Option<BTreeMap<String, Split>>, LayoutError> {
    let sp = splits_path(path);
    if !sp.exists() {
        return Ok(None);
    }
    let text = fs::read_to_string(&sp).map_err(|e| io_err(&sp, e))?;
    serde_json::from_str(&text)
        .map(Some)
        .map_err(|e| LayoutError::Parse {
            line: e.line(),
            message: format!("{}: {e}", sp.display()),
        })
}

/// Builds a validated corpus from records plus optional split assignments.
pub fn corpus_from_records(
    records: &[DocumentRecord],
    split: Option<BTreeMap<String, Split>>,
) -> Result<Corpus, LayoutError> {
    let documents = records.iter().map(Document::try_from).collect::<Result<Vec<_>, _>>()?;
    let mut seen = std::collections::BTreeSet::new();
    for d in &documents {
        if !seen.insert(d.id.as_str()) {
            return Err(LayoutError::Validation {
                doc: d.id.clone(),
                message: "duplicate document id".into(),
            });
        }
    }
    let split = match split {
        Some(map) => {
            if let Some(d) = documents.iter().find(|d| !map.contains_key(&d.id)) {
                return Err(LayoutError::Validation {
                    doc: d.id.clone(),
                    message: "document missing from split file".into(),
                });
            }
            map.into_iter().filter(|(id, _)| seen.contains(id.as_str())).collect()
        }
        None => documents.iter().map(|d| (d.id.clone(), Split::Train)).collect(),
    };
    Ok(Corpus { documents, split })
}

/// Loads and validates a corpus.
pub fn load_corpus(path: &Path) -> Result<Corpus, LayoutError> {
    let records = read_records(path)?;
    let split = read_splits(path)?;
    corpus_from_records(&records, split)
}

pub fn document_to_json(doc: &Document) -> String {
    serde_json::to_string(&DocumentRecord::from(doc)).expect("records always serialize")
}

/// Writes the corpus as JSON lines plus its split sidecar.
pub fn save_corpus(corpus: &Corpus, path: &Path) -> Result<(), LayoutError> {
    let file = fs::File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    for doc in &corpus.documents {
        writeln!(w, "{}", document_to_json(doc)).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))?;
    let sp = splits_path(path);
    let text = serde_json::to_string_pretty(&corpus.split).expect("split map serializes");
    fs::write(&sp, text + "\n").map_err(|e| io_err(&sp, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    const DOC: &str = r#"{"id":"d","page":[1000,1000],"segments":[{"id":0,"box":[0,0,50,20],"words":[{"text":"a","box":[0,0,20,20]},{"text":"b","box":[25,0,50,20]}]},{"id":1,"box":[0,30,50,50],"words":[{"text":"c","box":[0,30,50,50]}]}],"isdr":[[0,1]]}"#;

    #[test]
    fn record_field_order_is_fixed() {
        let recs = parse_records(DOC).unwrap();
        let doc = Document::try_from(&recs[0]).unwrap();
        assert_eq!(document_to_json(&doc), DOC);
    }

    #[test]
    fn parse_error_carries_line() {
        let text = format!("{DOC}\n{{not json\n");
        match parse_records(&text) {
            Err(LayoutError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn float_coordinates_rejected() {
        let text = DOC.replace("[0,0,50,20]", "[0.5,0,50,20]");
        assert!(parse_records(&text).is_err());
    }

    #[test]
    fn inverted_box_names_document() {
        let text = DOC.replace(r#""box":[0,30,50,50],"words""#, r#""box":[60,30,50,50],"words""#);
        let recs = parse_records(&text).unwrap();
        match Document::try_from(&recs[0]) {
            Err(LayoutError::Validation { doc, .. }) => assert_eq!(doc, "d"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn cyclic_isdr_rejected() {
        let text = DOC.replace(r#""isdr":[[0,1]]"#, r#""isdr":[[0,1],[1,0]]"#);
        let recs = parse_records(&text).unwrap();
        assert!(matches!(Document::try_from(&recs[0]), Err(LayoutError::Validation { .. })));
    }

    #[test]
    fn out_of_range_pair_rejected() {
        let text = DOC.replace(r#""isdr":[[0,1]]"#, r#""isdr":[[0,7]]"#);
        let recs = parse_records(&text).unwrap();
        assert!(!structural_errors(&recs[0]).is_empty());
        assert!(Document::try_from(&recs[0]).is_err());
    }

    #[test]
    fn word_outside_segment_rejected() {
        let text = DOC.replace(r#""text":"c","box":[0,30,50,50]"#, r#""text":"c","box":[0,30,60,50]"#);
        let recs = parse_records(&text).unwrap();
        assert!(Document::try_from(&recs[0]).is_err());
    }
}
