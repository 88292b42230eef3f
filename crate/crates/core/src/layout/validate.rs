use std::collections::BTreeSet;

use serde::Serialize;

use crate::order::{find_cycle, Relation};

use super::io::{structural_errors, DocumentRecord};
use super::Document;

/// Problems found in one document's annotation. An empty report means the
/// document is valid.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct AnnotationReport {
    pub doc_id: String,
    pub has_isdr: bool,
    /// Cycle in the in-range isdr pairs, start node repeated at the end.
    pub cycle: Option<Vec<usize>>,
    pub out_of_range: Vec<[i64; 2]>,
    pub duplicates: Vec<[i64; 2]>,
    pub self_pairs: Vec<[i64; 2]>,
    /// Box, id and word problems unrelated to the relation.
    pub layout: Vec<String>,
}

impl AnnotationReport {
    pub fn is_clean(&self) -> bool {
        self.cycle.is_none()
            && self.out_of_range.is_empty()
            && self.duplicates.is_empty()
            && self.self_pairs.is_empty()
            && self.layout.is_empty()
    }
}

/// Checks a raw document record. Never fails; every problem goes in the report.
pub fn validate_annotation(rec: &DocumentRecord) -> AnnotationReport {
    let n = rec.segments.len() as i64;
    let mut report = AnnotationReport {
        doc_id: rec.id.clone(),
        has_isdr: rec.isdr.is_some(),
        layout: structural_errors(rec)
            .into_iter()
            .filter(|e| !e.starts_with("isdr pair"))
            .collect(),
        ..Default::default()
    };
    let Some(pairs) = &rec.isdr else {
        return report;
    };
    let mut seen = BTreeSet::new();
    let mut in_range = Vec::new();
    for &p in pairs {
        if !(0..n).contains(&p[0]) || !(0..n).contains(&p[1]) {
            report.out_of_range.push(p);
            continue;
        }
        if !seen.insert(p) {
            report.duplicates.push(p);
            continue;
        }
        if p[0] == p[1] {
            report.self_pairs.push(p);
        }
        in_range.push((p[0] as usize, p[1] as usize));
    }
    let rel = Relation::new(n as usize, in_range).expect("indices filtered to range");
    report.cycle = find_cycle(&rel);
    report
}

/// Convenience wrapper for an already-built document.
pub fn validate_document(doc: &Document) -> AnnotationReport {
    validate_annotation(&DocumentRecord::from(doc))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layout::io::parse_records;

    fn record(isdr: &str) -> DocumentRecord {
        let seg = |i: usize| {
            format!(
                r#"{{"id":{i},"box":[0,{y0},100,{y1}],"words":[{{"text":"w","box":[0,{y0},100,{y1}]}}]}}"#,
                y0 = i * 30,
                y1 = i * 30 + 20
            )
        };
        let segs: Vec<_> = (0..3).map(seg).collect();
        let line = format!(r#"{{"id":"x","page":[1000,1000],"segments":[{}],"isdr":{isdr}}}"#, segs.join(","));
        parse_records(&line).unwrap().remove(0)
    }

    #[test]
    fn valid_document_has_empty_report() {
        assert!(validate_annotation(&record("[[0,1],[1,2]]")).is_clean());
    }

    #[test]
    fn self_pair_flagged() {
        let r = validate_annotation(&record("[[0,0]]"));
        assert_eq!(r.self_pairs, vec![[0, 0]]);
        assert_eq!(r.cycle, Some(vec![0, 0]));
    }

    #[test]
    fn cycle_witness_reported() {
        let r = validate_annotation(&record("[[0,1],[1,2],[2,0]]"));
        assert_eq!(r.cycle, Some(vec![0, 1, 2, 0]));
    }

    #[test]
    fn duplicates_and_range() {
        let r = validate_annotation(&record("[[0,1],[0,1],[0,9]]"));
        assert_eq!(r.duplicates, vec![[0, 1]]);
        assert_eq!(r.out_of_range, vec![[0, 9]]);
        assert!(r.layout.is_empty());
    }
}
