//! Deterministic SVG drawing of a page: one rectangle per segment and one
//! arrow per relation pair, from the centre of the source segment to the
//! centre of the target.

use std::fmt::Write as _;

use crate::layout::Document;
use crate::order::Relation;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn centre(doc: &Document, i: usize) -> (f64, f64) {
    let b = doc.segments[i].bbox;
    ((b.x0 + b.x1) as f64 / 2.0, (b.y0 + b.y1) as f64 / 2.0)
}

/// SVG 1.1 of `doc` with the arrows of `rel`, or of the document's own
/// `isdr` when `rel` is `None`. Coordinates use the 0..1000 page grid.
pub fn render_svg(doc: &Document, rel: Option<&Relation>) -> String {
    let rel = rel.or(doc.isdr.as_ref());
    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="1000" height="1000" viewBox="0 0 1000 1000">"#
    );
    let _ = writeln!(s, "<title>{}</title>", escape(&doc.id));
    let _ = writeln!(
        s,
        r##"<defs><marker id="arrow" viewBox="0 0 10 10" refX="9" refY="5" markerWidth="6" markerHeight="6" orient="auto"><path d="M 0 0 L 10 5 L 0 10 z" fill="#c0392b"/></marker></defs>"##
    );
    for seg in &doc.segments {
        let b = seg.bbox;
        let text: Vec<&str> = seg.words.iter().map(|w| w.text.as_str()).collect();
        let _ = writeln!(
            s,
            r##"<rect x="{}" y="{}" width="{}" height="{}" fill="#eaf2fb" stroke="#2c3e50" stroke-width="1"><title>{}: {}</title></rect>"##,
            b.x0,
            b.y0,
            b.width(),
            b.height(),
            seg.id,
            escape(&text.join(" "))
        );
    }
    if let Some(rel) = rel {
        for (i, j) in rel.pairs() {
            if i >= doc.segment_count() || j >= doc.segment_count() {
                continue;
            }
            let ((x1, y1), (x2, y2)) = (centre(doc, i), centre(doc, j));
            let _ = writeln!(
                s,
                r##"<line x1="{x1}" y1="{y1}" x2="{x2}" y2="{y2}" stroke="#c0392b" stroke-width="2" marker-end="url(#arrow)"/>"##
            );
        }
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layout::synth::generate_document;
    use crate::layout::LayoutSpec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn chain() -> Document {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        generate_document(LayoutSpec::Chain { segments: 3 }, [1, 2], &mut rng, "a<b>-00000-chain".into()).unwrap()
    }

    #[test]
    fn counts_and_determinism() {
        let d = chain();
        let svg = render_svg(&d, None);
        assert_eq!(svg.matches("<rect").count(), 3);
        assert_eq!(svg.matches("<line").count(), 2);
        assert!(svg.contains("a&lt;b&gt;"));
        assert_eq!(svg, render_svg(&d, None));
        let empty = Relation::empty(3);
        let bare = render_svg(&d, Some(&empty));
        assert_eq!(bare.matches("<rect").count(), 3);
        assert_eq!(bare.matches("<line").count(), 0);
    }
}
