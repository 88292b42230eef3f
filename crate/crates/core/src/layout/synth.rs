//! Deterministic synthetic page layouts with known immediate-succession labels.
//!
//! Layout families and their gold relations:
//! - chain: one column, each segment links to the one below
//! - two-column: two independent chains, no pair crosses columns
//! - grid `r×c`: cell `(i, j)` links to `(i, j+1)` and `(i+1, j)`; no wrap
//! - header-footer: a body chain plus a header and a footer with no pairs
//! - form: a chain of optional titles, keys and values; keys also carry a
//!   link to their value, which always immediately follows the key

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::order::Relation;

use super::{BBox, Corpus, Document, LayoutError, Segment, Split, Word, COORD_MAX};

const LINE_HEIGHT: u32 = 18;
const LINE_PITCH: u32 = 22;
const WORD_SPACE: u32 = 6;
const CHAR_WIDTH: u32 = 9;
const BOTTOM_LIMIT: u32 = 960;

const BODY_WORDS: &[&str] = &[
    "the", "layout", "reading", "order", "document", "page", "figure", "table", "results", "method", "model",
    "section", "data", "value", "report", "analysis", "text", "column", "shows", "between", "each", "first",
    "second", "which", "these", "from", "with", "include", "relation", "segment",
];
const HEADER_WORDS: &[&str] = &["Confidential", "Report", "Draft", "Annual", "Quarterly", "Internal"];
const KEY_WORDS: &[&str] = &[
    "Name", "Date", "Address", "Phone", "Total", "Account", "Email", "City", "Amount", "Invoice", "Reference",
    "Signature",
];
const TITLE_WORDS: &[&str] = &["SECTION", "DETAILS", "PART", "SUMMARY", "INFORMATION", "APPLICANT"];

/// Relative weights of the layout families.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LayoutMix {
    pub chain: f64,
    pub two_column: f64,
    pub grid: f64,
    pub header_footer: f64,
    pub form: f64,
}

impl Default for LayoutMix {
    fn default() -> Self {
        Self {
            chain: 0.4,
            two_column: 0.3,
            grid: 0.3,
            header_footer: 0.0,
            form: 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitFractions {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl Default for SplitFractions {
    fn default() -> Self {
        Self {
            train: 0.8,
            validation: 0.0,
            test: 0.2,
        }
    }
}

/// Inclusive ranges are written `[min, max]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n_docs: usize,
    pub mix: LayoutMix,
    pub chain_segments: [usize; 2],
    pub column_segments: [usize; 2],
    pub grid_rows: [usize; 2],
    pub grid_cols: [usize; 2],
    pub form_fields: [usize; 2],
    pub words_per_segment: [usize; 2],
    pub split: SplitFractions,
    pub id_prefix: String,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_docs: 100,
            mix: LayoutMix::default(),
            chain_segments: [3, 10],
            column_segments: [2, 6],
            grid_rows: [2, 4],
            grid_cols: [2, 4],
            form_fields: [3, 6],
            words_per_segment: [1, 4],
            split: SplitFractions::default(),
            id_prefix: "synth".into(),
        }
    }
}

/// One concrete page to generate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LayoutSpec {
    Chain { segments: usize },
    TwoColumn { left: usize, right: usize },
    Grid { rows: usize, cols: usize },
    HeaderFooter { body: usize },
    Form { fields: usize },
}

impl LayoutSpec {
    /// Short tag embedded in generated document ids.
    pub fn tag(&self) -> String {
        match self {
            LayoutSpec::Chain { .. } => "chain".into(),
            LayoutSpec::TwoColumn { .. } => "twocol".into(),
            LayoutSpec::Grid { rows, cols } => format!("grid{rows}x{cols}"),
            LayoutSpec::HeaderFooter { .. } => "hf".into(),
            LayoutSpec::Form { .. } => "form".into(),
        }
    }
}

/// Layout family recorded in a generated document id, if any.
pub fn layout_tag(doc_id: &str) -> Option<&str> {
    doc_id.rsplit('-').next()
}

fn gen_range(rng: &mut ChaCha8Rng, r: [usize; 2]) -> usize {
    rng.gen_range(r[0]..=r[1].max(r[0]))
}

fn word_width(text: &str) -> u32 {
    text.chars().count() as u32 * CHAR_WIDTH + 6
}

fn gen_err(msg: impl Into<String>) -> LayoutError {
    LayoutError::Generation(msg.into())
}

fn bbox(x0: u32, y0: u32, x1: u32, y1: u32) -> Result<BBox, LayoutError> {
    BBox::new(x0 as i64, y0 as i64, x1 as i64, y1 as i64).map_err(gen_err)
}

/// Flows `texts` left to right from `(x0, y0)`, wrapping at `max_x`. The
/// segment box is the union of the word boxes.
fn flow_segment(id: usize, texts: Vec<String>, x0: u32, y0: u32, max_x: u32) -> Result<Segment, LayoutError> {
    let (mut x, mut y) = (x0, y0);
    let mut words = Vec::with_capacity(texts.len());
    for text in texts {
        let w = word_width(&text);
        if x > x0 && x + w > max_x {
            x = x0;
            y += LINE_PITCH;
        }
        if x + w > COORD_MAX || y + LINE_HEIGHT > BOTTOM_LIMIT {
            return Err(gen_err(format!("segment {id} does not fit on the page")));
        }
        words.push(Word {
            text,
            bbox: bbox(x, y, x + w, y + LINE_HEIGHT)?,
        });
        x += w + WORD_SPACE;
    }
    let first = words.first().ok_or_else(|| gen_err("segment without words"))?.bbox;
    let bbox = words.iter().fold(first, |acc, w| acc.union(&w.bbox));
    Ok(Segment { id, words, bbox })
}

fn pick_words(rng: &mut ChaCha8Rng, vocab: &[&str], count: usize) -> Vec<String> {
    (0..count).map(|_| vocab.choose(rng).expect("non-empty vocab").to_string()).collect()
}

fn numeric_token(rng: &mut ChaCha8Rng) -> String {
    match rng.gen_range(0..3) {
        0 => format!("{}", rng.gen_range(0..1000)),
        1 => format!("{}.{}", rng.gen_range(0..100), rng.gen_range(0..10)),
        _ => format!("${}", rng.gen_range(1..500)),
    }
}

struct Builder<'a> {
    rng: &'a mut ChaCha8Rng,
    words: [usize; 2],
    segments: Vec<Segment>,
    pairs: Vec<(usize, usize)>,
    links: Vec<(usize, usize)>,
}

impl Builder<'_> {
    fn push(&mut self, texts: Vec<String>, x0: u32, y0: u32, max_x: u32) -> Result<usize, LayoutError> {
        let id = self.segments.len();
        self.segments.push(flow_segment(id, texts, x0, y0, max_x)?);
        Ok(id)
    }

    fn body_texts(&mut self) -> Vec<String> {
        let n = gen_range(self.rng, self.words).max(1);
        pick_words(self.rng, BODY_WORDS, n)
    }

    /// Stacks `count` body segments from `y0` downward, chaining them.
    fn column(&mut self, count: usize, x0: u32, y0: u32, max_x: u32, limit: u32) -> Result<u32, LayoutError> {
        let mut y = y0;
        let mut prev = None;
        for _ in 0..count {
            let texts = self.body_texts();
            let id = self.push(texts, x0, y, max_x)?;
            let seg = self.segments[id].bbox;
            if seg.y1 > limit {
                return Err(gen_err(format!("{count} segments do not fit in the column")));
            }
            if let Some(p) = prev {
                self.pairs.push((p, id));
            }
            prev = Some(id);
            y = seg.y1 + self.rng.gen_range(10..=18);
        }
        Ok(y)
    }

    fn grid(&mut self, rows: usize, cols: usize) -> Result<(), LayoutError> {
        if rows == 0 || cols == 0 {
            return Err(gen_err("grid needs at least one row and column"));
        }
        let left = 60 + self.rng.gen_range(0..=40);
        let right = 940 - self.rng.gen_range(0..=40);
        let col_gap = self.rng.gen_range(8..=12);
        let row_gap = self.rng.gen_range(4..=8);
        let row_h = LINE_HEIGHT + 8;
        let span = right - left;
        let cols_u = cols as u32;
        if span < cols_u * 40 + (cols_u - 1) * col_gap {
            return Err(gen_err(format!("{cols} columns do not fit across the page")));
        }
        let cell_w = (span - (cols_u - 1) * col_gap) / cols_u;
        let top = 80 + self.rng.gen_range(0..=100);
        if top + rows as u32 * (row_h + row_gap) > BOTTOM_LIMIT {
            return Err(gen_err(format!("{rows} rows do not fit down the page")));
        }
        for i in 0..rows as u32 {
            for j in 0..cols_u {
                let x0 = left + j * (cell_w + col_gap);
                let y0 = top + i * (row_h + row_gap);
                let cell = bbox(x0, y0, x0 + cell_w, y0 + row_h)?;
                let wanted = gen_range(self.rng, [1, self.words[1].clamp(1, 2)]);
                let mut words = Vec::new();
                let mut x = x0 + 4;
                for k in 0..wanted {
                    let text = numeric_token(self.rng);
                    let w = word_width(&text);
                    if x + w > cell.x1 - 2 {
                        if k == 0 {
                            return Err(gen_err("grid cell too narrow for its text"));
                        }
                        break;
                    }
                    words.push(Word {
                        text,
                        bbox: bbox(x, y0 + 4, x + w, y0 + 4 + LINE_HEIGHT)?,
                    });
                    x += w + WORD_SPACE;
                }
                let id = self.segments.len();
                self.segments.push(Segment { id, words, bbox: cell });
            }
        }
        let at = |i: usize, j: usize| i * cols + j;
        for i in 0..rows {
            for j in 0..cols {
                if j + 1 < cols {
                    self.pairs.push((at(i, j), at(i, j + 1)));
                }
                if i + 1 < rows {
                    self.pairs.push((at(i, j), at(i + 1, j)));
                }
            }
        }
        Ok(())
    }

    fn form(&mut self, fields: usize) -> Result<(), LayoutError> {
        let mut y = 60 + self.rng.gen_range(0..=30);
        let mut prev: Option<usize> = None;
        let mut chain = |b: &mut Self, id: usize| {
            if let Some(p) = prev {
                b.pairs.push((p, id));
            }
            prev = Some(id);
        };
        for f in 0..fields {
            if f > 0 && self.rng.gen_bool(0.2) {
                let n = self.rng.gen_range(1..=2);
                let texts = pick_words(self.rng, TITLE_WORDS, n);
                let id = self.push(texts, 60, y, 900)?;
                chain(self, id);
                y = self.segments[id].bbox.y1 + self.rng.gen_range(10..=18);
            }
            let x0 = 60 + self.rng.gen_range(0..=40);
            let n = self.rng.gen_range(1..=2);
            let mut texts = pick_words(self.rng, KEY_WORDS, n);
            if let Some(last) = texts.last_mut() {
                last.push(':');
            }
            let key = self.push(texts, x0, y, 500)?;
            chain(self, key);
            let kb = self.segments[key].bbox;
            let n = gen_range(self.rng, self.words).max(1);
            let texts: Vec<String> = (0..n)
                .map(|_| {
                    if self.rng.gen_bool(0.4) {
                        numeric_token(self.rng)
                    } else {
                        pick_words(self.rng, BODY_WORDS, 1).remove(0)
                    }
                })
                .collect();
            let value = if self.rng.gen_bool(0.5) {
                let dx = self.rng.gen_range(20..=60);
                self.push(texts, kb.x1 + dx, kb.y0, 940)?
            } else {
                let dx = self.rng.gen_range(0..=30);
                let dy = self.rng.gen_range(6..=10);
                self.push(texts, kb.x0 + dx, kb.y1 + dy, 940)?
            };
            chain(self, value);
            self.links.push((key, value));
            let bottom = self.segments[key].bbox.y1.max(self.segments[value].bbox.y1);
            if bottom > BOTTOM_LIMIT - 20 {
                return Err(gen_err(format!("{fields} form fields do not fit on the page")));
            }
            y = bottom + self.rng.gen_range(12..=20);
        }
        Ok(())
    }
}

/// Generates one page for `spec`.
pub fn generate_document(
    spec: LayoutSpec,
    words_per_segment: [usize; 2],
    rng: &mut ChaCha8Rng,
    id: String,
) -> Result<Document, LayoutError> {
    let mut b = Builder {
        rng,
        words: words_per_segment,
        segments: Vec::new(),
        pairs: Vec::new(),
        links: Vec::new(),
    };
    let mut has_links = false;
    match spec {
        LayoutSpec::Chain { segments } => {
            let x0 = 60 + b.rng.gen_range(0..=40);
            let max_x = 940 - b.rng.gen_range(0..=60);
            let y0 = 60 + b.rng.gen_range(0..=40);
            b.column(segments, x0, y0, max_x, BOTTOM_LIMIT)?;
        }
        LayoutSpec::TwoColumn { left, right } => {
            let lx = 50 + b.rng.gen_range(0..=20);
            let rx = 530 + b.rng.gen_range(0..=20);
            let ly = 60 + b.rng.gen_range(0..=30);
            let ry = 60 + b.rng.gen_range(0..=30);
            b.column(left, lx, ly, 470, BOTTOM_LIMIT)?;
            b.column(right, rx, ry, 950, BOTTOM_LIMIT)?;
        }
        LayoutSpec::Grid { rows, cols } => b.grid(rows, cols)?,
        LayoutSpec::HeaderFooter { body } => {
            let n = b.rng.gen_range(1..=3);
            let texts = pick_words(b.rng, HEADER_WORDS, n);
            let hx = 60 + b.rng.gen_range(0..=300);
            let hy = 20 + b.rng.gen_range(0..=20);
            b.push(texts, hx, hy, 940)?;
            let y0 = 100 + b.rng.gen_range(0..=20);
            let x0 = 60 + b.rng.gen_range(0..=40);
            b.column(body, x0, y0, 900, 920)?;
            let page = format!("{}", b.rng.gen_range(1..=300));
            let fx = 440 + b.rng.gen_range(0..=40);
            let fy = 950 + b.rng.gen_range(0..=10);
            let id = b.segments.len();
            let w1 = word_width("Page");
            let w2 = word_width(&page);
            let words = vec![
                Word {
                    text: "Page".into(),
                    bbox: bbox(fx, fy, fx + w1, fy + LINE_HEIGHT)?,
                },
                Word {
                    text: page,
                    bbox: bbox(fx + w1 + WORD_SPACE, fy, fx + w1 + WORD_SPACE + w2, fy + LINE_HEIGHT)?,
                },
            ];
            let sb = words[0].bbox.union(&words[1].bbox);
            b.segments.push(Segment { id, words, bbox: sb });
        }
        LayoutSpec::Form { fields } => {
            b.form(fields)?;
            has_links = true;
        }
    }
    let n = b.segments.len();
    let isdr = Relation::new(n, b.pairs)?;
    let links = if has_links { Some(Relation::new(n, b.links)?) } else { None };
    Ok(Document {
        id,
        page_width: COORD_MAX,
        page_height: COORD_MAX,
        segments: b.segments,
        isdr: Some(isdr),
        links,
    })
}

fn pick_spec(cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> Result<LayoutSpec, LayoutError> {
    let m = &cfg.mix;
    let weights = [m.chain, m.two_column, m.grid, m.header_footer, m.form];
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(gen_err("layout mix weights must be non-negative"));
    }
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(gen_err("layout mix has no positive weight"));
    }
    let mut u = rng.gen::<f64>() * total;
    let mut kind = weights.len() - 1;
    for (k, w) in weights.iter().enumerate() {
        if u < *w {
            kind = k;
            break;
        }
        u -= w;
    }
    Ok(match kind {
        0 => LayoutSpec::Chain {
            segments: gen_range(rng, cfg.chain_segments),
        },
        1 => LayoutSpec::TwoColumn {
            left: gen_range(rng, cfg.column_segments),
            right: gen_range(rng, cfg.column_segments),
        },
        2 => LayoutSpec::Grid {
            rows: gen_range(rng, cfg.grid_rows),
            cols: gen_range(rng, cfg.grid_cols),
        },
        3 => LayoutSpec::HeaderFooter {
            body: gen_range(rng, cfg.chain_segments),
        },
        _ => LayoutSpec::Form {
            fields: gen_range(rng, cfg.form_fields),
        },
    })
}

/// Generates a corpus; identical `(config, seed)` always gives an identical corpus.
pub fn synth_generate(cfg: &SynthConfig, seed: u64) -> Result<Corpus, LayoutError> {
    if cfg.n_docs == 0 {
        return Err(gen_err("n_docs must be positive"));
    }
    if cfg.words_per_segment[0] == 0 || cfg.words_per_segment[0] > cfg.words_per_segment[1] {
        return Err(gen_err("words_per_segment must be a range [min, max] with min ≥ 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut documents = Vec::with_capacity(cfg.n_docs);
    for k in 0..cfg.n_docs {
        let spec = pick_spec(cfg, &mut rng)?;
        let id = format!("{}-{k:05}-{}", cfg.id_prefix, spec.tag());
        documents.push(generate_document(spec, cfg.words_per_segment, &mut rng, id)?);
    }
    let s = &cfg.split;
    let total = s.train + s.validation + s.test;
    if !(total > 0.0) {
        return Err(gen_err("split fractions must sum to a positive value"));
    }
    let n = cfg.n_docs as f64;
    let n_train = (n * s.train / total).round() as usize;
    let n_val = (n * s.validation / total).round() as usize;
    let split = documents
        .iter()
        .enumerate()
        .map(|(k, d)| {
            let which = if k < n_train {
                Split::Train
            } else if k < n_train + n_val {
                Split::Validation
            } else {
                Split::Test
            };
            (d.id.clone(), which)
        })
        .collect();
    Ok(Corpus { documents, split })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::order::is_acyclic;

    fn one(spec: LayoutSpec) -> Document {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        generate_document(spec, [1, 3], &mut rng, "t".into()).unwrap()
    }

    #[test]
    fn grid_two_by_two() {
        let d = one(LayoutSpec::Grid { rows: 2, cols: 2 });
        let gold = Relation::new(4, [(0, 1), (0, 2), (1, 3), (2, 3)]).unwrap();
        assert_eq!(d.isdr.unwrap(), gold);
    }

    #[test]
    fn chain_of_three() {
        let d = one(LayoutSpec::Chain { segments: 3 });
        assert_eq!(d.isdr.unwrap(), Relation::new(3, [(0, 1), (1, 2)]).unwrap());
    }

    #[test]
    fn two_column_never_crosses() {
        let d = one(LayoutSpec::TwoColumn { left: 3, right: 2 });
        assert_eq!(d.isdr.unwrap(), Relation::new(5, [(0, 1), (1, 2), (3, 4)]).unwrap());
    }

    #[test]
    fn header_footer_unlinked() {
        let d = one(LayoutSpec::HeaderFooter { body: 3 });
        let last = d.segment_count() - 1;
        let isdr = d.isdr.unwrap();
        assert!(isdr.pairs().all(|(i, j)| i != 0 && j != 0 && i != last && j != last));
        assert_eq!(isdr.len(), 2);
    }

    #[test]
    fn form_links_are_isdr_pairs() {
        let d = one(LayoutSpec::Form { fields: 5 });
        let links = d.links.as_ref().unwrap();
        assert_eq!(links.len(), 5);
        assert!(links.is_subset(d.isdr.as_ref().unwrap()));
        assert!(is_acyclic(d.isdr.as_ref().unwrap()).is_ok());
    }

    #[test]
    fn packing_failure_is_an_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let err = generate_document(LayoutSpec::Chain { segments: 200 }, [1, 2], &mut rng, "x".into());
        assert!(matches!(err, Err(LayoutError::Generation(_))));
    }

    #[test]
    fn split_fractions_respected() {
        let cfg = SynthConfig {
            n_docs: 10,
            ..Default::default()
        };
        let c = synth_generate(&cfg, 3).unwrap();
        assert_eq!(c.documents_in(Split::Train).len(), 8);
        assert_eq!(c.documents_in(Split::Test).len(), 2);
    }
}
