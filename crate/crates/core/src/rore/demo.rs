//! Toy key-to-value linking task run with and without relation-aware
//! attention. Every arm shares the seed, the initialization and the training
//! schedule; only the token relation fed to attention differs.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::eval::PairMetrics;
use crate::layout::{Corpus, Document, Split};
use crate::nn::EncoderConfig;
use crate::order::Relation;
use crate::rop::{predict_pseudo_labels, train, train_examples, Example, RopConfig, RopModel};

use super::{build_relation_matrix, RelationKind, RoreError, SpanMap};

/// Where the reading order relation fed to attention comes from.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelSource {
    #[default]
    GroundTruth,
    /// Predictions of a reading order model: loaded from `model_path`, or
    /// trained on the corpus's training split when no path is given.
    Pseudo { model_path: Option<PathBuf> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RoreDemoConfig {
    pub encoder: EncoderConfig,
    /// Training of the linking models.
    pub link: RopConfig,
    /// Training of the reading order model behind pseudo labels.
    pub pseudo: RopConfig,
    pub pseudo_encoder: EncoderConfig,
    pub label_source: LabelSource,
    pub kinds: Vec<RelationKind>,
}

impl Default for RoreDemoConfig {
    fn default() -> Self {
        let encoder = EncoderConfig {
            layers: 2,
            model_dim: 32,
            heads: 4,
            ffn_dim: 64,
            vocab_hash_size: 1024,
            ..Default::default()
        };
        Self {
            encoder,
            link: RopConfig {
                epochs: 60,
                patience: 20,
                head_size: 32,
                ..Default::default()
            },
            pseudo: RopConfig {
                epochs: 120,
                patience: 20,
                learning_rate: 2e-3,
                enforce_acyclic: true,
                ..Default::default()
            },
            pseudo_encoder: EncoderConfig::default(),
            label_source: LabelSource::GroundTruth,
            kinds: vec![RelationKind::Isdr, RelationKind::Gsdr],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ArmResult {
    pub kind: RelationKind,
    pub f1: f64,
    pub metrics: PairMetrics,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DemoReport {
    pub label_source: LabelSource,
    pub test_documents: usize,
    pub f1_vanilla: f64,
    pub vanilla: PairMetrics,
    pub rore: Vec<ArmResult>,
    /// Share of acyclic pseudo relations before any repair.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pseudo_acyclic_rate: Option<f64>,
    /// Pair-F1 of the pseudo relations against gold reading order, test split.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pseudo_f1: Option<f64>,
}

impl DemoReport {
    pub fn f1_rore(&self, kind: RelationKind) -> Option<f64> {
        self.rore.iter().find(|a| a.kind == kind).map(|a| a.f1)
    }
}

fn link_example(doc: &Document, cfg: &RopConfig, enc: &EncoderConfig) -> Result<Example, RoreError> {
    let mut ex = Example::from_document(doc, cfg, enc, false)?;
    ex.label = Some(doc.links.clone().ok_or_else(|| RoreError::MissingLinks(vec![doc.id.clone()]))?);
    Ok(ex)
}

fn with_relation(
    examples: &[Example],
    docs: &[&Document],
    relations: &[Relation],
    kind: Option<RelationKind>,
) -> Result<Vec<Example>, RoreError> {
    let mut out = examples.to_vec();
    if let Some(kind) = kind {
        for ((ex, doc), rel) in out.iter_mut().zip(docs).zip(relations) {
            let spans = SpanMap::new(doc.word_spans())?;
            ex.relation = Some(build_relation_matrix(rel, &spans, kind)?.bits);
        }
    }
    Ok(out)
}

/// Reading order relation of every document for the configured source.
fn relations(corpus: &Corpus, cfg: &RoreDemoConfig, report: &mut DemoReport) -> Result<Vec<Relation>, RoreError> {
    match &cfg.label_source {
        LabelSource::GroundTruth => Ok(corpus
            .documents
            .iter()
            .map(|d| d.require_isdr().cloned())
            .collect::<Result<_, _>>()?),
        LabelSource::Pseudo { model_path } => {
            let mut model = match model_path {
                Some(p) => RopModel::load(p)?,
                None => {
                    let mut reading = corpus.clone();
                    for d in &mut reading.documents {
                        d.links = None;
                    }
                    train(&reading, &cfg.pseudo, &cfg.pseudo_encoder)?.0
                }
            };
            model.config.enforce_acyclic = false;
            let (_, raw) = predict_pseudo_labels(&model, corpus)?;
            report.pseudo_acyclic_rate = raw.acyclic_rate();
            model.config.enforce_acyclic = true;
            let (pseudo, pr) = predict_pseudo_labels(&model, corpus)?;
            if !pr.skipped.is_empty() {
                return Err(RoreError::Spans(format!("documents too large for the pseudo-label model: {:?}", pr.skipped)));
            }
            let mut acc = PairMetrics::from_counts(0, 0, 0);
            for (p, g) in pseudo.documents.iter().zip(&corpus.documents) {
                if corpus.split_of(&g.id) == Split::Test {
                    if let (Some(pred), Some(gold)) = (&p.isdr, &g.isdr) {
                        acc = acc.merge(&PairMetrics::of(gold, pred).map_err(|e| RoreError::Spans(e.to_string()))?);
                    }
                }
            }
            report.pseudo_f1 = Some(acc.f1);
            Ok(pseudo.documents.into_iter().map(|d| d.isdr.expect("predicted")).collect())
        }
    }
}

/// Trains a linking model without relation bias and one per configured
/// relation kind, and scores all of them on the test split.
pub fn rore_demo_entity_linking(corpus: &Corpus, cfg: &RoreDemoConfig) -> Result<DemoReport, RoreError> {
    let missing: Vec<String> = corpus
        .documents
        .iter()
        .filter(|d| d.links.is_none())
        .map(|d| d.id.clone())
        .collect();
    if !missing.is_empty() {
        return Err(RoreError::MissingLinks(missing));
    }
    let mut report = DemoReport {
        label_source: cfg.label_source.clone(),
        test_documents: 0,
        f1_vanilla: 0.0,
        vanilla: PairMetrics::default(),
        rore: Vec::new(),
        pseudo_acyclic_rate: None,
        pseudo_f1: None,
    };
    let rels = relations(corpus, cfg, &mut report)?;

    let mut parts: [(Vec<&Document>, Vec<Relation>); 3] = Default::default();
    for (doc, rel) in corpus.documents.iter().zip(rels) {
        let k = match corpus.split_of(&doc.id) {
            Split::Train => 0,
            Split::Validation => 1,
            Split::Test => 2,
        };
        parts[k].0.push(doc);
        parts[k].1.push(rel);
    }
    let base: Vec<Vec<Example>> = parts
        .iter()
        .map(|(docs, _)| docs.iter().map(|d| link_example(d, &cfg.link, &cfg.encoder)).collect())
        .collect::<Result<_, _>>()?;
    report.test_documents = base[2].len();

    let run = |kind: Option<RelationKind>| -> Result<PairMetrics, RoreError> {
        let sets: Vec<Vec<Example>> = (0..3)
            .map(|k| with_relation(&base[k], &parts[k].0, &parts[k].1, kind))
            .collect::<Result<_, _>>()?;
        let (model, tr) = train_examples(&sets[0], &sets[1], &cfg.link, &cfg.encoder)?;
        log::info!(
            "linking arm {}: {} epochs, best monitored F1 {:.4}",
            kind.map_or("vanilla".to_string(), |k| k.to_string()),
            tr.epochs_run,
            tr.best_f1
        );
        Ok(model.evaluate(&sets[2])?)
    };
    report.vanilla = run(None)?;
    report.f1_vanilla = report.vanilla.f1;
    for &kind in &cfg.kinds {
        let m = run(Some(kind))?;
        report.rore.push(ArmResult { kind, f1: m.f1, metrics: m });
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layout::{synth_generate, LayoutMix, SynthConfig};

    fn forms(n: usize) -> Corpus {
        let cfg = SynthConfig {
            n_docs: n,
            mix: LayoutMix {
                chain: 0.0,
                two_column: 0.0,
                grid: 0.0,
                header_footer: 0.0,
                form: 1.0,
            },
            ..Default::default()
        };
        synth_generate(&cfg, 5).unwrap()
    }

    fn quick() -> RoreDemoConfig {
        let mut cfg = RoreDemoConfig::default();
        cfg.encoder.model_dim = 16;
        cfg.encoder.ffn_dim = 16;
        cfg.encoder.layers = 1;
        cfg.link.epochs = 2;
        cfg.link.head_size = 8;
        cfg.kinds = vec![RelationKind::Isdr];
        cfg
    }

    #[test]
    fn frozen_zero_lambda_matches_vanilla() {
        let mut cfg = quick();
        cfg.encoder.lambda_init = 0.0;
        cfg.encoder.freeze_lambda = true;
        let r = rore_demo_entity_linking(&forms(10), &cfg).unwrap();
        assert_eq!(r.f1_rore(RelationKind::Isdr), Some(r.f1_vanilla));
        assert_eq!(r.rore[0].metrics, r.vanilla);
    }

    #[test]
    fn requires_links() {
        let mut c = forms(3);
        c.documents[1].links = None;
        assert!(matches!(rore_demo_entity_linking(&c, &quick()), Err(RoreError::MissingLinks(_))));
    }
}
