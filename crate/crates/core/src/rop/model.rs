use std::collections::BTreeMap;
use std::ops::Range;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::eval::PairMetrics;
use crate::layout::{collapse_to_segments, derive_word_level, BBox, Corpus, Document, Split};
use crate::nn::{
    encoder_forward, init_encoder_params, load_checkpoint, save_checkpoint, AdamW, Checkpoint, EncoderConfig,
    EncoderInput, Graph, NnError, NodeId, ParameterStore, RelationBias,
};
use crate::order::Relation;

use super::head::{check_spans, GlobalPointerHead};
use super::{decode, Level, RopConfig, RopError, ScoreMatrix};

/// One document prepared for the encoder: tokens are words, elements are
/// words or segments depending on the task level.
#[derive(Clone, Debug, PartialEq)]
pub struct Example {
    pub doc_id: String,
    pub input: EncoderInput,
    pub spans: Vec<Range<usize>>,
    /// Label at the task level; absent for unlabelled prediction input.
    pub label: Option<Relation>,
    /// Token-level `n×n` relation fed to relation-aware attention.
    pub relation: Option<Vec<bool>>,
}

impl Example {
    /// Fails with an overflow error when the document exceeds the element or
    /// token limits; such documents are never truncated.
    pub fn from_document(
        doc: &Document,
        cfg: &RopConfig,
        enc: &EncoderConfig,
        with_label: bool,
    ) -> Result<Self, RopError> {
        let spans = match cfg.task_level {
            Level::Word => (0..doc.word_count()).map(|w| w..w + 1).collect(),
            Level::Segment => doc.word_spans(),
        };
        if spans.len() > cfg.element_limit() {
            return Err(RopError::TooManyElements {
                doc: doc.id.clone(),
                got: spans.len(),
                max: cfg.element_limit(),
            });
        }
        let max_tokens = cfg.max_tokens.min(enc.max_tokens);
        if doc.word_count() > max_tokens {
            return Err(RopError::TooManyTokens {
                doc: doc.id.clone(),
                got: doc.word_count(),
                max: max_tokens,
            });
        }
        if let Some(s) = spans.iter().position(|r| r.is_empty()) {
            return Err(RopError::Layout(crate::layout::LayoutError::Validation {
                doc: doc.id.clone(),
                message: format!("segment {s} has no words"),
            }));
        }
        let tokens: Vec<(&str, BBox)> = doc
            .segments
            .iter()
            .flat_map(|s| {
                s.words.iter().map(move |w| {
                    let b = match cfg.bbox_level {
                        Level::Word => w.bbox,
                        Level::Segment => s.bbox,
                    };
                    (w.text.as_str(), b)
                })
            })
            .collect();
        let label = if with_label {
            Some(match cfg.task_level {
                Level::Word => derive_word_level(doc)?,
                Level::Segment => doc.require_isdr()?.clone(),
            })
        } else {
            None
        };
        Ok(Self {
            doc_id: doc.id.clone(),
            input: EncoderInput::new(enc, &tokens, false)?,
            spans,
            label,
            relation: None,
        })
    }

    pub fn element_count(&self) -> usize {
        self.spans.len()
    }
}

fn forward_scores(
    g: &mut Graph,
    cfg: &RopConfig,
    enc: &EncoderConfig,
    store: &ParameterStore,
    ex: &Example,
) -> Result<NodeId, NnError> {
    check_spans(&ex.spans, ex.input.len())?;
    let bias = match &ex.relation {
        Some(bits) => Some(RelationBias::new(ex.input.len(), bits, cfg.bias_layers)?),
        None => None,
    };
    let h = encoder_forward(g, enc, store, &ex.input, bias.as_ref())?;
    let pooled = g.mean_pool(h, ex.spans.clone())?;
    GlobalPointerHead::scores_node(g, store, pooled)
}

/// Graph of the pair loss of one labelled example under the parameters in
/// `store`, ending in the scalar loss node.
pub fn loss_graph(
    cfg: &RopConfig,
    enc: &EncoderConfig,
    store: &ParameterStore,
    ex: &Example,
) -> Result<(Graph, NodeId), NnError> {
    let label = ex
        .label
        .as_ref()
        .ok_or_else(|| NnError::Shape(format!("example {} has no label", ex.doc_id)))?;
    let mut g = Graph::new();
    let s = forward_scores(&mut g, cfg, enc, store, ex)?;
    let loss = g.pair_loss(s, &label.to_matrix(), cfg.mask_diagonal)?;
    Ok((g, loss))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct ModelConfig {
    rop: RopConfig,
    encoder: EncoderConfig,
}

/// Encoder plus pointer head.
#[derive(Clone, Debug, PartialEq)]
pub struct RopModel {
    pub config: RopConfig,
    pub encoder: EncoderConfig,
    pub store: ParameterStore,
}

impl RopModel {
    /// Freshly initialized from `config.seed`.
    pub fn new(config: RopConfig, encoder: EncoderConfig) -> Result<Self, RopError> {
        config.validate()?;
        encoder.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut store = ParameterStore::new();
        init_encoder_params(&encoder, &mut store, &mut rng)?;
        GlobalPointerHead::init(&mut store, encoder.model_dim, config.head_size, &mut rng)?;
        Ok(Self { config, encoder, store })
    }

    pub fn example(&self, doc: &Document, with_label: bool) -> Result<Example, RopError> {
        Example::from_document(doc, &self.config, &self.encoder, with_label)
    }

    fn forward(&self, g: &mut Graph, ex: &Example) -> Result<NodeId, NnError> {
        forward_scores(g, &self.config, &self.encoder, &self.store, ex)
    }

    pub fn scores(&self, ex: &Example) -> Result<ScoreMatrix, RopError> {
        if ex.element_count() == 0 {
            return Ok(ScoreMatrix::new(0, Vec::new())?);
        }
        let mut g = Graph::new();
        let s = self.forward(&mut g, ex)?;
        Ok(ScoreMatrix::new(ex.element_count(), g.value(s).values().to_vec())?)
    }

    /// Decoded relation at the task level.
    pub fn predict_example(&self, ex: &Example) -> Result<Relation, RopError> {
        let s = self.scores(ex)?;
        Ok(decode(&s, self.config.threshold, self.config.enforce_acyclic))
    }

    /// Decoded relation over the document's segments; word-level predictions
    /// are collapsed onto their segments.
    pub fn predict_segments(&self, doc: &Document) -> Result<Relation, RopError> {
        let ex = self.example(doc, false)?;
        let rel = self.predict_example(&ex)?;
        Ok(match self.config.task_level {
            Level::Segment => rel,
            Level::Word => collapse_to_segments(doc, &rel)?,
        })
    }

    /// Loss and parameter gradients of one labelled example.
    fn loss_and_grads(&self, ex: &Example) -> Result<(f64, BTreeMap<String, Vec<f64>>), RopError> {
        let (g, loss) = loss_graph(&self.config, &self.encoder, &self.store, ex)?;
        let grads = g.backward(loss)?;
        let mut map = g.param_grads(&grads);
        map.retain(|name, _| self.store.param(name).is_some_and(|p| !p.options.frozen));
        Ok((g.scalar(loss), map))
    }

    /// Pooled pair counts of predictions against labels, task level.
    pub fn evaluate(&self, examples: &[Example]) -> Result<PairMetrics, RopError> {
        Ok(self.evaluate_with_loss(examples)?.0)
    }

    /// Pooled pair counts and the mean loss over the examples.
    pub fn evaluate_with_loss(&self, examples: &[Example]) -> Result<(PairMetrics, f64), RopError> {
        let parts = examples
            .par_iter()
            .map(|ex| -> Result<(PairMetrics, f64), RopError> {
                let gold = ex.label.as_ref().ok_or_else(|| RopError::Config("evaluation example without label".into()))?;
                let scores = self.scores(ex)?;
                let loss = if scores.n() == 0 {
                    0.0
                } else {
                    super::gp_loss(&scores, gold, self.config.mask_diagonal)?
                };
                let pred = decode(&scores, self.config.threshold, self.config.enforce_acyclic);
                let m = PairMetrics::of(gold, &pred).map_err(|e| RopError::Config(e.to_string()))?;
                Ok((m, loss))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let metrics = parts.iter().fold(PairMetrics::from_counts(0, 0, 0), |acc, (m, _)| acc.merge(m));
        let loss = parts.iter().map(|(_, l)| l).sum::<f64>() / parts.len().max(1) as f64;
        Ok((metrics, loss))
    }

    pub fn checkpoint(&self) -> Result<Checkpoint, RopError> {
        let cfg = ModelConfig {
            rop: self.config.clone(),
            encoder: self.encoder.clone(),
        };
        Ok(Checkpoint::new(&cfg, &self.store)?)
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self, RopError> {
        let cfg: ModelConfig = ck.config()?;
        let mut model = RopModel::new(cfg.rop, cfg.encoder)?;
        ck.restore_into(&mut model.store)?;
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<(), RopError> {
        Ok(save_checkpoint(path, &self.checkpoint()?)?)
    }

    pub fn load(path: &Path) -> Result<Self, RopError> {
        Self::from_checkpoint(&load_checkpoint(path)?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrainReport {
    pub trained_documents: usize,
    /// Documents left out for exceeding the element or token limits.
    pub skipped: Vec<String>,
    /// Split whose pair-F1 drives early stopping.
    pub monitor: Split,
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub best_f1: f64,
    /// Mean training loss of each epoch.
    pub epoch_losses: Vec<f64>,
}

impl TrainReport {
    pub fn final_loss(&self) -> Option<f64> {
        self.epoch_losses.last().copied()
    }
}

fn examples_for(docs: &[&Document], cfg: &RopConfig, enc: &EncoderConfig, skipped: &mut Vec<String>) -> Result<Vec<Example>, RopError> {
    let mut out = Vec::new();
    for doc in docs {
        match Example::from_document(doc, cfg, enc, true) {
            Ok(ex) if ex.element_count() > 0 => out.push(ex),
            Ok(_) => {}
            Err(e) if e.is_overflow() => {
                log::warn!("skipping {e}");
                skipped.push(doc.id.clone());
            }
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

/// Trains on the corpus's train split and returns the parameters with the
/// best monitored pair-F1, ties going to the lower monitored loss. The
/// validation split is monitored when present, the training split otherwise.
/// Training stops after `patience` epochs without improvement.
pub fn train(corpus: &Corpus, cfg: &RopConfig, enc: &EncoderConfig) -> Result<(RopModel, TrainReport), RopError> {
    let mut skipped = Vec::new();
    let train_set = examples_for(&corpus.documents_in(Split::Train), cfg, enc, &mut skipped)?;
    let val_set = examples_for(&corpus.documents_in(Split::Validation), cfg, enc, &mut skipped)?;
    let (model, mut report) = train_examples(&train_set, &val_set, cfg, enc)?;
    report.skipped = skipped;
    Ok((model, report))
}

/// Training on prepared examples, which may carry any pair labels and token
/// relations. An empty validation set means the training set is monitored.
pub fn train_examples(
    train_set: &[Example],
    val_set: &[Example],
    cfg: &RopConfig,
    enc: &EncoderConfig,
) -> Result<(RopModel, TrainReport), RopError> {
    let mut model = RopModel::new(cfg.clone(), enc.clone())?;
    if train_set.is_empty() {
        return Err(RopError::EmptyTrainingSplit);
    }
    let (monitor, monitor_set) = if val_set.is_empty() {
        (Split::Train, train_set)
    } else {
        (Split::Validation, val_set)
    };

    let opt = AdamW::new(cfg.learning_rate).with_weight_decay(cfg.weight_decay);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut best = (f64::NEG_INFINITY, 0, model.store.clone());
    let mut best_loss = f64::INFINITY;
    let mut stale = 0;
    let mut report = TrainReport {
        trained_documents: train_set.len(),
        skipped: Vec::new(),
        monitor,
        epochs_run: 0,
        best_epoch: 0,
        best_f1: 0.0,
        epoch_losses: Vec::new(),
    };

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let results = batch
                .par_iter()
                .map(|&i| model.loss_and_grads(&train_set[i]))
                .collect::<Result<Vec<_>, _>>()?;
            model.store.zero_grad();
            let scale = 1.0 / batch.len() as f64;
            for (loss, grads) in &results {
                total += loss;
                model.store.accumulate_grads(grads, scale)?;
            }
            opt.step(&mut model.store)?;
        }
        let mean_loss = total / train_set.len() as f64;
        if !mean_loss.is_finite() {
            return Err(NnError::NonFinite(format!("training loss at epoch {epoch}")).into());
        }
        report.epoch_losses.push(mean_loss);
        report.epochs_run = epoch;

        let (metrics, monitor_loss) = model.evaluate_with_loss(monitor_set)?;
        let f1 = metrics.f1;
        log::info!("epoch {epoch}: loss {mean_loss:.6} {monitor} pair-F1 {f1:.4} loss {monitor_loss:.6}");
        if f1 > best.0 || (f1 == best.0 && monitor_loss < best_loss) {
            best = (f1, epoch, model.store.clone());
            best_loss = monitor_loss;
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience {
                break;
            }
        }
    }
    report.best_f1 = best.0.max(0.0);
    report.best_epoch = best.1;
    if best.1 > 0 {
        model.store = best.2;
    }
    Ok((model, report))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionSummary {
    pub acyclic: bool,
    pub num_pairs: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct PredictionReport {
    pub documents: BTreeMap<String, PredictionSummary>,
    pub skipped: Vec<String>,
}

impl PredictionReport {
    /// Share of predicted relations that are acyclic; `None` without predictions.
    pub fn acyclic_rate(&self) -> Option<f64> {
        let n = self.documents.len();
        (n > 0).then(|| self.documents.values().filter(|s| s.acyclic).count() as f64 / n as f64)
    }

    /// The per-document sidecar object `{doc_id: {acyclic, num_pairs}}`.
    pub fn sidecar_json(&self) -> String {
        serde_json::to_string_pretty(&self.documents).expect("report serializes")
    }
}

/// Replaces every document's `isdr` with the model's segment-level prediction.
/// Documents over the size limits keep their original annotation and are
/// listed as skipped.
pub fn predict_pseudo_labels(model: &RopModel, corpus: &Corpus) -> Result<(Corpus, PredictionReport), RopError> {
    let preds = corpus
        .documents
        .par_iter()
        .map(|doc| match model.predict_segments(doc) {
            Ok(rel) => Ok(Some(rel)),
            Err(e) if e.is_overflow() => {
                log::warn!("skipping {e}");
                Ok(None)
            }
            Err(e) => Err(e),
        })
        .collect::<Result<Vec<_>, RopError>>()?;
    let mut out = corpus.clone();
    let mut report = PredictionReport::default();
    for (doc, pred) in out.documents.iter_mut().zip(preds) {
        match pred {
            Some(rel) => {
                report.documents.insert(
                    doc.id.clone(),
                    PredictionSummary {
                        acyclic: crate::order::is_acyclic(&rel).is_ok(),
                        num_pairs: rel.len(),
                    },
                );
                doc.isdr = Some(rel);
            }
            None => report.skipped.push(doc.id.clone()),
        }
    }
    Ok((out, report))
}
