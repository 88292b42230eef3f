use std::ops::Range;

use rand::Rng;

use crate::nn::{Graph, NnError, NodeId, ParameterStore, Tensor};
use crate::order::Relation;

pub const WQ: &str = "gp.Wq";
pub const WK: &str = "gp.Wk";
pub const BQ: &str = "gp.bq";
pub const BK: &str = "gp.bk";

/// Square matrix of pair scores, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoreMatrix {
    n: usize,
    values: Vec<f64>,
}

impl ScoreMatrix {
    pub fn new(n: usize, values: Vec<f64>) -> Result<Self, NnError> {
        if values.len() != n * n {
            return Err(NnError::Shape(format!("{} scores for {n}x{n}", values.len())));
        }
        Ok(Self { n, values })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Query/key projections of the pointer head: `W_q, W_k` are `d×d_gp`.
#[derive(Clone, Debug, PartialEq)]
pub struct GlobalPointerHead {
    pub wq: Tensor,
    pub wk: Tensor,
    pub bq: Tensor,
    pub bk: Tensor,
}

impl GlobalPointerHead {
    pub fn from_store(store: &ParameterStore) -> Result<Self, NnError> {
        Ok(Self {
            wq: store.get(WQ)?.clone(),
            wk: store.get(WK)?.clone(),
            bq: store.get(BQ)?.clone(),
            bk: store.get(BK)?.clone(),
        })
    }

    pub fn init<R: Rng>(store: &mut ParameterStore, model_dim: usize, head_size: usize, rng: &mut R) -> Result<(), NnError> {
        let std = 0.5 / (model_dim as f64).sqrt();
        store.insert_normal(WQ, model_dim, head_size, std, rng)?;
        store.insert_normal(WK, model_dim, head_size, std, rng)?;
        store.insert_constant(BQ, 1, head_size, 0.0)?;
        store.insert_constant(BK, 1, head_size, 0.0)?;
        Ok(())
    }

    /// Adds the head to a graph, reading its parameters from `store`.
    pub(crate) fn scores_node(g: &mut Graph, store: &ParameterStore, h: NodeId) -> Result<NodeId, NnError> {
        let (wq, bq, wk, bk) = (g.param(store, WQ)?, g.param(store, BQ)?, g.param(store, WK)?, g.param(store, BK)?);
        let q = g.matmul(h, wq)?;
        let q = g.add_row(q, bq)?;
        let k = g.matmul(h, wk)?;
        let k = g.add_row(k, bk)?;
        g.matmul_t(q, k)
    }
}

/// Mean of the token rows in each span. Spans must cover `0..n` in order
/// without gaps; none may be empty.
pub fn pool_elements(tokens: &Tensor, spans: &[Range<usize>]) -> Result<Tensor, NnError> {
    check_spans(spans, tokens.rows())?;
    let mut g = Graph::new();
    let x = g.input(tokens.clone());
    let p = g.mean_pool(x, spans.to_vec())?;
    Ok(g.value(p).clone())
}

pub(crate) fn check_spans(spans: &[Range<usize>], n: usize) -> Result<(), NnError> {
    let mut next = 0;
    for s in spans {
        if s.start != next || s.end <= s.start {
            return Err(NnError::Shape(format!("span {s:?} does not continue a partition at {next}")));
        }
        next = s.end;
    }
    if next != n {
        return Err(NnError::Shape(format!("spans cover {next} of {n} tokens")));
    }
    Ok(())
}

/// `s_ij = (W_qᵀh_i + b_q)·(W_kᵀh_j + b_k)` for every ordered pair, diagonal included.
pub fn score_pairs(elements: &Tensor, head: &GlobalPointerHead) -> Result<ScoreMatrix, NnError> {
    let mut store = ParameterStore::new();
    store.insert(WQ, head.wq.clone())?;
    store.insert(WK, head.wk.clone())?;
    store.insert(BQ, head.bq.clone())?;
    store.insert(BK, head.bk.clone())?;
    let mut g = Graph::new();
    let h = g.input(elements.clone());
    let s = GlobalPointerHead::scores_node(&mut g, &store, h)?;
    ScoreMatrix::new(elements.rows(), g.value(s).values().to_vec())
}

/// Class-imbalance loss of `scores` against the label relation.
pub fn gp_loss(scores: &ScoreMatrix, label: &Relation, mask_diagonal: bool) -> Result<f64, NnError> {
    if label.element_count() != scores.n() {
        return Err(NnError::Shape(format!(
            "label over {} elements for {} scores",
            label.element_count(),
            scores.n()
        )));
    }
    Ok(crate::nn::pair_loss(scores.values(), scores.n(), &label.to_matrix(), mask_diagonal)?.value)
}
