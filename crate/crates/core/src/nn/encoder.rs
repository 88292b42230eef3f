//! Toy text-and-layout transformer encoder.
//!
//! Each token is embedded as the sum of a hashed-text embedding and four
//! coordinate embeddings (`x0`, `y0`, `x1`, `y1` lookup tables over
//! `0..=1000`). Pre-norm blocks of attention and a rectified two-layer
//! feed-forward follow, each with a residual connection; a final layer norm
//! is applied when there is at least one block.

use std::f64::consts::PI;
use std::rc::Rc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::layout::{BBox, COORD_MAX};

use super::attention::multi_head_attention;
use super::{Graph, NnError, NodeId, ParamOptions, ParameterStore, Tensor};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EncoderConfig {
    pub layers: usize,
    pub model_dim: usize,
    pub heads: usize,
    pub ffn_dim: usize,
    pub vocab_hash_size: usize,
    pub coord_buckets: usize,
    pub max_tokens: usize,
    /// Initial value of every per-layer relation weight.
    pub lambda_init: f64,
    /// Learning rate for the relation weights; `None` uses the global one.
    pub lambda_learning_rate: Option<f64>,
    /// Whether the coordinate tables are updated during training. Their
    /// sinusoidal initialization is what lets unseen coordinates generalize.
    pub train_coordinate_tables: bool,
    /// Keeps the relation weights at their initial value.
    pub freeze_lambda: bool,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self {
            layers: 2,
            model_dim: 64,
            heads: 4,
            ffn_dim: 128,
            vocab_hash_size: 4096,
            coord_buckets: COORD_MAX as usize + 1,
            max_tokens: 2048,
            lambda_init: 10.0,
            lambda_learning_rate: Some(1e-2),
            train_coordinate_tables: false,
            freeze_lambda: false,
        }
    }
}

impl EncoderConfig {
    pub fn head_dim(&self) -> usize {
        self.model_dim / self.heads.max(1)
    }

    pub fn validate(&self) -> Result<(), NnError> {
        let positive = [
            ("model_dim", self.model_dim),
            ("heads", self.heads),
            ("ffn_dim", self.ffn_dim),
            ("vocab_hash_size", self.vocab_hash_size),
            ("max_tokens", self.max_tokens),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(NnError::Config(format!("{name} must be positive")));
        }
        if self.model_dim % self.heads != 0 {
            return Err(NnError::Config(format!(
                "model_dim {} not divisible by {} heads",
                self.model_dim, self.heads
            )));
        }
        if self.coord_buckets <= COORD_MAX as usize {
            return Err(NnError::Config(format!("coord_buckets must exceed {COORD_MAX}")));
        }
        Ok(())
    }
}

pub const TOKEN_TABLE: &str = "embed.token";
pub const COORD_TABLES: [&str; 4] = ["embed.x0", "embed.y0", "embed.x1", "embed.y1"];

pub fn layer_param(layer: usize, name: &str) -> String {
    format!("layer{layer}.{name}")
}

pub fn lambda_param(layer: usize) -> String {
    layer_param(layer, "lambda")
}

/// 64-bit FNV-1a.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

pub fn token_id(text: &str, vocab_hash_size: usize) -> usize {
    (fnv1a(text.as_bytes()) % vocab_hash_size as u64) as usize
}

/// Hashed token ids and their boxes.
#[derive(Clone, Debug, PartialEq)]
pub struct EncoderInput {
    pub token_ids: Vec<usize>,
    pub boxes: Vec<BBox>,
}

impl EncoderInput {
    /// Hashes `tokens`. More than `max_tokens` is an error unless `truncate`
    /// is set, in which case the tail is dropped.
    pub fn new<S: AsRef<str>>(cfg: &EncoderConfig, tokens: &[(S, BBox)], truncate: bool) -> Result<Self, NnError> {
        if tokens.len() > cfg.max_tokens && !truncate {
            return Err(NnError::TooManyTokens {
                got: tokens.len(),
                max: cfg.max_tokens,
            });
        }
        let keep = tokens.len().min(cfg.max_tokens);
        Ok(Self {
            token_ids: tokens[..keep]
                .iter()
                .map(|(t, _)| token_id(t.as_ref(), cfg.vocab_hash_size))
                .collect(),
            boxes: tokens[..keep].iter().map(|(_, b)| *b).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.token_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.token_ids.is_empty()
    }
}

/// Which blocks receive the relation bias.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BiasLayers {
    #[default]
    All,
    First(usize),
}

impl BiasLayers {
    pub fn applies(&self, layer: usize) -> bool {
        match self {
            BiasLayers::All => true,
            BiasLayers::First(k) => layer < *k,
        }
    }
}

/// Token-level 0/1 relation matrix fed to every selected block; the weights
/// come from the `layer{l}.lambda` parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct RelationBias {
    pub n: usize,
    pub rho: Rc<Vec<f64>>,
    pub layers: BiasLayers,
}

impl RelationBias {
    pub fn new(n: usize, bits: &[bool], layers: BiasLayers) -> Result<Self, NnError> {
        if bits.len() != n * n {
            return Err(NnError::Shape(format!("relation matrix of {} entries for {n} tokens", bits.len())));
        }
        Ok(Self {
            n,
            rho: Rc::new(bits.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect()),
            layers,
        })
    }
}

/// Sinusoidal features of a coordinate, occupying one quarter of the model
/// dimensions: wavelengths run geometrically from 2000 down to 20 units.
fn coordinate_table(cfg: &EncoderConfig, quarter: usize) -> Vec<f64> {
    let d = cfg.model_dim;
    let width = d / 4;
    let pairs = width / 2;
    let mut t = vec![0.0; cfg.coord_buckets * d];
    for c in 0..cfg.coord_buckets {
        for p in 0..pairs {
            let frac = if pairs > 1 { p as f64 / (pairs - 1) as f64 } else { 0.0 };
            let wavelength = 2000.0 * (0.01f64).powf(frac);
            let angle = 2.0 * PI * c as f64 / wavelength;
            let base = quarter * width + 2 * p;
            t[c * d + base] = angle.sin();
            t[c * d + base + 1] = angle.cos();
        }
    }
    t
}

/// Creates every encoder parameter in `store`.
pub fn init_encoder_params<R: Rng>(cfg: &EncoderConfig, store: &mut ParameterStore, rng: &mut R) -> Result<(), NnError> {
    cfg.validate()?;
    let d = cfg.model_dim;
    store.insert_normal(TOKEN_TABLE, cfg.vocab_hash_size, d, 0.3, rng)?;
    for (q, name) in COORD_TABLES.iter().enumerate() {
        let values = if d >= 8 {
            coordinate_table(cfg, q)
        } else {
            let mut tmp = ParameterStore::new();
            tmp.insert_normal("t", cfg.coord_buckets, d, 0.3, rng)?;
            tmp.get("t")?.values().to_vec()
        };
        store.insert_with(
            name,
            Tensor::matrix(cfg.coord_buckets, d, values)?,
            ParamOptions {
                frozen: !cfg.train_coordinate_tables,
                ..Default::default()
            },
        )?;
    }
    let w_std = 1.0 / (d as f64).sqrt();
    let f_std = 1.0 / (cfg.ffn_dim as f64).sqrt();
    for l in 0..cfg.layers {
        let p = |n: &str| layer_param(l, n);
        for ln in ["ln1", "ln2"] {
            store.insert_constant(&p(&format!("{ln}.gain")), 1, d, 1.0)?;
            store.insert_constant(&p(&format!("{ln}.bias")), 1, d, 0.0)?;
        }
        for w in ["wq", "wk", "wv"] {
            store.insert_normal(&p(&format!("attn.{w}")), d, d, w_std, rng)?;
        }
        store.insert_normal(&p("attn.wo"), d, d, 0.5 * w_std, rng)?;
        for b in ["bq", "bk", "bv", "bo"] {
            store.insert_constant(&p(&format!("attn.{b}")), 1, d, 0.0)?;
        }
        store.insert_normal(&p("ffn.w1"), d, cfg.ffn_dim, w_std, rng)?;
        store.insert_constant(&p("ffn.b1"), 1, cfg.ffn_dim, 0.0)?;
        store.insert_normal(&p("ffn.w2"), cfg.ffn_dim, d, 0.5 * f_std, rng)?;
        store.insert_constant(&p("ffn.b2"), 1, d, 0.0)?;
        store.insert_with(
            &lambda_param(l),
            Tensor::scalar(cfg.lambda_init),
            ParamOptions {
                learning_rate: cfg.lambda_learning_rate,
                weight_decay: false,
                frozen: cfg.freeze_lambda,
            },
        )?;
    }
    if cfg.layers > 0 {
        store.insert_constant("final_ln.gain", 1, d, 1.0)?;
        store.insert_constant("final_ln.bias", 1, d, 0.0)?;
    }
    Ok(())
}

/// Token embedding plus the four coordinate embeddings, `[n × d]`.
pub fn embed(g: &mut Graph, cfg: &EncoderConfig, store: &ParameterStore, input: &EncoderInput) -> Result<NodeId, NnError> {
    if input.len() > cfg.max_tokens {
        return Err(NnError::TooManyTokens {
            got: input.len(),
            max: cfg.max_tokens,
        });
    }
    if input.boxes.len() != input.token_ids.len() {
        return Err(NnError::Shape("one box per token required".into()));
    }
    let table = g.param(store, TOKEN_TABLE)?;
    let mut acc = g.gather(table, input.token_ids.clone())?;
    for (k, name) in COORD_TABLES.iter().enumerate() {
        let rows = input
            .boxes
            .iter()
            .map(|b| [b.x0, b.y0, b.x1, b.y1][k] as usize)
            .collect();
        let t = g.param(store, name)?;
        let e = g.gather(t, rows)?;
        acc = g.add(acc, e)?;
    }
    Ok(acc)
}

fn linear(g: &mut Graph, store: &ParameterStore, x: NodeId, w: &str, b: &str) -> Result<NodeId, NnError> {
    let w = g.param(store, w)?;
    let b = g.param(store, b)?;
    let xw = g.matmul(x, w)?;
    g.add_row(xw, b)
}

/// Runs the encoder, returning per-token embeddings `[n × d]`.
pub fn encoder_forward(
    g: &mut Graph,
    cfg: &EncoderConfig,
    store: &ParameterStore,
    input: &EncoderInput,
    bias: Option<&RelationBias>,
) -> Result<NodeId, NnError> {
    if let Some(b) = bias {
        if b.n != input.len() {
            return Err(NnError::Shape(format!(
                "relation matrix for {} tokens, input has {}",
                b.n,
                input.len()
            )));
        }
    }
    let mut x = embed(g, cfg, store, input)?;
    for l in 0..cfg.layers {
        let p = |n: &str| layer_param(l, n);
        let gain = g.param(store, &p("ln1.gain"))?;
        let beta = g.param(store, &p("ln1.bias"))?;
        let h = g.layer_norm(x, gain, beta)?;
        let q = linear(g, store, h, &p("attn.wq"), &p("attn.bq"))?;
        let k = linear(g, store, h, &p("attn.wk"), &p("attn.bk"))?;
        let v = linear(g, store, h, &p("attn.wv"), &p("attn.bv"))?;
        let bias_nodes = match bias {
            Some(b) if b.layers.applies(l) => Some((g.param(store, &lambda_param(l))?, Rc::clone(&b.rho))),
            _ => None,
        };
        let (att, _) = multi_head_attention(g, q, k, v, cfg.heads, bias_nodes)?;
        let o = linear(g, store, att, &p("attn.wo"), &p("attn.bo"))?;
        x = g.add(x, o)?;

        let gain = g.param(store, &p("ln2.gain"))?;
        let beta = g.param(store, &p("ln2.bias"))?;
        let h = g.layer_norm(x, gain, beta)?;
        let f = linear(g, store, h, &p("ffn.w1"), &p("ffn.b1"))?;
        let f = g.relu(f);
        let f = linear(g, store, f, &p("ffn.w2"), &p("ffn.b2"))?;
        x = g.add(x, f)?;
    }
    if cfg.layers > 0 {
        let gain = g.param(store, "final_ln.gain")?;
        let beta = g.param(store, "final_ln.bias")?;
        x = g.layer_norm(x, gain, beta)?;
    }
    Ok(x)
}

/// Convenience wrapper returning the encoder output as a tensor.
pub fn encode(
    cfg: &EncoderConfig,
    store: &ParameterStore,
    input: &EncoderInput,
    bias: Option<&RelationBias>,
) -> Result<Tensor, NnError> {
    let mut g = Graph::new();
    let out = encoder_forward(&mut g, cfg, store, input, bias)?;
    Ok(g.value(out).clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small() -> EncoderConfig {
        EncoderConfig {
            layers: 1,
            model_dim: 8,
            heads: 2,
            ffn_dim: 8,
            vocab_hash_size: 32,
            ..Default::default()
        }
    }

    fn store(cfg: &EncoderConfig) -> ParameterStore {
        let mut s = ParameterStore::new();
        init_encoder_params(cfg, &mut s, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        s
    }

    fn b(x0: i64, y0: i64) -> BBox {
        BBox::new(x0, y0, x0 + 20, y0 + 10).unwrap()
    }

    #[test]
    fn fnv_reference_values() {
        assert_eq!(fnv1a(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a(b"a"), 0xaf63dc4c8601ec8c);
    }

    #[test]
    fn zero_tables_embed_to_zero() {
        let cfg = small();
        let mut s = store(&cfg);
        for name in std::iter::once(TOKEN_TABLE).chain(COORD_TABLES) {
            let n = s.get(name).unwrap().len();
            s.set_values(name, vec![0.0; n]).unwrap();
        }
        let input = EncoderInput::new(&cfg, &[("a", b(0, 0)), ("b", b(50, 50))], false).unwrap();
        let mut g = Graph::new();
        let e = embed(&mut g, &cfg, &s, &input).unwrap();
        assert!(g.value(e).values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn identical_tokens_embed_identically() {
        let cfg = small();
        let s = store(&cfg);
        let input = EncoderInput::new(&cfg, &[("a", b(5, 5)), ("a", b(5, 5))], false).unwrap();
        let mut g = Graph::new();
        let e = embed(&mut g, &cfg, &s, &input).unwrap();
        assert_eq!(g.value(e).row(0), g.value(e).row(1));
    }

    #[test]
    fn one_hot_token_table_is_identity_lookup() {
        let cfg = small();
        let mut s = store(&cfg);
        let (v, d) = (cfg.vocab_hash_size, cfg.model_dim);
        let table: Vec<f64> = (0..v * d).map(|i| if i / d % d == i % d { 1.0 } else { 0.0 }).collect();
        s.set_values(TOKEN_TABLE, table.clone()).unwrap();
        for name in COORD_TABLES {
            let n = s.get(name).unwrap().len();
            s.set_values(name, vec![0.0; n]).unwrap();
        }
        let input = EncoderInput::new(&cfg, &[("tok", b(0, 0))], false).unwrap();
        let id = input.token_ids[0];
        let mut g = Graph::new();
        let e = embed(&mut g, &cfg, &s, &input).unwrap();
        assert_eq!(g.value(e).row(0), &table[id * d..(id + 1) * d]);
    }

    #[test]
    fn token_overflow() {
        let cfg = EncoderConfig {
            max_tokens: 2,
            ..small()
        };
        let toks = [("a", b(0, 0)), ("b", b(0, 0)), ("c", b(0, 0))];
        assert!(matches!(
            EncoderInput::new(&cfg, &toks, false),
            Err(NnError::TooManyTokens { got: 3, max: 2 })
        ));
        assert_eq!(EncoderInput::new(&cfg, &toks, true).unwrap().len(), 2);
    }

    #[test]
    fn zero_layers_return_embeddings() {
        let cfg = EncoderConfig { layers: 0, ..small() };
        let s = store(&cfg);
        let input = EncoderInput::new(&cfg, &[("a", b(0, 0)), ("b", b(10, 30))], false).unwrap();
        let mut g = Graph::new();
        let e = embed(&mut g, &cfg, &s, &input).unwrap();
        let expected = g.value(e).clone();
        assert_eq!(encode(&cfg, &s, &input, None).unwrap(), expected);
    }

    #[test]
    fn uninitialized_parameters_error() {
        let cfg = small();
        let input = EncoderInput::new(&cfg, &[("a", b(0, 0))], false).unwrap();
        assert!(matches!(
            encode(&cfg, &ParameterStore::new(), &input, None),
            Err(NnError::MissingParam(_))
        ));
    }

    #[test]
    fn gradients_match_finite_differences() {
        let cfg = EncoderConfig {
            layers: 2,
            train_coordinate_tables: true,
            ..small()
        };
        let s = store(&cfg);
        let toks = [("a", b(0, 0)), ("b", b(40, 0)), ("c", b(0, 30))];
        let input = EncoderInput::new(&cfg, &toks, false).unwrap();
        let bias = RelationBias::new(3, &[false, true, false, false, false, true, false, false, false], BiasLayers::All)
            .unwrap();
        let w = Tensor::matrix(1, 8, (0..8).map(|i| (i as f64 - 3.5) / 4.0).collect()).unwrap();
        let report = crate::nn::grad_check(
            &s,
            |s| {
                let mut g = Graph::new();
                let out = encoder_forward(&mut g, &cfg, s, &input, Some(&bias))?;
                let wi = g.input(w.clone());
                let proj = g.matmul_t(out, wi)?;
                let sq = g.matmul_t(proj, proj)?;
                let root = g.sum(sq);
                Ok((g, root))
            },
            &crate::nn::GradCheckOptions {
                samples_per_param: 4,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(report.max_rel_error < 1e-4, "{report:?}");
    }

    #[test]
    fn bias_is_inert_at_zero_lambda() {
        let cfg = small();
        let mut s = store(&cfg);
        s.set_values(&lambda_param(0), vec![0.0]).unwrap();
        let toks = [("a", b(0, 0)), ("b", b(40, 0))];
        let input = EncoderInput::new(&cfg, &toks, false).unwrap();
        let bias = RelationBias::new(2, &[false, true, false, false], BiasLayers::All).unwrap();
        let plain = encode(&cfg, &s, &input, None).unwrap();
        let biased = encode(&cfg, &s, &input, Some(&bias)).unwrap();
        assert!(plain.max_abs_diff(&biased) < 1e-12);
    }

    #[test]
    fn config_validation() {
        assert!(EncoderConfig { heads: 3, ..small() }.validate().is_err());
        assert!(EncoderConfig { coord_buckets: 10, ..small() }.validate().is_err());
    }
}
