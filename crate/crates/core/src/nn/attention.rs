//! Multi-head scaled dot-product attention with an optional additive
//! relation bias.
//!
//! Per head, `logits_ij = (q_i·k_j + λ·ρ_ij) / √d_k`; the bias sits inside the
//! scaling. Without a bias the `λ·ρ` term is not built at all.

use std::rc::Rc;

use super::{Graph, NnError, NodeId, Tensor};

/// A fixed `n×n` 0/1 matrix plus one weight per layer.
#[derive(Clone, Debug, PartialEq)]
pub struct AttentionBias {
    n: usize,
    rho: Rc<Vec<f64>>,
    pub lambda: Vec<f64>,
}

impl AttentionBias {
    pub fn new(n: usize, rho: &[bool], lambda: Vec<f64>) -> Result<Self, NnError> {
        if rho.len() != n * n {
            return Err(NnError::Shape(format!("rho has {} entries, expected {n}x{n}", rho.len())));
        }
        Ok(Self {
            n,
            rho: Rc::new(rho.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect()),
            lambda,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn rho(&self) -> &Rc<Vec<f64>> {
        &self.rho
    }
}

/// Attention of `q[n×d]` over `k, v[m×d]`, split into `heads` column blocks.
/// Returns the concatenated head outputs and each head's attention matrix.
pub fn multi_head_attention(
    g: &mut Graph,
    q: NodeId,
    k: NodeId,
    v: NodeId,
    heads: usize,
    bias: Option<(NodeId, Rc<Vec<f64>>)>,
) -> Result<(NodeId, Vec<NodeId>), NnError> {
    let (n, d) = (g.value(q).rows(), g.value(q).cols());
    let (m, dk_all) = (g.value(k).rows(), g.value(k).cols());
    if heads == 0 || d % heads != 0 || dk_all != d || g.value(v).rows() != m || g.value(v).cols() != d {
        return Err(NnError::Shape(format!(
            "attention q {n}x{d}, k {m}x{dk_all}, v {}x{}, {heads} heads",
            g.value(v).rows(),
            g.value(v).cols()
        )));
    }
    if let Some((_, rho)) = &bias {
        if rho.len() != n * m {
            return Err(NnError::Shape(format!("bias of {} entries for {n}x{m} logits", rho.len())));
        }
    }
    let dk = d / heads;
    let inv_sqrt = 1.0 / (dk as f64).sqrt();
    let mut outs = Vec::with_capacity(heads);
    let mut weights = Vec::with_capacity(heads);
    for h in 0..heads {
        let qh = g.slice_cols(q, h * dk, dk)?;
        let kh = g.slice_cols(k, h * dk, dk)?;
        let vh = g.slice_cols(v, h * dk, dk)?;
        let mut logits = g.matmul_t(qh, kh)?;
        if let Some((lambda, rho)) = &bias {
            logits = g.add_scaled_mask(logits, *lambda, Rc::clone(rho))?;
        }
        let scaled = g.scale(logits, inv_sqrt);
        let att = g.softmax_rows(scaled);
        weights.push(att);
        outs.push(g.matmul(att, vh)?);
    }
    let out = if outs.len() == 1 { outs[0] } else { g.concat_cols(outs)? };
    Ok((out, weights))
}

#[derive(Clone, Debug, PartialEq)]
pub struct AttentionOutput {
    pub output: Tensor,
    /// One row-stochastic matrix per head.
    pub weights: Vec<Tensor>,
}

/// Stand-alone attention over plain tensors; `layer` selects the bias weight.
pub fn attention(
    q: &Tensor,
    k: &Tensor,
    v: &Tensor,
    heads: usize,
    bias: Option<&AttentionBias>,
    layer: usize,
) -> Result<AttentionOutput, NnError> {
    let mut g = Graph::new();
    let (qi, ki, vi) = (g.input(q.clone()), g.input(k.clone()), g.input(v.clone()));
    let bias_nodes = match bias {
        Some(b) => {
            let lambda = *b
                .lambda
                .get(layer)
                .ok_or_else(|| NnError::Shape(format!("no bias weight for layer {layer}")))?;
            Some((g.input(Tensor::scalar(lambda)), Rc::clone(b.rho())))
        }
        None => None,
    };
    let (out, weights) = multi_head_attention(&mut g, qi, ki, vi, heads, bias_nodes)?;
    Ok(AttentionOutput {
        output: g.value(out).clone(),
        weights: weights.into_iter().map(|w| g.value(w).clone()).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bias_shifts_softmax() {
        // all logits zero; ρ_01 = 1 with λ = 1 and d_k = 1 gives softmax(0, 1) on row 0
        let z = Tensor::zeros(2, 1);
        let bias = AttentionBias::new(2, &[false, true, false, false], vec![1.0]).unwrap();
        let out = attention(&z, &z, &z, 1, Some(&bias), 0).unwrap();
        let w = &out.weights[0];
        let e = std::f64::consts::E;
        assert!((w.at(0, 0) - 1.0 / (1.0 + e)).abs() < 1e-12);
        assert!((w.at(0, 1) - e / (1.0 + e)).abs() < 1e-12);
        assert!((w.at(0, 0) - 0.2689).abs() < 1e-4);
        assert!((w.at(0, 1) - 0.7311).abs() < 1e-4);
        assert!((w.at(1, 0) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_shapes() {
        let a = Tensor::zeros(3, 4);
        let b = Tensor::zeros(2, 4);
        assert!(attention(&a, &a, &a, 3, None, 0).is_err());
        assert!(attention(&a, &a, &b, 2, None, 0).is_err());
        let bias = AttentionBias::new(2, &[false; 4], vec![1.0]).unwrap();
        assert!(attention(&a, &a, &a, 2, Some(&bias), 0).is_err());
        assert!(AttentionBias::new(2, &[false; 3], vec![]).is_err());
    }
}
