//! Tape of matrix operations with reverse-mode differentiation.
//!
//! Every node holds a 2-D value. Building a node runs its forward pass
//! immediately; [`Graph::backward`] walks the tape in reverse and returns the
//! gradient of a scalar node with respect to every node.

use std::collections::BTreeMap;
use std::ops::Range;
use std::rc::Rc;

use super::loss::pair_loss;
use super::{NnError, ParameterStore, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(usize);

const LN_EPS: f64 = 1e-5;

enum Op {
    Input,
    Param(String),
    Gather {
        table: NodeId,
        rows: Vec<usize>,
    },
    Add(NodeId, NodeId),
    AddRow(NodeId, NodeId),
    MatMul(NodeId, NodeId),
    MatMulT(NodeId, NodeId),
    Scale(NodeId, f64),
    Relu(NodeId),
    LayerNorm {
        x: NodeId,
        gain: NodeId,
        bias: NodeId,
        xhat: Vec<f64>,
        inv_std: Vec<f64>,
    },
    SoftmaxRows(NodeId),
    AddScaledMask {
        x: NodeId,
        scale: NodeId,
        mask: Rc<Vec<f64>>,
    },
    SliceCols {
        x: NodeId,
        start: usize,
    },
    ConcatCols(Vec<NodeId>),
    MeanPool {
        x: NodeId,
        spans: Vec<Range<usize>>,
    },
    Sum(NodeId),
    PairLoss {
        scores: NodeId,
        grad: Vec<f64>,
    },
}

struct Node {
    value: Tensor,
    op: Op,
}

#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

/// Gradients of one backward pass, indexed by node.
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
}

impl Gradients {
    pub fn get(&self, id: NodeId) -> Option<&[f64]> {
        self.grads[id.0].as_deref()
    }
}

fn dims(t: &Tensor) -> (usize, usize) {
    (t.rows(), t.cols())
}

fn matmul(a: &[f64], b: &[f64], n: usize, k: usize, m: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * m];
    for i in 0..n {
        let out_row = &mut out[i * m..(i + 1) * m];
        for (p, &aip) in a[i * k..(i + 1) * k].iter().enumerate() {
            if aip == 0.0 {
                continue;
            }
            for (o, &bpj) in out_row.iter_mut().zip(&b[p * m..(p + 1) * m]) {
                *o += aip * bpj;
            }
        }
    }
    out
}

/// `a[n×k] · b[m×k]ᵀ`
fn matmul_t(a: &[f64], b: &[f64], n: usize, k: usize, m: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * m];
    for i in 0..n {
        let ar = &a[i * k..(i + 1) * k];
        for j in 0..m {
            out[i * m + j] = ar.iter().zip(&b[j * k..(j + 1) * k]).map(|(x, y)| x * y).sum();
        }
    }
    out
}

/// `a[k×n]ᵀ · b[k×m]`
fn t_matmul(a: &[f64], b: &[f64], k: usize, n: usize, m: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * m];
    for p in 0..k {
        let br = &b[p * m..(p + 1) * m];
        for i in 0..n {
            let api = a[p * n + i];
            if api == 0.0 {
                continue;
            }
            for (o, &bv) in out[i * m..(i + 1) * m].iter_mut().zip(br) {
                *o += api * bv;
            }
        }
    }
    out
}

fn accumulate(slot: &mut Option<Vec<f64>>, delta: Vec<f64>) {
    match slot {
        Some(g) => g.iter_mut().zip(delta).for_each(|(a, b)| *a += b),
        None => *slot = Some(delta),
    }
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    pub fn scalar(&self, id: NodeId) -> f64 {
        self.nodes[id.0].value.values()[0]
    }

    fn push(&mut self, value: Tensor, op: Op) -> NodeId {
        self.nodes.push(Node { value, op });
        NodeId(self.nodes.len() - 1)
    }

    fn shape_err(what: &str, a: (usize, usize), b: (usize, usize)) -> NnError {
        NnError::Shape(format!("{what}: {}x{} vs {}x{}", a.0, a.1, b.0, b.1))
    }

    /// Constant input; receives a gradient but is never updated.
    pub fn input(&mut self, t: Tensor) -> NodeId {
        let (r, c) = dims(&t);
        let t = Tensor::matrix(r, c, t.into_values()).expect("dims preserved");
        self.push(t, Op::Input)
    }

    /// Leaf bound to a named parameter of `store`.
    pub fn param(&mut self, store: &ParameterStore, name: &str) -> Result<NodeId, NnError> {
        let t = store.get(name)?;
        let (r, c) = dims(t);
        let value = Tensor::matrix(r, c, t.values().to_vec())?;
        Ok(self.push(value, Op::Param(name.to_string())))
    }

    pub fn gather(&mut self, table: NodeId, rows: Vec<usize>) -> Result<NodeId, NnError> {
        let t = self.value(table);
        let (n, c) = dims(t);
        let mut out = Vec::with_capacity(rows.len() * c);
        for &r in &rows {
            if r >= n {
                return Err(NnError::Shape(format!("gather row {r} out of {n}")));
            }
            out.extend_from_slice(t.row(r));
        }
        let value = Tensor::matrix(rows.len(), c, out)?;
        Ok(self.push(value, Op::Gather { table, rows }))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, NnError> {
        let (ta, tb) = (self.value(a), self.value(b));
        if dims(ta) != dims(tb) {
            return Err(Self::shape_err("add", dims(ta), dims(tb)));
        }
        let v = ta.values().iter().zip(tb.values()).map(|(x, y)| x + y).collect();
        let (r, c) = dims(ta);
        Ok(self.push(Tensor::matrix(r, c, v)?, Op::Add(a, b)))
    }

    /// Adds the single row `b` to every row of `a`.
    pub fn add_row(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, NnError> {
        let (ta, tb) = (self.value(a), self.value(b));
        let ((r, c), (br, bc)) = (dims(ta), dims(tb));
        if br != 1 || bc != c {
            return Err(Self::shape_err("add_row", (r, c), (br, bc)));
        }
        let bias = tb.values();
        let v = ta
            .values()
            .chunks(c.max(1))
            .flat_map(|row| row.iter().zip(bias).map(|(x, y)| x + y))
            .collect();
        Ok(self.push(Tensor::matrix(r, c, v)?, Op::AddRow(a, b)))
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, NnError> {
        let ((n, k), (k2, m)) = (dims(self.value(a)), dims(self.value(b)));
        if k != k2 {
            return Err(Self::shape_err("matmul", (n, k), (k2, m)));
        }
        let v = matmul(self.value(a).values(), self.value(b).values(), n, k, m);
        Ok(self.push(Tensor::matrix(n, m, v)?, Op::MatMul(a, b)))
    }

    /// `a · bᵀ`
    pub fn matmul_t(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, NnError> {
        let ((n, k), (m, k2)) = (dims(self.value(a)), dims(self.value(b)));
        if k != k2 {
            return Err(Self::shape_err("matmul_t", (n, k), (m, k2)));
        }
        let v = matmul_t(self.value(a).values(), self.value(b).values(), n, k, m);
        Ok(self.push(Tensor::matrix(n, m, v)?, Op::MatMulT(a, b)))
    }

    pub fn scale(&mut self, a: NodeId, factor: f64) -> NodeId {
        let t = self.value(a);
        let (r, c) = dims(t);
        let v = t.values().iter().map(|x| x * factor).collect();
        self.push(Tensor::matrix(r, c, v).expect("dims preserved"), Op::Scale(a, factor))
    }

    pub fn relu(&mut self, a: NodeId) -> NodeId {
        let t = self.value(a);
        let (r, c) = dims(t);
        let v = t.values().iter().map(|&x| x.max(0.0)).collect();
        self.push(Tensor::matrix(r, c, v).expect("dims preserved"), Op::Relu(a))
    }

    /// Row-wise normalization followed by a per-column gain and bias.
    pub fn layer_norm(&mut self, x: NodeId, gain: NodeId, bias: NodeId) -> Result<NodeId, NnError> {
        let (r, c) = dims(self.value(x));
        for p in [gain, bias] {
            if dims(self.value(p)) != (1, c) {
                return Err(Self::shape_err("layer_norm", (r, c), dims(self.value(p))));
            }
        }
        let (xv, g, b) = (self.value(x).values(), self.value(gain).values(), self.value(bias).values());
        let mut xhat = vec![0.0; r * c];
        let mut inv_std = vec![0.0; r];
        let mut out = vec![0.0; r * c];
        for i in 0..r {
            let row = &xv[i * c..(i + 1) * c];
            let mean = row.iter().sum::<f64>() / c as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / c as f64;
            let is = 1.0 / (var + LN_EPS).sqrt();
            inv_std[i] = is;
            for j in 0..c {
                let h = (row[j] - mean) * is;
                xhat[i * c + j] = h;
                out[i * c + j] = h * g[j] + b[j];
            }
        }
        let value = Tensor::matrix(r, c, out)?;
        Ok(self.push(
            value,
            Op::LayerNorm {
                x,
                gain,
                bias,
                xhat,
                inv_std,
            },
        ))
    }

    pub fn softmax_rows(&mut self, a: NodeId) -> NodeId {
        let t = self.value(a);
        let (r, c) = dims(t);
        let mut v = t.values().to_vec();
        for row in v.chunks_mut(c.max(1)) {
            let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut s = 0.0;
            for x in row.iter_mut() {
                *x = (*x - m).exp();
                s += *x;
            }
            for x in row.iter_mut() {
                *x /= s;
            }
        }
        self.push(Tensor::matrix(r, c, v).expect("dims preserved"), Op::SoftmaxRows(a))
    }

    /// `x + scale · mask` where `scale` is a `1×1` node and `mask` a constant
    /// of the same shape as `x`.
    pub fn add_scaled_mask(&mut self, x: NodeId, scale: NodeId, mask: Rc<Vec<f64>>) -> Result<NodeId, NnError> {
        let t = self.value(x);
        let (r, c) = dims(t);
        if mask.len() != r * c || dims(self.value(scale)) != (1, 1) {
            return Err(NnError::Shape(format!(
                "mask of {} entries for {r}x{c} logits",
                mask.len()
            )));
        }
        let s = self.scalar(scale);
        let v = t.values().iter().zip(mask.iter()).map(|(a, m)| a + s * m).collect();
        Ok(self.push(Tensor::matrix(r, c, v)?, Op::AddScaledMask { x, scale, mask }))
    }

    pub fn slice_cols(&mut self, x: NodeId, start: usize, len: usize) -> Result<NodeId, NnError> {
        let t = self.value(x);
        let (r, c) = dims(t);
        if start + len > c {
            return Err(NnError::Shape(format!("columns {start}..{} of {c}", start + len)));
        }
        let v = (0..r).flat_map(|i| t.row(i)[start..start + len].iter().copied()).collect();
        Ok(self.push(Tensor::matrix(r, len, v)?, Op::SliceCols { x, start }))
    }

    pub fn concat_cols(&mut self, parts: Vec<NodeId>) -> Result<NodeId, NnError> {
        let r = parts.first().map(|&p| self.value(p).rows()).unwrap_or(0);
        if parts.iter().any(|&p| self.value(p).rows() != r) {
            return Err(NnError::Shape("concat_cols row mismatch".into()));
        }
        let c: usize = parts.iter().map(|&p| self.value(p).cols()).sum();
        let mut v = Vec::with_capacity(r * c);
        for i in 0..r {
            for &p in &parts {
                v.extend_from_slice(self.value(p).row(i));
            }
        }
        Ok(self.push(Tensor::matrix(r, c, v)?, Op::ConcatCols(parts)))
    }

    /// Row `k` of the output is the mean of the rows in `spans[k]`.
    pub fn mean_pool(&mut self, x: NodeId, spans: Vec<Range<usize>>) -> Result<NodeId, NnError> {
        let t = self.value(x);
        let (r, c) = dims(t);
        let mut v = Vec::with_capacity(spans.len() * c);
        for s in &spans {
            if s.is_empty() || s.end > r {
                return Err(NnError::Shape(format!("pooling span {s:?} over {r} rows")));
            }
            let w = 1.0 / s.len() as f64;
            let mut acc = vec![0.0; c];
            for i in s.clone() {
                acc.iter_mut().zip(t.row(i)).for_each(|(a, b)| *a += b);
            }
            v.extend(acc.into_iter().map(|a| a * w));
        }
        let n = spans.len();
        Ok(self.push(Tensor::matrix(n, c, v)?, Op::MeanPool { x, spans }))
    }

    pub fn sum(&mut self, a: NodeId) -> NodeId {
        let s = self.value(a).values().iter().sum();
        self.push(Tensor::scalar(s), Op::Sum(a))
    }

    /// Class-imbalance pair loss of a square score node.
    pub fn pair_loss(&mut self, scores: NodeId, positive: &[bool], mask_diagonal: bool) -> Result<NodeId, NnError> {
        let t = self.value(scores);
        let (n, m) = dims(t);
        if n != m {
            return Err(Self::shape_err("pair_loss", (n, m), (n, n)));
        }
        let out = pair_loss(t.values(), n, positive, mask_diagonal)?;
        Ok(self.push(Tensor::scalar(out.value), Op::PairLoss { scores, grad: out.grad }))
    }

    /// Gradients of the scalar node `root` with respect to every node.
    pub fn backward(&self, root: NodeId) -> Result<Gradients, NnError> {
        if self.value(root).len() != 1 {
            return Err(NnError::Shape("backward needs a scalar root".into()));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        grads[root.0] = Some(vec![1.0]);
        for idx in (0..=root.0).rev() {
            let Some(dy) = grads[idx].take() else {
                continue;
            };
            let node = &self.nodes[idx];
            let (r, c) = dims(&node.value);
            match &node.op {
                Op::Input | Op::Param(_) => {}
                Op::Gather { table, rows } => {
                    let tc = self.value(*table).cols();
                    let mut d = vec![0.0; self.value(*table).len()];
                    for (k, &row) in rows.iter().enumerate() {
                        for j in 0..tc {
                            d[row * tc + j] += dy[k * tc + j];
                        }
                    }
                    accumulate(&mut grads[table.0], d);
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads[a.0], dy.clone());
                    accumulate(&mut grads[b.0], dy.clone());
                }
                Op::AddRow(a, b) => {
                    let mut db = vec![0.0; c];
                    for row in dy.chunks(c.max(1)) {
                        db.iter_mut().zip(row).for_each(|(x, y)| *x += y);
                    }
                    accumulate(&mut grads[a.0], dy.clone());
                    accumulate(&mut grads[b.0], db);
                }
                Op::MatMul(a, b) => {
                    let (n, k) = dims(self.value(*a));
                    let m = c;
                    let da = matmul_t(&dy, self.value(*b).values(), n, m, k);
                    let db = t_matmul(self.value(*a).values(), &dy, n, k, m);
                    accumulate(&mut grads[a.0], da);
                    accumulate(&mut grads[b.0], db);
                }
                Op::MatMulT(a, b) => {
                    let (n, k) = dims(self.value(*a));
                    let m = c;
                    let da = matmul(&dy, self.value(*b).values(), n, m, k);
                    let db = t_matmul(&dy, self.value(*a).values(), n, m, k);
                    accumulate(&mut grads[a.0], da);
                    accumulate(&mut grads[b.0], db);
                }
                Op::Scale(a, f) => {
                    accumulate(&mut grads[a.0], dy.iter().map(|g| g * f).collect());
                }
                Op::Relu(a) => {
                    let x = self.value(*a).values();
                    let d = dy.iter().zip(x).map(|(g, &v)| if v > 0.0 { *g } else { 0.0 }).collect();
                    accumulate(&mut grads[a.0], d);
                }
                Op::LayerNorm {
                    x,
                    gain,
                    bias,
                    xhat,
                    inv_std,
                } => {
                    let g = self.value(*gain).values();
                    let mut dx = vec![0.0; r * c];
                    let mut dg = vec![0.0; c];
                    let mut db = vec![0.0; c];
                    for i in 0..r {
                        let dyr = &dy[i * c..(i + 1) * c];
                        let xh = &xhat[i * c..(i + 1) * c];
                        let mut mean_d = 0.0;
                        let mut mean_dx = 0.0;
                        for j in 0..c {
                            let dxh = dyr[j] * g[j];
                            mean_d += dxh;
                            mean_dx += dxh * xh[j];
                            dg[j] += dyr[j] * xh[j];
                            db[j] += dyr[j];
                        }
                        mean_d /= c as f64;
                        mean_dx /= c as f64;
                        for j in 0..c {
                            let dxh = dyr[j] * g[j];
                            dx[i * c + j] = inv_std[i] * (dxh - mean_d - xh[j] * mean_dx);
                        }
                    }
                    accumulate(&mut grads[x.0], dx);
                    accumulate(&mut grads[gain.0], dg);
                    accumulate(&mut grads[bias.0], db);
                }
                Op::SoftmaxRows(a) => {
                    let y = node.value.values();
                    let mut d = vec![0.0; r * c];
                    for i in 0..r {
                        let yr = &y[i * c..(i + 1) * c];
                        let dr = &dy[i * c..(i + 1) * c];
                        let dot: f64 = yr.iter().zip(dr).map(|(a, b)| a * b).sum();
                        for j in 0..c {
                            d[i * c + j] = yr[j] * (dr[j] - dot);
                        }
                    }
                    accumulate(&mut grads[a.0], d);
                }
                Op::AddScaledMask { x, scale, mask } => {
                    let ds: f64 = dy.iter().zip(mask.iter()).map(|(g, m)| g * m).sum();
                    accumulate(&mut grads[x.0], dy.clone());
                    accumulate(&mut grads[scale.0], vec![ds]);
                }
                Op::SliceCols { x, start } => {
                    let xc = self.value(*x).cols();
                    let mut d = vec![0.0; r * xc];
                    for i in 0..r {
                        d[i * xc + start..i * xc + start + c].copy_from_slice(&dy[i * c..(i + 1) * c]);
                    }
                    accumulate(&mut grads[x.0], d);
                }
                Op::ConcatCols(parts) => {
                    let mut offset = 0;
                    for p in parts {
                        let pc = self.value(*p).cols();
                        let mut d = Vec::with_capacity(r * pc);
                        for i in 0..r {
                            d.extend_from_slice(&dy[i * c + offset..i * c + offset + pc]);
                        }
                        accumulate(&mut grads[p.0], d);
                        offset += pc;
                    }
                }
                Op::MeanPool { x, spans } => {
                    let mut d = vec![0.0; self.value(*x).len()];
                    for (k, s) in spans.iter().enumerate() {
                        let w = 1.0 / s.len() as f64;
                        for i in s.clone() {
                            for j in 0..c {
                                d[i * c + j] += dy[k * c + j] * w;
                            }
                        }
                    }
                    accumulate(&mut grads[x.0], d);
                }
                Op::Sum(a) => {
                    let n = self.value(*a).len();
                    accumulate(&mut grads[a.0], vec![dy[0]; n]);
                }
                Op::PairLoss { scores, grad } => {
                    accumulate(&mut grads[scores.0], grad.iter().map(|g| g * dy[0]).collect());
                }
            }
            grads[idx] = Some(dy);
        }
        Ok(Gradients { grads })
    }

    /// Gradient of every parameter leaf, summed over repeated leaves of the same name.
    pub fn param_grads(&self, grads: &Gradients) -> BTreeMap<String, Vec<f64>> {
        let mut out: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        for (idx, node) in self.nodes.iter().enumerate() {
            if let Op::Param(name) = &node.op {
                if let Some(g) = &grads.grads[idx] {
                    match out.get_mut(name) {
                        Some(acc) => acc.iter_mut().zip(g).for_each(|(a, b)| *a += b),
                        None => {
                            out.insert(name.clone(), g.clone());
                        }
                    }
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_check(build: impl Fn(&mut Graph, NodeId) -> NodeId, x: Tensor) {
        let mut g = Graph::new();
        let xi = g.input(x.clone());
        let out = build(&mut g, xi);
        let loss = g.sum(out);
        let grads = g.backward(loss).unwrap();
        let analytic = grads.get(xi).unwrap().to_vec();
        let h = 1e-6;
        for k in 0..x.len() {
            let eval = |delta: f64| {
                let mut xv = x.clone();
                xv.values_mut()[k] += delta;
                let mut g = Graph::new();
                let xi = g.input(xv);
                let out = build(&mut g, xi);
                let s = g.sum(out);
                g.scalar(s)
            };
            let numeric = (eval(h) - eval(-h)) / (2.0 * h);
            assert!(
                (numeric - analytic[k]).abs() < 1e-6 * (1.0 + numeric.abs()),
                "coordinate {k}: {numeric} vs {}",
                analytic[k]
            );
        }
    }

    fn sample(r: usize, c: usize) -> Tensor {
        let v = (0..r * c).map(|i| ((i * 37 % 11) as f64 - 5.0) / 3.7).collect();
        Tensor::matrix(r, c, v).unwrap()
    }

    #[test]
    fn softmax_weighted_backward() {
        fd_check(
            |g, x| {
                let s = g.softmax_rows(x);
                let w = g.input(sample(3, 4));
                let m = g.matmul_t(s, w).unwrap();
                g.scale(m, 1.3)
            },
            sample(3, 4),
        );
    }

    #[test]
    fn layer_norm_backward() {
        fd_check(
            |g, x| {
                let gain = g.input(Tensor::matrix(1, 4, vec![1.0, 0.5, -2.0, 1.5]).unwrap());
                let bias = g.input(Tensor::matrix(1, 4, vec![0.1, 0.2, 0.3, 0.4]).unwrap());
                let y = g.layer_norm(x, gain, bias).unwrap();
                let w = g.input(sample(4, 2));
                g.matmul(y, w).unwrap()
            },
            sample(3, 4),
        );
    }

    #[test]
    fn slice_concat_pool_backward() {
        fd_check(
            |g, x| {
                let a = g.slice_cols(x, 0, 2).unwrap();
                let b = g.slice_cols(x, 2, 2).unwrap();
                let ab = g.matmul_t(a, b).unwrap();
                let cat = g.concat_cols(vec![ab, x]).unwrap();
                let p = g.mean_pool(cat, vec![0..1, 1..3]).unwrap();
                let pb = g.input(Tensor::matrix(1, 7, vec![0.013; 7]).unwrap());
                let q = g.add_row(p, pb).unwrap();
                g.relu(q)
            },
            sample(3, 4),
        );
    }

    #[test]
    fn mean_pool_values() {
        let mut g = Graph::new();
        let x = g.input(Tensor::matrix(3, 1, vec![1.0, 1.0, 3.0]).unwrap());
        let p = g.mean_pool(x, vec![0..1, 1..3]).unwrap();
        assert_eq!(g.value(p).values(), &[1.0, 2.0]);
        assert!(g.mean_pool(x, vec![1..1]).is_err());
    }

    #[test]
    fn shape_mismatch_errors() {
        let mut g = Graph::new();
        let a = g.input(Tensor::zeros(2, 3));
        let b = g.input(Tensor::zeros(2, 3));
        assert!(g.matmul(a, b).is_err());
        assert!(g.add_row(a, b).is_err());
    }
}
