//! Tape-based reverse-mode automatic differentiation.
//!
//! Operations evaluate eagerly and append a node to the tape; `backward`
//! walks the tape in reverse, accumulating exact analytic gradients. The
//! op set is the minimum a transformer encoder-decoder with scalar heads
//! needs. Shape mismatches are programmer errors and panic.

use std::collections::BTreeMap;

use ndarray::ArrayView2;

use crate::tensor::{Param, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VarId(usize);

#[derive(Debug)]
enum Op {
    /// Constant input: gradient is computed but never read.
    Leaf,
    /// Trainable input: gradient is exported by `param_grads`.
    ParamLeaf,
    MatMul(VarId, VarId),
    Add(VarId, VarId),
    Sub(VarId, VarId),
    Mul(VarId, VarId),
    /// `[m,n] + [1,n]`, the bias broadcast.
    AddRow(VarId, VarId),
    Scale(VarId, f64),
    Relu(VarId),
    Exp(VarId),
    SoftmaxRows(VarId),
    LogSoftmaxRows(VarId),
    Transpose(VarId),
    SliceCols(VarId, usize, usize),
    ConcatCols(Vec<VarId>),
    GatherRows(VarId, Vec<usize>),
    MeanRows(VarId),
    SumAll(VarId),
    /// `out[i, 0] = a[i, cols[i]]`.
    SelectPerRow(VarId, Vec<usize>),
    LayerNorm {
        x: VarId,
        gamma: VarId,
        beta: VarId,
        eps: f64,
    },
}

struct Node {
    value: Tensor,
    op: Op,
}

/// Gradients aligned with the tape; indexed by `VarId`.
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
}

impl Gradients {
    /// Gradient buffer for a node, if any gradient flowed into it.
    pub fn get(&self, id: VarId) -> Option<&[f64]> {
        self.grads[id.0].as_deref()
    }
}

#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
    param_nodes: Vec<(usize, String)>,
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    fn push(&mut self, value: Tensor, op: Op) -> VarId {
        self.nodes.push(Node { value, op });
        VarId(self.nodes.len() - 1)
    }

    pub fn value(&self, id: VarId) -> &Tensor {
        &self.nodes[id.0].value
    }

    pub fn constant(&mut self, t: Tensor) -> VarId {
        self.push(t, Op::Leaf)
    }

    /// Registers a parameter tensor (shared, not copied) so its gradient is
    /// exported under the parameter's name.
    pub fn param(&mut self, p: &Param) -> VarId {
        let id = self.push(p.tensor.clone(), Op::ParamLeaf);
        self.param_nodes.push((id.0, p.name.clone()));
        id
    }

    /// A leaf whose gradient the caller will read directly (e.g. a latent
    /// point being optimized).
    pub fn input(&mut self, t: Tensor) -> VarId {
        self.push(t, Op::ParamLeaf)
    }

    pub fn matmul(&mut self, a: VarId, b: VarId) -> VarId {
        let (ta, tb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        assert_eq!(ta.cols(), tb.rows(), "matmul inner dims");
        let out = matmul_raw(
            ta.as_slice(),
            ta.rows(),
            ta.cols(),
            tb.as_slice(),
            tb.rows(),
            tb.cols(),
            false,
            false,
        );
        let value = Tensor::from_vec(ta.rows(), tb.cols(), out);
        self.push(value, Op::MatMul(a, b))
    }

    pub fn add(&mut self, a: VarId, b: VarId) -> VarId {
        let value = self.zip(a, b, |x, y| x + y);
        self.push(value, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: VarId, b: VarId) -> VarId {
        let value = self.zip(a, b, |x, y| x - y);
        self.push(value, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: VarId, b: VarId) -> VarId {
        let value = self.zip(a, b, |x, y| x * y);
        self.push(value, Op::Mul(a, b))
    }

    pub fn add_row(&mut self, a: VarId, b: VarId) -> VarId {
        let (ta, tb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        assert_eq!(tb.rows(), 1, "add_row broadcast side must be a row vector");
        assert_eq!(ta.cols(), tb.cols(), "add_row widths");
        let cols = ta.cols();
        let data: Vec<f64> = ta
            .as_slice()
            .iter()
            .enumerate()
            .map(|(k, &v)| v + tb.as_slice()[k % cols])
            .collect();
        let value = Tensor::from_vec(ta.rows(), cols, data);
        self.push(value, Op::AddRow(a, b))
    }

    pub fn scale(&mut self, a: VarId, c: f64) -> VarId {
        let ta = &self.nodes[a.0].value;
        let value = Tensor::from_vec(
            ta.rows(),
            ta.cols(),
            ta.as_slice().iter().map(|&v| v * c).collect(),
        );
        self.push(value, Op::Scale(a, c))
    }

    pub fn relu(&mut self, a: VarId) -> VarId {
        let ta = &self.nodes[a.0].value;
        let value = Tensor::from_vec(
            ta.rows(),
            ta.cols(),
            ta.as_slice().iter().map(|&v| v.max(0.0)).collect(),
        );
        self.push(value, Op::Relu(a))
    }

    pub fn exp(&mut self, a: VarId) -> VarId {
        let ta = &self.nodes[a.0].value;
        let value = Tensor::from_vec(
            ta.rows(),
            ta.cols(),
            ta.as_slice().iter().map(|&v| v.exp()).collect(),
        );
        self.push(value, Op::Exp(a))
    }

    pub fn softmax_rows(&mut self, a: VarId) -> VarId {
        let ta = &self.nodes[a.0].value;
        let (r, c) = (ta.rows(), ta.cols());
        let mut data = vec![0.0; r * c];
        for i in 0..r {
            let row = &ta.as_slice()[i * c..(i + 1) * c];
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for j in 0..c {
                let e = (row[j] - max).exp();
                data[i * c + j] = e;
                sum += e;
            }
            for j in 0..c {
                data[i * c + j] /= sum;
            }
        }
        self.push(Tensor::from_vec(r, c, data), Op::SoftmaxRows(a))
    }

    pub fn log_softmax_rows(&mut self, a: VarId) -> VarId {
        let ta = &self.nodes[a.0].value;
        let (r, c) = (ta.rows(), ta.cols());
        let mut data = vec![0.0; r * c];
        for i in 0..r {
            let row = &ta.as_slice()[i * c..(i + 1) * c];
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let log_sum = row.iter().map(|&v| (v - max).exp()).sum::<f64>().ln() + max;
            for j in 0..c {
                data[i * c + j] = row[j] - log_sum;
            }
        }
        self.push(Tensor::from_vec(r, c, data), Op::LogSoftmaxRows(a))
    }

    pub fn transpose(&mut self, a: VarId) -> VarId {
        let ta = &self.nodes[a.0].value;
        let (r, c) = (ta.rows(), ta.cols());
        let mut data = vec![0.0; r * c];
        for i in 0..r {
            for j in 0..c {
                data[j * r + i] = ta.get(i, j);
            }
        }
        self.push(Tensor::from_vec(c, r, data), Op::Transpose(a))
    }

    pub fn slice_cols(&mut self, a: VarId, start: usize, len: usize) -> VarId {
        let ta = &self.nodes[a.0].value;
        let (r, c) = (ta.rows(), ta.cols());
        assert!(start + len <= c, "slice_cols out of range");
        let mut data = Vec::with_capacity(r * len);
        for i in 0..r {
            data.extend_from_slice(&ta.as_slice()[i * c + start..i * c + start + len]);
        }
        self.push(Tensor::from_vec(r, len, data), Op::SliceCols(a, start, len))
    }

    pub fn concat_cols(&mut self, parts: &[VarId]) -> VarId {
        assert!(!parts.is_empty());
        let r = self.nodes[parts[0].0].value.rows();
        let total: usize = parts.iter().map(|p| self.nodes[p.0].value.cols()).sum();
        let mut data = Vec::with_capacity(r * total);
        for i in 0..r {
            for p in parts {
                let t = &self.nodes[p.0].value;
                assert_eq!(t.rows(), r, "concat_cols row mismatch");
                let c = t.cols();
                data.extend_from_slice(&t.as_slice()[i * c..(i + 1) * c]);
            }
        }
        self.push(
            Tensor::from_vec(r, total, data),
            Op::ConcatCols(parts.to_vec()),
        )
    }

    pub fn gather_rows(&mut self, table: VarId, indices: &[usize]) -> VarId {
        let tt = &self.nodes[table.0].value;
        let c = tt.cols();
        let mut data = Vec::with_capacity(indices.len() * c);
        for &i in indices {
            assert!(i < tt.rows(), "gather_rows index {i} out of {}", tt.rows());
            data.extend_from_slice(&tt.as_slice()[i * c..(i + 1) * c]);
        }
        self.push(
            Tensor::from_vec(indices.len(), c, data),
            Op::GatherRows(table, indices.to_vec()),
        )
    }

    pub fn mean_rows(&mut self, a: VarId) -> VarId {
        let ta = &self.nodes[a.0].value;
        let (r, c) = (ta.rows(), ta.cols());
        let mut data = vec![0.0; c];
        for i in 0..r {
            for j in 0..c {
                data[j] += ta.get(i, j);
            }
        }
        for v in &mut data {
            *v /= r as f64;
        }
        self.push(Tensor::from_vec(1, c, data), Op::MeanRows(a))
    }

    pub fn sum_all(&mut self, a: VarId) -> VarId {
        let s: f64 = self.nodes[a.0].value.iter().sum();
        self.push(Tensor::scalar(s), Op::SumAll(a))
    }

    pub fn select_per_row(&mut self, a: VarId, cols: &[usize]) -> VarId {
        let ta = &self.nodes[a.0].value;
        assert_eq!(ta.rows(), cols.len(), "one column pick per row");
        let data: Vec<f64> = cols.iter().enumerate().map(|(i, &j)| ta.get(i, j)).collect();
        self.push(
            Tensor::from_vec(cols.len(), 1, data),
            Op::SelectPerRow(a, cols.to_vec()),
        )
    }

    /// Per-row layer normalization with learnable gain/shift (`[1, n]` each).
    pub fn layer_norm(&mut self, x: VarId, gamma: VarId, beta: VarId, eps: f64) -> VarId {
        let tx = &self.nodes[x.0].value;
        let (r, c) = (tx.rows(), tx.cols());
        let tg = &self.nodes[gamma.0].value;
        let tb = &self.nodes[beta.0].value;
        assert_eq!(tg.cols(), c);
        assert_eq!(tb.cols(), c);
        let mut data = vec![0.0; r * c];
        for i in 0..r {
            let row = &tx.as_slice()[i * c..(i + 1) * c];
            let mean = row.iter().sum::<f64>() / c as f64;
            let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>() / c as f64;
            let inv = 1.0 / (var + eps).sqrt();
            for j in 0..c {
                let xhat = (row[j] - mean) * inv;
                data[i * c + j] = tg.as_slice()[j] * xhat + tb.as_slice()[j];
            }
        }
        self.push(
            Tensor::from_vec(r, c, data),
            Op::LayerNorm { x, gamma, beta, eps },
        )
    }

    fn zip(&self, a: VarId, b: VarId, f: impl Fn(f64, f64) -> f64) -> Tensor {
        let (ta, tb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        assert_eq!(ta.rows(), tb.rows(), "elementwise rows");
        assert_eq!(ta.cols(), tb.cols(), "elementwise cols");
        Tensor::from_vec(
            ta.rows(),
            ta.cols(),
            ta.as_slice()
                .iter()
                .zip(tb.as_slice())
                .map(|(&x, &y)| f(x, y))
                .collect(),
        )
    }

    /// Reverse pass from a scalar root. Returns a gradient per tape node.
    pub fn backward(&self, root: VarId) -> Gradients {
        assert_eq!(
            self.nodes[root.0].value.len(),
            1,
            "backward starts from a scalar"
        );
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        grads[root.0] = Some(vec![1.0]);

        for id in (0..=root.0).rev() {
            let Some(g) = grads[id].take() else { continue };
            self.accumulate(id, &g, &mut grads);
            grads[id] = Some(g);
        }
        Gradients { grads }
    }

    /// Sums gradients of all registered parameter nodes by name.
    pub fn param_grads(&self, grads: &Gradients) -> BTreeMap<String, Vec<f64>> {
        let mut out: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        for (node, name) in &self.param_nodes {
            let len = self.nodes[*node].value.len();
            let entry = out.entry(name.clone()).or_insert_with(|| vec![0.0; len]);
            if let Some(g) = grads.grads[*node].as_ref() {
                for (acc, &v) in entry.iter_mut().zip(g) {
                    *acc += v;
                }
            }
        }
        out
    }

    fn accumulate(&self, id: usize, g: &[f64], grads: &mut Vec<Option<Vec<f64>>>) {
        let ensure = |grads: &mut Vec<Option<Vec<f64>>>, v: VarId, len: usize| {
            if grads[v.0].is_none() {
                grads[v.0] = Some(vec![0.0; len]);
            }
        };
        let shape = |v: VarId| {
            let t = &self.nodes[v.0].value;
            (t.rows(), t.cols())
        };

        match &self.nodes[id].op {
            Op::Leaf | Op::ParamLeaf => {}
            Op::MatMul(a, b) => {
                let (ar, ac) = shape(*a);
                let (br, bc) = shape(*b);
                let ta = self.nodes[a.0].value.as_slice();
                let tb = self.nodes[b.0].value.as_slice();
                // dA = G B^T ; dB = A^T G
                let da = matmul_raw(g, ar, bc, tb, br, bc, false, true);
                let db = matmul_raw(ta, ar, ac, g, ar, bc, true, false);
                ensure(grads, *a, ar * ac);
                add_into(grads[a.0].as_mut().unwrap(), &da);
                ensure(grads, *b, br * bc);
                add_into(grads[b.0].as_mut().unwrap(), &db);
            }
            Op::Add(a, b) => {
                for v in [a, b] {
                    let (r, c) = shape(*v);
                    ensure(grads, *v, r * c);
                    add_into(grads[v.0].as_mut().unwrap(), g);
                }
            }
            Op::Sub(a, b) => {
                let (r, c) = shape(*a);
                ensure(grads, *a, r * c);
                add_into(grads[a.0].as_mut().unwrap(), g);
                ensure(grads, *b, r * c);
                for (acc, &v) in grads[b.0].as_mut().unwrap().iter_mut().zip(g) {
                    *acc -= v;
                }
            }
            Op::Mul(a, b) => {
                let (r, c) = shape(*a);
                let ta: Vec<f64> = self.nodes[a.0].value.as_slice().to_vec();
                let tb: Vec<f64> = self.nodes[b.0].value.as_slice().to_vec();
                ensure(grads, *a, r * c);
                for ((acc, &gv), &bv) in grads[a.0].as_mut().unwrap().iter_mut().zip(g).zip(&tb) {
                    *acc += gv * bv;
                }
                ensure(grads, *b, r * c);
                for ((acc, &gv), &av) in grads[b.0].as_mut().unwrap().iter_mut().zip(g).zip(&ta) {
                    *acc += gv * av;
                }
            }
            Op::AddRow(a, b) => {
                let (ar, ac) = shape(*a);
                ensure(grads, *a, ar * ac);
                add_into(grads[a.0].as_mut().unwrap(), g);
                ensure(grads, *b, ac);
                let gb = grads[b.0].as_mut().unwrap();
                for (k, &gv) in g.iter().enumerate() {
                    gb[k % ac] += gv;
                }
            }
            Op::Scale(a, c) => {
                let (r, cc) = shape(*a);
                ensure(grads, *a, r * cc);
                for (acc, &gv) in grads[a.0].as_mut().unwrap().iter_mut().zip(g) {
                    *acc += gv * c;
                }
            }
            Op::Relu(a) => {
                let (r, c) = shape(*a);
                let ta = self.nodes[a.0].value.as_slice();
                ensure(grads, *a, r * c);
                for ((acc, &gv), &xv) in grads[a.0].as_mut().unwrap().iter_mut().zip(g).zip(ta) {
                    if xv > 0.0 {
                        *acc += gv;
                    }
                }
            }
            Op::Exp(a) => {
                let (r, c) = shape(*a);
                let out = self.nodes[id].value.as_slice();
                ensure(grads, *a, r * c);
                for ((acc, &gv), &ev) in grads[a.0].as_mut().unwrap().iter_mut().zip(g).zip(out) {
                    *acc += gv * ev;
                }
            }
            Op::SoftmaxRows(a) => {
                let (r, c) = shape(*a);
                let s = self.nodes[id].value.as_slice();
                ensure(grads, *a, r * c);
                let ga = grads[a.0].as_mut().unwrap();
                for i in 0..r {
                    let srow = &s[i * c..(i + 1) * c];
                    let grow = &g[i * c..(i + 1) * c];
                    let dot: f64 = srow.iter().zip(grow).map(|(&sv, &gv)| sv * gv).sum();
                    for j in 0..c {
                        ga[i * c + j] += srow[j] * (grow[j] - dot);
                    }
                }
            }
            Op::LogSoftmaxRows(a) => {
                let (r, c) = shape(*a);
                let out = self.nodes[id].value.as_slice();
                ensure(grads, *a, r * c);
                let ga = grads[a.0].as_mut().unwrap();
                for i in 0..r {
                    let grow = &g[i * c..(i + 1) * c];
                    let gsum: f64 = grow.iter().sum();
                    for j in 0..c {
                        let softmax = out[i * c + j].exp();
                        ga[i * c + j] += grow[j] - softmax * gsum;
                    }
                }
            }
            Op::Transpose(a) => {
                let (r, c) = shape(*a);
                ensure(grads, *a, r * c);
                let ga = grads[a.0].as_mut().unwrap();
                for i in 0..c {
                    for j in 0..r {
                        ga[j * c + i] += g[i * r + j];
                    }
                }
            }
            Op::SliceCols(a, start, len) => {
                let (r, c) = shape(*a);
                ensure(grads, *a, r * c);
                let ga = grads[a.0].as_mut().unwrap();
                for i in 0..r {
                    for j in 0..*len {
                        ga[i * c + start + j] += g[i * len + j];
                    }
                }
            }
            Op::ConcatCols(parts) => {
                let total: usize = parts.iter().map(|p| shape(*p).1).sum();
                let r = shape(parts[0]).0;
                let mut offset = 0;
                for p in parts {
                    let (_, c) = shape(*p);
                    ensure(grads, *p, r * c);
                    let gp = grads[p.0].as_mut().unwrap();
                    for i in 0..r {
                        for j in 0..c {
                            gp[i * c + j] += g[i * total + offset + j];
                        }
                    }
                    offset += c;
                }
            }
            Op::GatherRows(table, indices) => {
                let (tr, tc) = shape(*table);
                ensure(grads, *table, tr * tc);
                let gt = grads[table.0].as_mut().unwrap();
                for (out_row, &src) in indices.iter().enumerate() {
                    for j in 0..tc {
                        gt[src * tc + j] += g[out_row * tc + j];
                    }
                }
            }
            Op::MeanRows(a) => {
                let (r, c) = shape(*a);
                ensure(grads, *a, r * c);
                let ga = grads[a.0].as_mut().unwrap();
                for i in 0..r {
                    for j in 0..c {
                        ga[i * c + j] += g[j] / r as f64;
                    }
                }
            }
            Op::SumAll(a) => {
                let (r, c) = shape(*a);
                ensure(grads, *a, r * c);
                for acc in grads[a.0].as_mut().unwrap().iter_mut() {
                    *acc += g[0];
                }
            }
            Op::SelectPerRow(a, cols) => {
                let (r, c) = shape(*a);
                ensure(grads, *a, r * c);
                let ga = grads[a.0].as_mut().unwrap();
                for (i, &j) in cols.iter().enumerate() {
                    ga[i * c + j] += g[i];
                }
            }
            Op::LayerNorm { x, gamma, beta, eps } => {
                let (r, c) = shape(*x);
                let tx = self.nodes[x.0].value.as_slice();
                let tg = self.nodes[gamma.0].value.as_slice();
                ensure(grads, *x, r * c);
                ensure(grads, *gamma, c);
                ensure(grads, *beta, c);
                for i in 0..r {
                    let row = &tx[i * c..(i + 1) * c];
                    let grow = &g[i * c..(i + 1) * c];
                    let mean = row.iter().sum::<f64>() / c as f64;
                    let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>() / c as f64;
                    let inv = 1.0 / (var + eps).sqrt();
                    let xhat: Vec<f64> = row.iter().map(|&v| (v - mean) * inv).collect();

                    {
                        let ggamma = grads[gamma.0].as_mut().unwrap();
                        for j in 0..c {
                            ggamma[j] += grow[j] * xhat[j];
                        }
                    }
                    {
                        let gbeta = grads[beta.0].as_mut().unwrap();
                        for j in 0..c {
                            gbeta[j] += grow[j];
                        }
                    }

                    let gy: Vec<f64> = (0..c).map(|j| grow[j] * tg[j]).collect();
                    let mean_gy = gy.iter().sum::<f64>() / c as f64;
                    let mean_gy_xhat =
                        gy.iter().zip(&xhat).map(|(&a, &b)| a * b).sum::<f64>() / c as f64;
                    let gx = grads[x.0].as_mut().unwrap();
                    for j in 0..c {
                        gx[i * c + j] += inv * (gy[j] - mean_gy - xhat[j] * mean_gy_xhat);
                    }
                }
            }
        }
    }
}

fn add_into(acc: &mut [f64], delta: &[f64]) {
    for (a, &d) in acc.iter_mut().zip(delta) {
        *a += d;
    }
}

/// GEMM on raw row-major buffers via ndarray, with optional transposes.
/// `(r, c)` always describe the *stored* layout of each buffer.
#[allow(clippy::too_many_arguments)]
fn matmul_raw(
    a: &[f64],
    ar: usize,
    ac: usize,
    b: &[f64],
    br: usize,
    bc: usize,
    trans_a: bool,
    trans_b: bool,
) -> Vec<f64> {
    let av = ArrayView2::from_shape((ar, ac), a).expect("a shape");
    let bv = ArrayView2::from_shape((br, bc), b).expect("b shape");
    let out = match (trans_a, trans_b) {
        (false, false) => av.dot(&bv),
        (true, false) => av.t().dot(&bv),
        (false, true) => av.dot(&bv.t()),
        (true, true) => av.t().dot(&bv.t()),
    };
    let (or, oc) = out.dim();
    out.into_shape_with_order((or * oc,))
        .expect("flatten")
        .to_vec()
}
