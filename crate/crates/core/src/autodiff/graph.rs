use rand::Rng;

use super::params::{ParamId, ParamStore};
use super::{Real, Tensor};
use crate::{Error, Result};

/// Handle to a node on a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

/// Contiguous row groups, CSR style: group `g` owns rows
/// `offsets[g]..offsets[g + 1]`. Groups may be empty.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segments {
    offsets: Vec<usize>,
}

impl Segments {
    pub fn from_lengths(lengths: impl IntoIterator<Item = usize>) -> Self {
        let mut offsets = vec![0];
        for l in lengths {
            offsets.push(offsets.last().unwrap() + l);
        }
        Self { offsets }
    }

    pub fn num_groups(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn total(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn range(&self, g: usize) -> std::ops::Range<usize> {
        self.offsets[g]..self.offsets[g + 1]
    }
}

enum Op<F> {
    Leaf,
    Param(ParamId),
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddRow(Var, Var),
    Affine(Var, F),
    ConcatCols(Vec<Var>),
    Interleave(Var, Var),
    Relu(Var),
    Sigmoid(Var),
    Tanh(Var),
    Exp(Var),
    Cos(Var),
    Sin(Var),
    SoftmaxRows(Var),
    Dropout(Var, Vec<F>),
    Sum(Var),
    Mean(Var),
    Bce(Var, Vec<F>),
    SoftmaxCe(Var, Vec<usize>),
    GatherRows(Var, Vec<usize>),
    ScatterRows(Var, Vec<usize>, Var),
    SegmentSoftmax(Var, Segments),
    SegmentWeightedSum(Var, Var, Segments),
}

struct Node<F> {
    value: Tensor<F>,
    op: Op<F>,
    requires_grad: bool,
}

/// A tape of executed operations.
pub struct Graph<F> {
    nodes: Vec<Node<F>>,
    params: Vec<Option<Var>>,
    grads: Vec<Option<Vec<F>>>,
    train: bool,
}

fn shape_err(op: &'static str, a: (usize, usize), b: (usize, usize)) -> Error {
    Error::Shape { op, lhs: a, rhs: b }
}

fn sigmoid<F: Real>(x: F) -> F {
    if x >= F::zero() {
        F::one() / (F::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (F::one() + e)
    }
}

impl<F: Real> Default for Graph<F> {
    fn default() -> Self {
        Self::new(false)
    }
}

impl<F: Real> Graph<F> {
    /// `train` enables dropout.
    pub fn new(train: bool) -> Self {
        Self {
            nodes: Vec::new(),
            params: Vec::new(),
            grads: Vec::new(),
            train,
        }
    }

    pub fn is_train(&self) -> bool {
        self.train
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor<F>, op: Op<F>, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    pub fn value(&self, v: Var) -> &Tensor<F> {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.shape()
    }

    /// Value of a 1 x 1 node.
    pub fn scalar(&self, v: Var) -> F {
        let t = self.value(v);
        debug_assert_eq!(t.shape(), (1, 1));
        t.data[0]
    }

    pub fn constant(&mut self, t: Tensor<F>) -> Var {
        self.push(t, Op::Leaf, false)
    }

    /// Records parameter `id` on the tape (once; later calls return the
    /// same node).
    pub fn param(&mut self, store: &ParamStore<F>, id: ParamId) -> Var {
        if self.params.len() <= id.index() {
            self.params.resize(id.index() + 1, None);
        }
        if let Some(v) = self.params[id.index()] {
            return v;
        }
        let v = self.push(store.value(id).clone(), Op::Param(id), true);
        self.params[id.index()] = Some(v);
        v
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = self.shape(a);
        let (k2, n) = self.shape(b);
        if k != k2 {
            return Err(shape_err("matmul", (m, k), (k2, n)));
        }
        let mut out = Tensor::zeros(m, n);
        F::gemm(
            m,
            k,
            n,
            F::one(),
            &self.value(a).data,
            k as isize,
            1,
            &self.value(b).data,
            n as isize,
            1,
            F::zero(),
            &mut out.data,
            n as isize,
            1,
        );
        let rg = self.rg(&[a, b]);
        Ok(self.push(out, Op::MatMul(a, b), rg))
    }

    fn zip(
        &mut self,
        a: Var,
        b: Var,
        name: &'static str,
        f: impl Fn(F, F) -> F,
    ) -> Result<Tensor<F>> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(shape_err(name, ta.shape(), tb.shape()));
        }
        Ok(Tensor {
            rows: ta.rows,
            cols: ta.cols,
            data: ta
                .data
                .iter()
                .zip(&tb.data)
                .map(|(&x, &y)| f(x, y))
                .collect(),
        })
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let t = self.zip(a, b, "add", |x, y| x + y)?;
        let rg = self.rg(&[a, b]);
        Ok(self.push(t, Op::Add(a, b), rg))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let t = self.zip(a, b, "sub", |x, y| x - y)?;
        let rg = self.rg(&[a, b]);
        Ok(self.push(t, Op::Sub(a, b), rg))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let t = self.zip(a, b, "mul", |x, y| x * y)?;
        let rg = self.rg(&[a, b]);
        Ok(self.push(t, Op::Mul(a, b), rg))
    }

    /// Adds a `1 x n` bias to every row of an `m x n` matrix.
    pub fn add_row(&mut self, a: Var, bias: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(bias));
        if tb.rows != 1 || tb.cols != ta.cols {
            return Err(shape_err("add_row", ta.shape(), tb.shape()));
        }
        let mut t = ta.clone();
        for r in 0..t.rows {
            for (x, &b) in t.row_mut(r).iter_mut().zip(&tb.data) {
                *x = *x + b;
            }
        }
        let rg = self.rg(&[a, bias]);
        Ok(self.push(t, Op::AddRow(a, bias), rg))
    }

    /// `scale * a + shift`.
    pub fn affine(&mut self, a: Var, scale: F, shift: F) -> Var {
        let t = self.map(a, |x| scale * x + shift);
        let rg = self.rg(&[a]);
        self.push(t, Op::Affine(a, scale), rg)
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let rows = self.shape(parts[0]).0;
        let mut cols = 0;
        for &p in parts {
            let sh = self.shape(p);
            if sh.0 != rows {
                return Err(shape_err("concat_cols", self.shape(parts[0]), sh));
            }
            cols += sh.1;
        }
        let mut out = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for &p in parts {
                out.extend_from_slice(self.value(p).row(r));
            }
        }
        let rg = self.rg(parts);
        Ok(self.push(
            Tensor::new(rows, cols, out)?,
            Op::ConcatCols(parts.to_vec()),
            rg,
        ))
    }

    /// `[a0, b0, a1, b1, ...]` column interleave of two equal-shape matrices.
    pub fn interleave(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(shape_err("interleave", ta.shape(), tb.shape()));
        }
        let (m, n) = ta.shape();
        let mut out = Vec::with_capacity(2 * m * n);
        for (x, y) in ta.data.iter().zip(&tb.data) {
            out.push(*x);
            out.push(*y);
        }
        let rg = self.rg(&[a, b]);
        Ok(self.push(Tensor::new(m, 2 * n, out)?, Op::Interleave(a, b), rg))
    }

    fn map(&self, a: Var, f: impl Fn(F) -> F) -> Tensor<F> {
        let t = self.value(a);
        Tensor {
            rows: t.rows,
            cols: t.cols,
            data: t.data.iter().map(|&x| f(x)).collect(),
        }
    }

    fn unary(&mut self, a: Var, f: impl Fn(F) -> F, op: Op<F>) -> Var {
        let t = self.map(a, f);
        let rg = self.rg(&[a]);
        self.push(t, op, rg)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        self.unary(a, |x| x.max(F::zero()), Op::Relu(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.unary(a, sigmoid, Op::Sigmoid(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.unary(a, F::tanh, Op::Tanh(a))
    }

    pub fn exp(&mut self, a: Var) -> Var {
        self.unary(a, F::exp, Op::Exp(a))
    }

    pub fn cos(&mut self, a: Var) -> Var {
        self.unary(a, F::cos, Op::Cos(a))
    }

    pub fn sin(&mut self, a: Var) -> Var {
        self.unary(a, F::sin, Op::Sin(a))
    }

    pub fn softmax_rows(&mut self, a: Var) -> Var {
        let mut t = self.value(a).clone();
        for r in 0..t.rows {
            softmax_in_place(t.row_mut(r));
        }
        let rg = self.rg(&[a]);
        self.push(t, Op::SoftmaxRows(a), rg)
    }

    /// Inverted dropout: active only on a training tape with `p > 0`.
    pub fn dropout(&mut self, a: Var, p: f64, rng: &mut impl Rng) -> Var {
        if !self.train || p <= 0.0 {
            return a;
        }
        let keep = F::lit(1.0 / (1.0 - p));
        let mask: Vec<F> = (0..self.value(a).len())
            .map(|_| {
                if rng.random::<f64>() < p {
                    F::zero()
                } else {
                    keep
                }
            })
            .collect();
        let t = self.value(a);
        let out = Tensor {
            rows: t.rows,
            cols: t.cols,
            data: t.data.iter().zip(&mask).map(|(&x, &m)| x * m).collect(),
        };
        let rg = self.rg(&[a]);
        self.push(out, Op::Dropout(a, mask), rg)
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).data.iter().copied().sum();
        let rg = self.rg(&[a]);
        self.push(Tensor::full(1, 1, s), Op::Sum(a), rg)
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let t = self.value(a);
        let n = F::from_usize(t.len().max(1)).unwrap();
        let s: F = t.data.iter().copied().sum();
        let rg = self.rg(&[a]);
        self.push(Tensor::full(1, 1, s / n), Op::Mean(a), rg)
    }

    /// Mean binary cross-entropy of `logits` (any shape) against 0/1 targets.
    pub fn bce_with_logits(&mut self, logits: Var, targets: &[F]) -> Result<Var> {
        let t = self.value(logits);
        if t.len() != targets.len() {
            return Err(shape_err("bce", t.shape(), (targets.len(), 1)));
        }
        let n = F::from_usize(t.len().max(1)).unwrap();
        let mut loss = F::zero();
        for (&x, &y) in t.data.iter().zip(targets) {
            loss = loss + x.max(F::zero()) - x * y + (F::one() + (-x.abs()).exp()).ln();
        }
        let rg = self.rg(&[logits]);
        Ok(self.push(
            Tensor::full(1, 1, loss / n),
            Op::Bce(logits, targets.to_vec()),
            rg,
        ))
    }

    /// Mean softmax cross-entropy over rows of `logits`.
    pub fn softmax_cross_entropy(&mut self, logits: Var, labels: &[usize]) -> Result<Var> {
        let t = self.value(logits);
        if t.rows != labels.len() || labels.iter().any(|&l| l >= t.cols) {
            return Err(shape_err(
                "softmax_cross_entropy",
                t.shape(),
                (labels.len(), 1),
            ));
        }
        let mut loss = F::zero();
        for (r, &l) in labels.iter().enumerate() {
            let row = t.row(r);
            let max = row.iter().copied().fold(F::neg_infinity(), F::max);
            let lse = row.iter().map(|&x| (x - max).exp()).sum::<F>().ln() + max;
            loss = loss + lse - row[l];
        }
        let n = F::from_usize(labels.len().max(1)).unwrap();
        let rg = self.rg(&[logits]);
        Ok(self.push(
            Tensor::full(1, 1, loss / n),
            Op::SoftmaxCe(logits, labels.to_vec()),
            rg,
        ))
    }

    pub fn gather_rows(&mut self, a: Var, idx: &[usize]) -> Result<Var> {
        let t = self.value(a);
        if let Some(&bad) = idx.iter().find(|&&i| i >= t.rows) {
            return Err(shape_err("gather_rows", t.shape(), (bad, 0)));
        }
        let mut out = Vec::with_capacity(idx.len() * t.cols);
        for &i in idx {
            out.extend_from_slice(t.row(i));
        }
        let t = Tensor::new(idx.len(), t.cols, out)?;
        let rg = self.rg(&[a]);
        Ok(self.push(t, Op::GatherRows(a, idx.to_vec()), rg))
    }

    /// Copy of `base` with rows `idx[k]` replaced by row `k` of `rows`.
    /// Indices must be distinct.
    pub fn scatter_rows(&mut self, base: Var, idx: &[usize], rows: Var) -> Result<Var> {
        let (tb, tr) = (self.value(base), self.value(rows));
        if tr.cols != tb.cols || tr.rows != idx.len() || idx.iter().any(|&i| i >= tb.rows) {
            return Err(shape_err("scatter_rows", tb.shape(), tr.shape()));
        }
        let mut t = tb.clone();
        for (k, &i) in idx.iter().enumerate() {
            t.row_mut(i).copy_from_slice(tr.row(k));
        }
        let rg = self.rg(&[base, rows]);
        Ok(self.push(t, Op::ScatterRows(base, idx.to_vec(), rows), rg))
    }

    /// Column-wise softmax within each row segment (one column per head).
    pub fn segment_softmax(&mut self, a: Var, seg: &Segments) -> Result<Var> {
        let mut t = self.value(a).clone();
        if seg.total() != t.rows {
            return Err(shape_err("segment_softmax", t.shape(), (seg.total(), 0)));
        }
        let mut col = Vec::new();
        for g in 0..seg.num_groups() {
            let r = seg.range(g);
            for h in 0..t.cols {
                col.clear();
                col.extend(r.clone().map(|i| t.get(i, h)));
                softmax_in_place(&mut col);
                for (i, &v) in r.clone().zip(&col) {
                    t.data[i * t.cols + h] = v;
                }
            }
        }
        let rg = self.rg(&[a]);
        Ok(self.push(t, Op::SegmentSoftmax(a, seg.clone()), rg))
    }

    /// For `values` (`M x d`) and per-head `weights` (`M x H`), returns the
    /// `G x (H d)` matrix whose group row is `[sum_i w_i0 v_i, ..., sum_i w_i(H-1) v_i]`.
    /// Empty groups yield zero rows.
    pub fn segment_weighted_sum(
        &mut self,
        values: Var,
        weights: Var,
        seg: &Segments,
    ) -> Result<Var> {
        let (tv, tw) = (self.value(values), self.value(weights));
        if tv.rows != tw.rows || seg.total() != tv.rows {
            return Err(shape_err("segment_weighted_sum", tv.shape(), tw.shape()));
        }
        let (d, heads) = (tv.cols, tw.cols);
        let mut out = Tensor::zeros(seg.num_groups(), heads * d);
        for g in 0..seg.num_groups() {
            let orow = out.row_mut(g);
            for i in seg.range(g) {
                let v = tv.row(i);
                for h in 0..heads {
                    let w = tw.get(i, h);
                    for (o, &x) in orow[h * d..(h + 1) * d].iter_mut().zip(v) {
                        *o = *o + w * x;
                    }
                }
            }
        }
        let rg = self.rg(&[values, weights]);
        Ok(self.push(
            out,
            Op::SegmentWeightedSum(values, weights, seg.clone()),
            rg,
        ))
    }

    /// Reverse pass from a scalar `loss`. Parameter gradients are added to
    /// `store`'s gradient buffers.
    pub fn backward(&mut self, loss: Var, store: &mut ParamStore<F>) -> Result<()> {
        if self.shape(loss) != (1, 1) {
            return Err(shape_err("backward", self.shape(loss), (1, 1)));
        }
        self.grads = (0..self.nodes.len()).map(|_| None).collect();
        self.grads[loss.0] = Some(vec![F::one()]);
        for i in (0..=loss.0).rev() {
            let Some(g) = self.grads[i].take() else {
                continue;
            };
            if !self.nodes[i].requires_grad {
                continue;
            }
            self.backprop_node(i, &g);
            if let Op::Param(id) = self.nodes[i].op {
                store.accumulate_grad(id, &g);
            }
            self.grads[i] = Some(g);
        }
        Ok(())
    }

    /// Gradient of the last backward pass with respect to `v`, if any reached it.
    pub fn grad(&self, v: Var) -> Option<&[F]> {
        self.grads.get(v.0).and_then(|g| g.as_deref())
    }

    fn backprop_node(&mut self, i: usize, g: &[F]) {
        let Self { nodes, grads, .. } = self;
        let shape = |v: Var| nodes[v.0].value.shape();
        match &nodes[i].op {
            Op::Leaf | Op::Param(_) => {}
            Op::MatMul(a, b) => {
                let (m, k) = shape(*a);
                let n = shape(*b).1;
                if nodes[a.0].requires_grad {
                    let bv = &nodes[b.0].value.data;
                    let ga = acc(nodes, grads, *a).unwrap();
                    // dA += G B^T
                    F::gemm(
                        m,
                        n,
                        k,
                        F::one(),
                        g,
                        n as isize,
                        1,
                        bv,
                        1,
                        n as isize,
                        F::one(),
                        ga,
                        k as isize,
                        1,
                    );
                }
                if nodes[b.0].requires_grad {
                    let av = &nodes[a.0].value.data;
                    let gb = acc(nodes, grads, *b).unwrap();
                    // dB += A^T G
                    F::gemm(
                        k,
                        m,
                        n,
                        F::one(),
                        av,
                        1,
                        k as isize,
                        g,
                        n as isize,
                        1,
                        F::one(),
                        gb,
                        n as isize,
                        1,
                    );
                }
            }
            Op::Add(a, b) => {
                acc_with(nodes, grads, *a, |j| g[j]);
                acc_with(nodes, grads, *b, |j| g[j]);
            }
            Op::Sub(a, b) => {
                acc_with(nodes, grads, *a, |j| g[j]);
                acc_with(nodes, grads, *b, |j| -g[j]);
            }
            Op::Mul(a, b) => {
                let av = &nodes[a.0].value.data;
                let bv = &nodes[b.0].value.data;
                acc_with(nodes, grads, *a, |j| g[j] * bv[j]);
                acc_with(nodes, grads, *b, |j| g[j] * av[j]);
            }
            Op::AddRow(a, bias) => {
                acc_with(nodes, grads, *a, |j| g[j]);
                let cols = shape(*bias).1;
                if let Some(gb) = acc(nodes, grads, *bias) {
                    for (j, &x) in g.iter().enumerate() {
                        gb[j % cols] = gb[j % cols] + x;
                    }
                }
            }
            Op::Affine(a, scale) => {
                let s = *scale;
                acc_with(nodes, grads, *a, |j| g[j] * s);
            }
            Op::ConcatCols(parts) => {
                let total = nodes[i].value.cols;
                let mut off = 0;
                for &p in parts {
                    let (rows, cols) = shape(p);
                    if let Some(gp) = acc(nodes, grads, p) {
                        for r in 0..rows {
                            for c in 0..cols {
                                gp[r * cols + c] = gp[r * cols + c] + g[r * total + off + c];
                            }
                        }
                    }
                    off += cols;
                }
            }
            Op::Interleave(a, b) => {
                acc_with(nodes, grads, *a, |j| g[2 * j]);
                acc_with(nodes, grads, *b, |j| g[2 * j + 1]);
            }
            Op::Relu(a) => {
                let av = &nodes[a.0].value.data;
                acc_with(nodes, grads, *a, |j| {
                    if av[j] > F::zero() {
                        g[j]
                    } else {
                        F::zero()
                    }
                });
            }
            Op::Sigmoid(a) => {
                let y = &nodes[i].value.data;
                acc_with(nodes, grads, *a, |j| g[j] * y[j] * (F::one() - y[j]));
            }
            Op::Tanh(a) => {
                let y = &nodes[i].value.data;
                acc_with(nodes, grads, *a, |j| g[j] * (F::one() - y[j] * y[j]));
            }
            Op::Exp(a) => {
                let y = &nodes[i].value.data;
                acc_with(nodes, grads, *a, |j| g[j] * y[j]);
            }
            Op::Cos(a) => {
                let x = &nodes[a.0].value.data;
                acc_with(nodes, grads, *a, |j| -g[j] * x[j].sin());
            }
            Op::Sin(a) => {
                let x = &nodes[a.0].value.data;
                acc_with(nodes, grads, *a, |j| g[j] * x[j].cos());
            }
            Op::SoftmaxRows(a) => {
                let y = &nodes[i].value;
                let mut dx = vec![F::zero(); y.len()];
                for r in 0..y.rows {
                    let yr = y.row(r);
                    let gr = &g[r * y.cols..(r + 1) * y.cols];
                    let dot: F = yr.iter().zip(gr).map(|(&p, &q)| p * q).sum();
                    for c in 0..y.cols {
                        dx[r * y.cols + c] = yr[c] * (gr[c] - dot);
                    }
                }
                acc_with(nodes, grads, *a, |j| dx[j]);
            }
            Op::Dropout(a, mask) => {
                acc_with(nodes, grads, *a, |j| g[j] * mask[j]);
            }
            Op::Sum(a) => {
                acc_with(nodes, grads, *a, |_| g[0]);
            }
            Op::Mean(a) => {
                let n = F::from_usize(nodes[a.0].value.len().max(1)).unwrap();
                acc_with(nodes, grads, *a, |_| g[0] / n);
            }
            Op::Bce(a, targets) => {
                let x = &nodes[a.0].value.data;
                let n = F::from_usize(x.len().max(1)).unwrap();
                acc_with(nodes, grads, *a, |j| {
                    g[0] * (sigmoid(x[j]) - targets[j]) / n
                });
            }
            Op::SoftmaxCe(a, labels) => {
                let mut p = nodes[a.0].value.clone();
                let n = F::from_usize(labels.len().max(1)).unwrap();
                for (r, &l) in labels.iter().enumerate() {
                    let row = p.row_mut(r);
                    softmax_in_place(row);
                    row[l] = row[l] - F::one();
                }
                acc_with(nodes, grads, *a, |j| g[0] * p.data[j] / n);
            }
            Op::GatherRows(a, idx) => {
                let cols = shape(*a).1;
                if let Some(ga) = acc(nodes, grads, *a) {
                    for (k, &r) in idx.iter().enumerate() {
                        for c in 0..cols {
                            ga[r * cols + c] = ga[r * cols + c] + g[k * cols + c];
                        }
                    }
                }
            }
            Op::ScatterRows(base, idx, rows) => {
                let cols = shape(*base).1;
                let mut replaced = vec![false; shape(*base).0];
                for &r in idx {
                    replaced[r] = true;
                }
                acc_with(nodes, grads, *base, |j| {
                    if replaced[j / cols] {
                        F::zero()
                    } else {
                        g[j]
                    }
                });
                if let Some(gr) = acc(nodes, grads, *rows) {
                    for (k, &r) in idx.iter().enumerate() {
                        for c in 0..cols {
                            gr[k * cols + c] = gr[k * cols + c] + g[r * cols + c];
                        }
                    }
                }
            }
            Op::SegmentSoftmax(a, seg) => {
                let y = &nodes[i].value;
                let h = y.cols;
                let mut dx = vec![F::zero(); y.len()];
                for grp in 0..seg.num_groups() {
                    let r = seg.range(grp);
                    for c in 0..h {
                        let dot: F = r.clone().map(|k| y.data[k * h + c] * g[k * h + c]).sum();
                        for k in r.clone() {
                            dx[k * h + c] = y.data[k * h + c] * (g[k * h + c] - dot);
                        }
                    }
                }
                acc_with(nodes, grads, *a, |j| dx[j]);
            }
            Op::SegmentWeightedSum(values, weights, seg) => {
                let tv = &nodes[values.0].value;
                let tw = &nodes[weights.0].value;
                let (d, heads) = (tv.cols, tw.cols);
                let out_cols = heads * d;
                if nodes[values.0].requires_grad {
                    let gv = acc(nodes, grads, *values).unwrap();
                    for grp in 0..seg.num_groups() {
                        let grow = &g[grp * out_cols..(grp + 1) * out_cols];
                        for k in seg.range(grp) {
                            for hd in 0..heads {
                                let w = tw.data[k * heads + hd];
                                for c in 0..d {
                                    gv[k * d + c] = gv[k * d + c] + w * grow[hd * d + c];
                                }
                            }
                        }
                    }
                }
                if let Some(gw) = acc(nodes, grads, *weights) {
                    for grp in 0..seg.num_groups() {
                        let grow = &g[grp * out_cols..(grp + 1) * out_cols];
                        for k in seg.range(grp) {
                            let v = tv.row(k);
                            for hd in 0..heads {
                                let dot: F = v
                                    .iter()
                                    .zip(&grow[hd * d..(hd + 1) * d])
                                    .map(|(&x, &y)| x * y)
                                    .sum();
                                gw[k * heads + hd] = gw[k * heads + hd] + dot;
                            }
                        }
                    }
                }
            }
        }
    }
}

fn acc<'a, F: Real>(
    nodes: &[Node<F>],
    grads: &'a mut [Option<Vec<F>>],
    v: Var,
) -> Option<&'a mut Vec<F>> {
    if !nodes[v.0].requires_grad {
        return None;
    }
    let n = nodes[v.0].value.len();
    Some(grads[v.0].get_or_insert_with(|| vec![F::zero(); n]))
}

fn acc_with<F: Real>(
    nodes: &[Node<F>],
    grads: &mut [Option<Vec<F>>],
    v: Var,
    f: impl Fn(usize) -> F,
) {
    if let Some(buf) = acc(nodes, grads, v) {
        for (i, x) in buf.iter_mut().enumerate() {
            *x = *x + f(i);
        }
    }
}

fn softmax_in_place<F: Real>(xs: &mut [F]) {
    if xs.is_empty() {
        return;
    }
    let max = xs.iter().copied().fold(F::neg_infinity(), F::max);
    let mut sum = F::zero();
    for x in xs.iter_mut() {
        *x = (*x - max).exp();
        sum = sum + *x;
    }
    for x in xs.iter_mut() {
        *x = *x / sum;
    }
}
