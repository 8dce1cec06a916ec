//! Tape-based reverse-mode differentiation over [`Array`] values.
//!
//! Every operation appends a node holding its output value and whatever it
//! needs for the backward pass. [`Tape::backward`] walks the nodes once, in
//! reverse order, accumulating gradients into the inputs of each node.

use std::sync::Arc;

use crate::array::{gemm_acc, Array};
use crate::error::{DiffError, Result};
use crate::params::{Gradients, ParamStore};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Tanh,
    Identity,
}

/// Backward rule for an operation defined outside this crate.
pub trait CustomBackward {
    /// Returns one gradient per input, shaped like that input.
    fn backward(&self, inputs: &[&Array], output: &Array, grad_output: &Array) -> Vec<Array>;
}

enum Op {
    Constant,
    Param(String),
    MatMulNt(Var, Var),
    AddBias(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Relu(Var),
    Tanh(Var),
    Gather(Var, Arc<[usize]>),
    ScatterAdd(Var, Arc<[usize]>),
    EdgeReluSum {
        a: Var,
        b: Var,
        e: Var,
        src: Arc<[usize]>,
        dst: Arc<[usize]>,
    },
    Concat(Vec<Var>),
    SegmentSoftmax(Var, Arc<[usize]>),
    MulRows(Var, Var),
    Outer(Var, Var),
    Scale(Var, f64),
    Mse(Var, Var),
    Sum(Var),
    Custom(Vec<Var>, Box<dyn CustomBackward>),
}

struct Node {
    value: Array,
    op: Op,
    needs_grad: bool,
}

/// Ordered record of the forward computation.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
    consumed: bool,
}

fn shape_err(op: &'static str, a: &Array, b: &Array) -> DiffError {
    DiffError::Shape {
        op,
        lhs: a.shape().to_vec(),
        rhs: b.shape().to_vec(),
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Array {
        &self.nodes[v.0].value
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    fn push(
        &mut self,
        op_name: &'static str,
        value: Array,
        op: Op,
        needs_grad: bool,
    ) -> Result<Var> {
        if self.consumed {
            return Err(DiffError::TapeConsumed);
        }
        if !value.is_finite() {
            return Err(DiffError::NonFinite { op: op_name });
        }
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    /// Records a value that never receives a gradient.
    pub fn constant(&mut self, value: Array) -> Result<Var> {
        self.push("constant", value, Op::Constant, false)
    }

    /// Records the current value of a parameter slot.
    pub fn param(&mut self, store: &ParamStore, name: &str) -> Result<Var> {
        let slot = store
            .slot(name)
            .ok_or_else(|| DiffError::UnknownSlot(name.to_string()))?;
        self.push(
            "param",
            slot.value.clone(),
            Op::Param(name.to_string()),
            slot.trainable,
        )
    }

    /// `a · wᵀ` with `a` of shape `[m, k]` (or `[k]`) and `w` of shape `[n, k]`.
    pub fn matmul_nt(&mut self, a: Var, w: Var) -> Result<Var> {
        let (av, wv) = (self.value(a), self.value(w));
        if wv.shape().len() != 2 || av.shape().len() > 2 || av.cols() != wv.shape()[1] {
            return Err(shape_err("matmul_nt", av, wv));
        }
        let (m, k, n) = (av.rows(), av.cols(), wv.shape()[0]);
        let mut out = vec![0.0; m * n];
        gemm_acc(m, k, n, av.data(), false, wv.data(), true, &mut out);
        let shape = if av.shape().len() == 1 {
            vec![n]
        } else {
            vec![m, n]
        };
        let ng = self.needs(a) || self.needs(w);
        self.push(
            "matmul_nt",
            Array::from_parts(shape, out),
            Op::MatMulNt(a, w),
            ng,
        )
    }

    /// Adds the vector `b` to every row of `a`.
    pub fn add_bias(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        if bv.shape().len() != 1 || av.cols() != bv.len() {
            return Err(shape_err("add_bias", av, bv));
        }
        let c = av.cols();
        let mut out = av.clone();
        for row in out.data_mut().chunks_mut(c) {
            for (o, bi) in row.iter_mut().zip(bv.data()) {
                *o += bi;
            }
        }
        let ng = self.needs(a) || self.needs(b);
        self.push("add_bias", out, Op::AddBias(a, b), ng)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.shape() != bv.shape() {
            return Err(shape_err("add", av, bv));
        }
        let mut out = av.clone();
        out.add_assign(bv);
        let ng = self.needs(a) || self.needs(b);
        self.push("add", out, Op::Add(a, b), ng)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.shape() != bv.shape() {
            return Err(shape_err("sub", av, bv));
        }
        let mut out = av.clone();
        for (o, y) in out.data_mut().iter_mut().zip(bv.data()) {
            *o -= y;
        }
        let ng = self.needs(a) || self.needs(b);
        self.push("sub", out, Op::Sub(a, b), ng)
    }

    pub fn relu(&mut self, a: Var) -> Result<Var> {
        let mut out = self.value(a).clone();
        for v in out.data_mut() {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        let ng = self.needs(a);
        self.push("relu", out, Op::Relu(a), ng)
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var> {
        let mut out = self.value(a).clone();
        for v in out.data_mut() {
            *v = v.tanh();
        }
        let ng = self.needs(a);
        self.push("tanh", out, Op::Tanh(a), ng)
    }

    pub fn activate(&mut self, a: Var, act: Activation) -> Result<Var> {
        match act {
            Activation::Relu => self.relu(a),
            Activation::Tanh => self.tanh(a),
            Activation::Identity => Ok(a),
        }
    }

    /// Fully connected layer `act(x · wᵀ + b)`, `w` stored `[n_out, n_in]`.
    pub fn dense(&mut self, x: Var, w: Var, b: Var, act: Activation) -> Result<Var> {
        let y = self.matmul_nt(x, w)?;
        let y = self.add_bias(y, b)?;
        self.activate(y, act)
    }

    /// Selects rows of `a` (a vector counts as a single row).
    pub fn gather_rows(&mut self, a: Var, idx: Arc<[usize]>) -> Result<Var> {
        let av = self.value(a);
        let (m, c) = (av.rows(), av.cols());
        let mut out = Vec::with_capacity(idx.len() * c);
        for &i in idx.iter() {
            if i >= m {
                return Err(DiffError::Index {
                    op: "gather_rows",
                    index: i,
                    len: m,
                });
            }
            out.extend_from_slice(&av.data()[i * c..(i + 1) * c]);
        }
        let ng = self.needs(a);
        self.push(
            "gather_rows",
            Array::from_parts(vec![idx.len(), c], out),
            Op::Gather(a, idx),
            ng,
        )
    }

    /// Sums row `r` of `a` into output row `idx[r]`; output has `n_out` rows.
    pub fn scatter_add_rows(&mut self, a: Var, idx: Arc<[usize]>, n_out: usize) -> Result<Var> {
        let av = self.value(a);
        let (m, c) = (av.rows(), av.cols());
        if idx.len() != m {
            return Err(DiffError::Shape {
                op: "scatter_add_rows",
                lhs: av.shape().to_vec(),
                rhs: vec![idx.len()],
            });
        }
        let mut out = vec![0.0; n_out * c];
        for (r, &i) in idx.iter().enumerate() {
            if i >= n_out {
                return Err(DiffError::Index {
                    op: "scatter_add_rows",
                    index: i,
                    len: n_out,
                });
            }
            let src = &av.data()[r * c..(r + 1) * c];
            for (o, s) in out[i * c..(i + 1) * c].iter_mut().zip(src) {
                *o += s;
            }
        }
        let ng = self.needs(a);
        self.push(
            "scatter_add_rows",
            Array::from_parts(vec![n_out, c], out),
            Op::ScatterAdd(a, idx),
            ng,
        )
    }

    /// Fused message sum over directed pairs `r`:
    /// `out[dst[r]] += relu(a[dst[r]] + b[src[r]] + e[r])`, with `n_out` rows.
    ///
    /// Equals `scatter_add_rows(relu(gather(a, dst) + gather(b, src) + e), dst)`
    /// without materializing the per-pair intermediates.
    pub fn edge_relu_sum(
        &mut self,
        a: Var,
        b: Var,
        e: Var,
        src: Arc<[usize]>,
        dst: Arc<[usize]>,
        n_out: usize,
    ) -> Result<Var> {
        let (av, bv, ev) = (self.value(a), self.value(b), self.value(e));
        let c = ev.cols();
        if av.cols() != c || bv.cols() != c || ev.rows() != src.len() || src.len() != dst.len() {
            return Err(shape_err("edge_relu_sum", av, ev));
        }
        for (idx, len) in [(&src, bv.rows()), (&dst, av.rows().min(n_out))] {
            if let Some(&bad) = idx.iter().find(|&&i| i >= len) {
                return Err(DiffError::Index {
                    op: "edge_relu_sum",
                    index: bad,
                    len,
                });
            }
        }
        let mut out = vec![0.0; n_out * c];
        for (r, (&s, &d)) in src.iter().zip(dst.iter()).enumerate() {
            let (ar, br, er) = (
                &av.data()[d * c..(d + 1) * c],
                &bv.data()[s * c..(s + 1) * c],
                ev.row(r),
            );
            for (((o, x), y), z) in out[d * c..(d + 1) * c].iter_mut().zip(ar).zip(br).zip(er) {
                let pre = x + y + z;
                if pre > 0.0 {
                    *o += pre;
                }
            }
        }
        let ng = self.needs(a) || self.needs(b) || self.needs(e);
        self.push(
            "edge_relu_sum",
            Array::from_parts(vec![n_out, c], out),
            Op::EdgeReluSum { a, b, e, src, dst },
            ng,
        )
    }

    /// Concatenates matrices with equal row counts along columns.
    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let first = self.value(parts[0]);
        let m = first.rows();
        let mut widths = Vec::with_capacity(parts.len());
        for &p in parts {
            let pv = self.value(p);
            if pv.rows() != m {
                return Err(shape_err("concat_cols", first, pv));
            }
            widths.push(pv.cols());
        }
        let total: usize = widths.iter().sum();
        let mut out = vec![0.0; m * total];
        let mut off = 0;
        for (&p, &w) in parts.iter().zip(&widths) {
            let pv = self.value(p).data();
            for r in 0..m {
                out[r * total + off..r * total + off + w].copy_from_slice(&pv[r * w..(r + 1) * w]);
            }
            off += w;
        }
        let ng = parts.iter().any(|&p| self.needs(p));
        self.push(
            "concat_cols",
            Array::from_parts(vec![m, total], out),
            Op::Concat(parts.to_vec()),
            ng,
        )
    }

    /// Softmax of a score column within each segment (`seg[r]` is row r's segment).
    pub fn segment_softmax(&mut self, scores: Var, seg: Arc<[usize]>) -> Result<Var> {
        let sv = self.value(scores);
        if sv.len() != seg.len() {
            return Err(DiffError::Shape {
                op: "segment_softmax",
                lhs: sv.shape().to_vec(),
                rhs: vec![seg.len()],
            });
        }
        let n_seg = seg.iter().copied().max().map_or(0, |m| m + 1);
        let mut max = vec![f64::NEG_INFINITY; n_seg];
        for (s, &g) in sv.data().iter().zip(seg.iter()) {
            max[g] = max[g].max(*s);
        }
        let mut out: Vec<f64> = sv
            .data()
            .iter()
            .zip(seg.iter())
            .map(|(s, &g)| (s - max[g]).exp())
            .collect();
        let mut total = vec![0.0; n_seg];
        for (e, &g) in out.iter().zip(seg.iter()) {
            total[g] += e;
        }
        for (e, &g) in out.iter_mut().zip(seg.iter()) {
            *e /= total[g];
        }
        let shape = sv.shape().to_vec();
        let ng = self.needs(scores);
        self.push(
            "segment_softmax",
            Array::from_parts(shape, out),
            Op::SegmentSoftmax(scores, seg),
            ng,
        )
    }

    /// Multiplies row `r` of `a` by the scalar `c[r]`.
    pub fn mul_rows(&mut self, a: Var, c: Var) -> Result<Var> {
        let (av, cv) = (self.value(a), self.value(c));
        if av.rows() != cv.len() || av.shape().len() != 2 {
            return Err(shape_err("mul_rows", av, cv));
        }
        let w = av.cols();
        let mut out = av.clone();
        for (row, s) in out.data_mut().chunks_mut(w).zip(cv.data()) {
            for v in row {
                *v *= s;
            }
        }
        let ng = self.needs(a) || self.needs(c);
        self.push("mul_rows", out, Op::MulRows(a, c), ng)
    }

    /// Outer product of a column `c` (`m` values) and a row `r` (`n` values).
    pub fn outer(&mut self, c: Var, r: Var) -> Result<Var> {
        let (cv, rv) = (self.value(c), self.value(r));
        let (m, n) = (cv.len(), rv.len());
        let mut out = Vec::with_capacity(m * n);
        for ci in cv.data() {
            out.extend(rv.data().iter().map(|ri| ci * ri));
        }
        let ng = self.needs(c) || self.needs(r);
        self.push(
            "outer",
            Array::from_parts(vec![m, n], out),
            Op::Outer(c, r),
            ng,
        )
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Result<Var> {
        let mut out = self.value(a).clone();
        for v in out.data_mut() {
            *v *= s;
        }
        let ng = self.needs(a);
        self.push("scale", out, Op::Scale(a, s), ng)
    }

    /// Mean of squared differences over all elements; returns a scalar.
    pub fn mse(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.len() != bv.len() {
            return Err(shape_err("mse", av, bv));
        }
        let s: f64 = av
            .data()
            .iter()
            .zip(bv.data())
            .map(|(x, y)| (x - y) * (x - y))
            .sum();
        let v = s / av.len() as f64;
        let ng = self.needs(a) || self.needs(b);
        self.push("mse", Array::scalar(v), Op::Mse(a, b), ng)
    }

    pub fn sum(&mut self, a: Var) -> Result<Var> {
        let s = self.value(a).sum();
        let ng = self.needs(a);
        self.push("sum", Array::scalar(s), Op::Sum(a), ng)
    }

    /// Records an externally computed value with a caller-provided backward rule.
    pub fn custom(
        &mut self,
        inputs: &[Var],
        value: Array,
        rule: Box<dyn CustomBackward>,
    ) -> Result<Var> {
        let ng = inputs.iter().any(|&v| self.needs(v));
        self.push("custom", value, Op::Custom(inputs.to_vec(), rule), ng)
    }

    /// Propagates d(loss)/d(·) back through the tape.
    ///
    /// Returns a gradient for every trainable slot of `store`; slots the loss
    /// does not depend on get zeros. The tape cannot be reused afterwards.
    pub fn backward(&mut self, loss: Var, store: &ParamStore) -> Result<Gradients> {
        if self.consumed {
            return Err(DiffError::TapeConsumed);
        }
        self.consumed = true;
        let lv = self.value(loss);
        if lv.len() != 1 {
            return Err(DiffError::NotScalar(lv.shape().to_vec()));
        }
        let mut grads: Vec<Option<Array>> = Vec::with_capacity(self.nodes.len());
        grads.resize_with(self.nodes.len(), || None);
        grads[loss.0] = Some(Array::filled(lv.shape(), 1.0));

        let mut out = Gradients::new();
        for name in store.trainable_names() {
            out.insert(name.to_string(), Array::zeros(store.get(name)?.shape()));
        }

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            if !node.needs_grad {
                continue;
            }
            self.backprop_node(node, &g, &mut grads, &mut out)?;
        }
        Ok(out)
    }

    fn backprop_node(
        &self,
        node: &Node,
        g: &Array,
        grads: &mut [Option<Array>],
        params: &mut Gradients,
    ) -> Result<()> {
        let nodes = &self.nodes;
        let mut acc = |v: Var, delta: Array| {
            if !nodes[v.0].needs_grad {
                return;
            }
            match &mut grads[v.0] {
                Some(existing) => existing.add_assign(&delta),
                slot @ None => *slot = Some(delta),
            }
        };
        match &node.op {
            Op::Constant => {}
            Op::Param(name) => {
                if let Some(p) = params.get_mut(name) {
                    p.add_assign(g);
                }
            }
            Op::MatMulNt(a, w) => {
                let (av, wv) = (&nodes[a.0].value, &nodes[w.0].value);
                let (m, k, n) = (av.rows(), av.cols(), wv.shape()[0]);
                if nodes[a.0].needs_grad {
                    let mut da = vec![0.0; m * k];
                    gemm_acc(m, n, k, g.data(), false, wv.data(), false, &mut da);
                    acc(*a, Array::from_parts(av.shape().to_vec(), da));
                }
                if nodes[w.0].needs_grad {
                    let mut dw = vec![0.0; n * k];
                    gemm_acc(n, m, k, g.data(), true, av.data(), false, &mut dw);
                    acc(*w, Array::from_parts(wv.shape().to_vec(), dw));
                }
            }
            Op::AddBias(a, b) => {
                if nodes[b.0].needs_grad {
                    let c = g.cols();
                    let mut db = vec![0.0; c];
                    for row in g.data().chunks(c) {
                        for (d, x) in db.iter_mut().zip(row) {
                            *d += x;
                        }
                    }
                    acc(*b, Array::from_parts(vec![c], db));
                }
                acc(*a, g.clone());
            }
            Op::Add(a, b) => {
                acc(*a, g.clone());
                acc(*b, g.clone());
            }
            Op::Sub(a, b) => {
                acc(*a, g.clone());
                let mut neg = g.clone();
                neg.data_mut().iter_mut().for_each(|v| *v = -*v);
                acc(*b, neg);
            }
            Op::Relu(a) => {
                let mut d = g.clone();
                for (dv, y) in d.data_mut().iter_mut().zip(node.value.data()) {
                    if *y <= 0.0 {
                        *dv = 0.0;
                    }
                }
                acc(*a, d);
            }
            Op::Tanh(a) => {
                let mut d = g.clone();
                for (dv, y) in d.data_mut().iter_mut().zip(node.value.data()) {
                    *dv *= 1.0 - y * y;
                }
                acc(*a, d);
            }
            Op::Gather(a, idx) => {
                let av = &nodes[a.0].value;
                let c = av.cols();
                let mut d = vec![0.0; av.len()];
                for (r, &i) in idx.iter().enumerate() {
                    for (o, s) in d[i * c..(i + 1) * c].iter_mut().zip(g.row(r)) {
                        *o += s;
                    }
                }
                acc(*a, Array::from_parts(av.shape().to_vec(), d));
            }
            Op::ScatterAdd(a, idx) => {
                let av = &nodes[a.0].value;
                let c = av.cols();
                let mut d = Vec::with_capacity(av.len());
                for &i in idx.iter() {
                    d.extend_from_slice(g.row(i));
                }
                debug_assert_eq!(d.len(), idx.len() * c);
                acc(*a, Array::from_parts(av.shape().to_vec(), d));
            }
            Op::EdgeReluSum { a, b, e, src, dst } => {
                let (av, bv, ev) = (&nodes[a.0].value, &nodes[b.0].value, &nodes[e.0].value);
                let c = ev.cols();
                let mut da = vec![0.0; av.len()];
                let mut db = vec![0.0; bv.len()];
                let mut de = Vec::with_capacity(ev.len());
                for (r, (&s, &d)) in src.iter().zip(dst.iter()).enumerate() {
                    let (gd, ar, br) = (g.row(d), av.row(d), bv.row(s));
                    de.extend(
                        gd.iter()
                            .zip(ar.iter().zip(br))
                            .zip(ev.row(r))
                            .map(|((&gj, (x, y)), z)| if x + y + z > 0.0 { gj } else { 0.0 }),
                    );
                    let der = &de[r * c..(r + 1) * c];
                    for (o, v) in da[d * c..(d + 1) * c].iter_mut().zip(der) {
                        *o += v;
                    }
                    for (o, v) in db[s * c..(s + 1) * c].iter_mut().zip(der) {
                        *o += v;
                    }
                }
                acc(*a, Array::from_parts(av.shape().to_vec(), da));
                acc(*b, Array::from_parts(bv.shape().to_vec(), db));
                acc(*e, Array::from_parts(ev.shape().to_vec(), de));
            }
            Op::Concat(parts) => {
                let total = g.cols();
                let m = g.rows();
                let mut off = 0;
                for p in parts {
                    let pv = &nodes[p.0].value;
                    let w = pv.cols();
                    if nodes[p.0].needs_grad {
                        let mut d = Vec::with_capacity(m * w);
                        for r in 0..m {
                            d.extend_from_slice(&g.data()[r * total + off..r * total + off + w]);
                        }
                        acc(*p, Array::from_parts(pv.shape().to_vec(), d));
                    }
                    off += w;
                }
            }
            Op::SegmentSoftmax(s, seg) => {
                let y = node.value.data();
                let n_seg = seg.iter().copied().max().map_or(0, |m| m + 1);
                let mut dot = vec![0.0; n_seg];
                for ((yi, gi), &k) in y.iter().zip(g.data()).zip(seg.iter()) {
                    dot[k] += yi * gi;
                }
                let d: Vec<f64> = y
                    .iter()
                    .zip(g.data())
                    .zip(seg.iter())
                    .map(|((yi, gi), &k)| yi * (gi - dot[k]))
                    .collect();
                acc(*s, Array::from_parts(node.value.shape().to_vec(), d));
            }
            Op::MulRows(a, c) => {
                let (av, cv) = (&nodes[a.0].value, &nodes[c.0].value);
                let w = av.cols();
                if nodes[a.0].needs_grad {
                    let mut d = g.clone();
                    for (row, s) in d.data_mut().chunks_mut(w).zip(cv.data()) {
                        row.iter_mut().for_each(|v| *v *= s);
                    }
                    acc(*a, d);
                }
                if nodes[c.0].needs_grad {
                    let dc: Vec<f64> = g
                        .data()
                        .chunks(w)
                        .zip(av.data().chunks(w))
                        .map(|(gr, ar)| gr.iter().zip(ar).map(|(x, y)| x * y).sum())
                        .collect();
                    acc(*c, Array::from_parts(cv.shape().to_vec(), dc));
                }
            }
            Op::Outer(c, r) => {
                let (cv, rv) = (&nodes[c.0].value, &nodes[r.0].value);
                let n = rv.len();
                if nodes[c.0].needs_grad {
                    let dc: Vec<f64> = g
                        .data()
                        .chunks(n)
                        .map(|row| row.iter().zip(rv.data()).map(|(x, y)| x * y).sum())
                        .collect();
                    acc(*c, Array::from_parts(cv.shape().to_vec(), dc));
                }
                if nodes[r.0].needs_grad {
                    let mut dr = vec![0.0; n];
                    for (row, ci) in g.data().chunks(n).zip(cv.data()) {
                        for (d, x) in dr.iter_mut().zip(row) {
                            *d += x * ci;
                        }
                    }
                    acc(*r, Array::from_parts(rv.shape().to_vec(), dr));
                }
            }
            Op::Scale(a, s) => {
                let mut d = g.clone();
                d.data_mut().iter_mut().for_each(|v| *v *= s);
                acc(*a, d);
            }
            Op::Mse(a, b) => {
                let (av, bv) = (&nodes[a.0].value, &nodes[b.0].value);
                let k = 2.0 * g.item() / av.len() as f64;
                let d: Vec<f64> = av
                    .data()
                    .iter()
                    .zip(bv.data())
                    .map(|(x, y)| k * (x - y))
                    .collect();
                if nodes[b.0].needs_grad {
                    let neg = d.iter().map(|v| -v).collect();
                    acc(*b, Array::from_parts(bv.shape().to_vec(), neg));
                }
                acc(*a, Array::from_parts(av.shape().to_vec(), d));
            }
            Op::Sum(a) => {
                let av = &nodes[a.0].value;
                acc(*a, Array::filled(av.shape(), g.item()));
            }
            Op::Custom(inputs, rule) => {
                let ins: Vec<&Array> = inputs.iter().map(|v| &nodes[v.0].value).collect();
                let ds = rule.backward(&ins, &node.value, g);
                for (v, d) in inputs.iter().zip(ds) {
                    if d.shape() != nodes[v.0].value.shape() {
                        return Err(shape_err("custom backward", &nodes[v.0].value, &d));
                    }
                    acc(*v, d);
                }
            }
        }
        Ok(())
    }
}
