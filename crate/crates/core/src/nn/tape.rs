//! Reverse-mode automatic differentiation over small dense matrices.
//!
//! Each node holds a row-major `rows x cols` value. Rows are independent
//! samples (points along rays), columns are features. Nodes are appended
//! in evaluation order, so the node index is already a topological order
//! and the backward pass simply walks the tape in reverse.

use super::mlp::{Activation, Layer};
use crate::error::{Error, Result};
use crate::events::Thresholds;
use crate::radiance::composite_segment;
use crate::scalar::{sigmoid, softplus, Scalar};
use crate::training::loss::deadzone_term;

#[derive(Debug, Clone, PartialEq)]
pub struct Mat<T> {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<T>,
}

impl<T: Scalar> Mat<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape(format!("{} values for a {rows}x{cols} matrix", data.len())));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn scalar(v: T) -> Self {
        Self {
            rows: 1,
            cols: 1,
            data: vec![v],
        }
    }

    pub fn column(data: Vec<T>) -> Self {
        Self {
            rows: data.len(),
            cols: 1,
            data,
        }
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[T] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [T] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    fn same_shape(&self, other: &Self) -> bool {
        self.rows == other.rows && self.cols == other.cols
    }

    fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Location of a layer's parameters inside a [`ParamGrads`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerSlot {
    pub net: usize,
    pub layer: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrad<T> {
    pub weight: Vec<T>,
    pub bias: Vec<T>,
}

/// Parameter gradients, indexed `[net][layer]`. Backward passes add into it.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGrads<T> {
    pub nets: Vec<Vec<LayerGrad<T>>>,
}

impl<T: Scalar> ParamGrads<T> {
    pub fn for_layers<'a>(nets: impl IntoIterator<Item = &'a [Layer<T>]>) -> Self {
        Self {
            nets: nets
                .into_iter()
                .map(|layers| {
                    layers
                        .iter()
                        .map(|l| LayerGrad {
                            weight: vec![T::zero(); l.weight.len()],
                            bias: vec![T::zero(); l.bias.len()],
                        })
                        .collect()
                })
                .collect(),
        }
    }

    pub fn zero(&mut self) {
        for g in self.nets.iter_mut().flatten() {
            g.weight.iter_mut().for_each(|v| *v = T::zero());
            g.bias.iter_mut().for_each(|v| *v = T::zero());
        }
    }

    /// `self += other`, element by element in a fixed order.
    pub fn accumulate(&mut self, other: &Self) {
        for (a, b) in self.nets.iter_mut().flatten().zip(other.nets.iter().flatten()) {
            a.weight.iter_mut().zip(&b.weight).for_each(|(x, y)| *x += *y);
            a.bias.iter_mut().zip(&b.bias).for_each(|(x, y)| *x += *y);
        }
    }

    pub fn scale(&mut self, s: T) {
        for g in self.nets.iter_mut().flatten() {
            g.weight.iter_mut().for_each(|v| *v *= s);
            g.bias.iter_mut().for_each(|v| *v *= s);
        }
    }

    /// Flat views in the same order as `SceneModel::param_slices_mut`.
    pub fn slices(&self) -> Vec<&[T]> {
        self.nets
            .iter()
            .flatten()
            .flat_map(|g| [g.weight.as_slice(), g.bias.as_slice()])
            .collect()
    }

    pub fn all_finite(&self) -> bool {
        self.slices().iter().all(|s| s.iter().all(|v| v.is_finite()))
    }
}

enum Op<'a, T> {
    Input,
    Constant,
    Linear {
        x: NodeId,
        layer: &'a Layer<T>,
        slot: LayerSlot,
    },
    Act(NodeId, Activation),
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    AddConst(NodeId),
    Scale(NodeId, T),
    RowScale(NodeId, Vec<T>),
    Log(NodeId),
    Exp(NodeId),
    Sin(NodeId),
    Square(NodeId),
    Sum(NodeId),
    Concat(Vec<NodeId>),
    Column(NodeId, usize),
    Rows(NodeId, usize),
    PosEnc {
        x: NodeId,
        n_freq: usize,
        include_input: bool,
    },
    Composite {
        sigma: NodeId,
        color: NodeId,
        deltas: Vec<T>,
        segments: Vec<(usize, usize)>,
    },
    Deadzone {
        pred: NodeId,
        target: Vec<T>,
        thresholds: Thresholds<T>,
        scale: T,
    },
}

struct Node<'a, T> {
    op: Op<'a, T>,
    value: Mat<T>,
    requires_grad: bool,
}

impl<'a, T> Op<'a, T> {
    fn parents(&self) -> Vec<NodeId> {
        match self {
            Op::Input | Op::Constant => vec![],
            Op::Linear { x, .. } => vec![*x],
            Op::Act(a, _)
            | Op::AddConst(a)
            | Op::Scale(a, _)
            | Op::RowScale(a, _)
            | Op::Log(a)
            | Op::Exp(a)
            | Op::Sin(a)
            | Op::Square(a)
            | Op::Sum(a)
            | Op::Column(a, _)
            | Op::Rows(a, _)
            | Op::PosEnc { x: a, .. }
            | Op::Deadzone { pred: a, .. } => vec![*a],
            Op::Add(a, b) | Op::Sub(a, b) | Op::Mul(a, b) => vec![*a, *b],
            Op::Composite { sigma, color, .. } => vec![*sigma, *color],
            Op::Concat(parts) => parts.clone(),
        }
    }
}

/// Recording of one forward computation.
pub struct Tape<'a, T> {
    nodes: Vec<Node<'a, T>>,
}

/// Adjoints of every node after a backward pass. Unused nodes read zero.
pub struct Adjoints<T> {
    grads: Vec<Option<Mat<T>>>,
    shapes: Vec<(usize, usize)>,
}

impl<T: Scalar> Adjoints<T> {
    pub fn get(&self, id: NodeId) -> Mat<T> {
        match &self.grads[id.0] {
            Some(g) => g.clone(),
            None => {
                let (r, c) = self.shapes[id.0];
                Mat::zeros(r, c)
            }
        }
    }
}

impl<'a, T: Scalar> Default for Tape<'a, T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<'a, T: Scalar> Tape<'a, T> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Mat<T> {
        &self.nodes[id.0].value
    }

    fn push(&mut self, op: Op<'a, T>, value: Mat<T>) -> NodeId {
        let requires_grad = match op {
            Op::Input | Op::Linear { .. } => true,
            Op::Constant => false,
            _ => op.parents().iter().any(|p| self.nodes[p.0].requires_grad),
        };
        self.nodes.push(Node {
            op,
            value,
            requires_grad,
        });
        NodeId(self.nodes.len() - 1)
    }

    /// Leaf node. Gradients with respect to it are available from [`Adjoints`].
    pub fn input(&mut self, value: Mat<T>) -> NodeId {
        self.push(Op::Input, value)
    }

    /// Leaf that never receives gradients; backward skips work feeding it.
    pub fn constant(&mut self, value: Mat<T>) -> NodeId {
        self.push(Op::Constant, value)
    }

    pub fn scalar(&mut self, v: T) -> NodeId {
        self.input(Mat::scalar(v))
    }

    /// `x * W^T + b`, followed by the layer's activation.
    pub fn layer(&mut self, x: NodeId, layer: &'a Layer<T>, slot: LayerSlot) -> Result<NodeId> {
        let lin = self.linear(x, layer, slot)?;
        Ok(self.activation(lin, layer.activation))
    }

    pub fn linear(&mut self, x: NodeId, layer: &'a Layer<T>, slot: LayerSlot) -> Result<NodeId> {
        let xv = self.value(x);
        if xv.cols != layer.in_dim {
            return Err(Error::Shape(format!(
                "layer expects {} inputs, got {}",
                layer.in_dim, xv.cols
            )));
        }
        let (n, i, o) = (xv.rows, layer.in_dim, layer.out_dim);
        let mut out = Mat::zeros(n, o);
        for r in 0..n {
            out.row_mut(r).copy_from_slice(&layer.bias);
        }
        T::gemm(
            (n, i, o),
            T::one(),
            (&xv.data, (i, 1)),
            (&layer.weight, (1, i)),
            T::one(),
            (&mut out.data, (o, 1)),
        );
        Ok(self.push(Op::Linear { x, layer, slot }, out))
    }

    pub fn activation(&mut self, x: NodeId, kind: Activation) -> NodeId {
        if kind == Activation::Identity {
            return x;
        }
        let v = self.value(x).map(|v| kind.apply(v));
        self.push(Op::Act(x, kind), v)
    }

    fn binary(&mut self, a: NodeId, b: NodeId, what: &str, f: impl Fn(T, T) -> T) -> Result<Mat<T>> {
        let (av, bv) = (self.value(a), self.value(b));
        if !av.same_shape(bv) {
            return Err(Error::Shape(format!(
                "{what}: {}x{} vs {}x{}",
                av.rows, av.cols, bv.rows, bv.cols
            )));
        }
        Ok(Mat {
            rows: av.rows,
            cols: av.cols,
            data: av.data.iter().zip(&bv.data).map(|(&x, &y)| f(x, y)).collect(),
        })
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = self.binary(a, b, "add", |x, y| x + y)?;
        Ok(self.push(Op::Add(a, b), v))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = self.binary(a, b, "sub", |x, y| x - y)?;
        Ok(self.push(Op::Sub(a, b), v))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = self.binary(a, b, "mul", |x, y| x * y)?;
        Ok(self.push(Op::Mul(a, b), v))
    }

    pub fn add_const(&mut self, a: NodeId, c: T) -> NodeId {
        let v = self.value(a).map(|x| x + c);
        self.push(Op::AddConst(a), v)
    }

    pub fn scale(&mut self, a: NodeId, s: T) -> NodeId {
        let v = self.value(a).map(|x| x * s);
        self.push(Op::Scale(a, s), v)
    }

    /// Multiplies row `r` by `factors[r]`.
    pub fn row_scale(&mut self, a: NodeId, factors: Vec<T>) -> Result<NodeId> {
        let av = self.value(a);
        if factors.len() != av.rows {
            return Err(Error::Shape(format!("{} row factors for {} rows", factors.len(), av.rows)));
        }
        let mut v = av.clone();
        for (r, &f) in factors.iter().enumerate() {
            v.row_mut(r).iter_mut().for_each(|x| *x = *x * f);
        }
        Ok(self.push(Op::RowScale(a, factors), v))
    }

    pub fn ln(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).map(|x| x.ln());
        self.push(Op::Log(a), v)
    }

    pub fn exp(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).map(|x| x.exp());
        self.push(Op::Exp(a), v)
    }

    pub fn sin(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).map(|x| x.sin());
        self.push(Op::Sin(a), v)
    }

    pub fn square(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).map(|x| x * x);
        self.push(Op::Square(a), v)
    }

    /// Sum of all entries, as a 1x1 node.
    pub fn sum(&mut self, a: NodeId) -> NodeId {
        let s = self.value(a).data.iter().copied().sum();
        self.push(Op::Sum(a), Mat::scalar(s))
    }

    /// Column-wise concatenation of nodes with equal row counts.
    pub fn concat(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        let rows = parts
            .first()
            .map(|&p| self.value(p).rows)
            .ok_or_else(|| Error::Shape("concat of nothing".into()))?;
        if parts.iter().any(|&p| self.value(p).rows != rows) {
            return Err(Error::Shape("concat operands differ in rows".into()));
        }
        let cols: usize = parts.iter().map(|&p| self.value(p).cols).sum();
        let mut out = Mat::zeros(rows, cols);
        for r in 0..rows {
            let mut off = 0;
            for &p in parts {
                let src = self.value(p).row(r);
                out.data[r * cols + off..r * cols + off + src.len()].copy_from_slice(src);
                off += src.len();
            }
        }
        Ok(self.push(Op::Concat(parts.to_vec()), out))
    }

    pub fn column(&mut self, a: NodeId, col: usize) -> Result<NodeId> {
        let av = self.value(a);
        if col >= av.cols {
            return Err(Error::Shape(format!("column {col} of {}", av.cols)));
        }
        let data = (0..av.rows).map(|r| av.data[r * av.cols + col]).collect();
        Ok(self.push(Op::Column(a, col), Mat::column(data)))
    }

    /// Rows `start..start + count`.
    pub fn rows(&mut self, a: NodeId, start: usize, count: usize) -> Result<NodeId> {
        let av = self.value(a);
        if start + count > av.rows {
            return Err(Error::Shape(format!("rows {start}..{} of {}", start + count, av.rows)));
        }
        let data = av.data[start * av.cols..(start + count) * av.cols].to_vec();
        let v = Mat {
            rows: count,
            cols: av.cols,
            data,
        };
        Ok(self.push(Op::Rows(a, start), v))
    }

    /// Fourier-feature encoding of every row; see [`crate::nn::positional_encode`].
    pub fn positional_encode(&mut self, x: NodeId, n_freq: usize, include_input: bool) -> NodeId {
        let xv = self.value(x);
        let width = super::encoded_len(xv.cols, n_freq, include_input);
        let mut out = Mat::zeros(xv.rows, width);
        for r in 0..xv.rows {
            super::encode_into(xv.row(r), n_freq, include_input, out.row_mut(r));
        }
        self.push(
            Op::PosEnc {
                x,
                n_freq,
                include_input,
            },
            out,
        )
    }

    /// Volumetric compositing. `sigma` and `color` are `n x 1`; each
    /// `segments` entry `(start, len)` is one ray over rows
    /// `start..start + len` with sample spacings `deltas`. Output is
    /// `segments.len() x 1` intensities.
    pub fn composite(
        &mut self,
        sigma: NodeId,
        color: NodeId,
        deltas: Vec<T>,
        segments: Vec<(usize, usize)>,
    ) -> Result<NodeId> {
        let (sv, cv) = (self.value(sigma), self.value(color));
        if sv.cols != 1 || cv.cols != 1 || sv.rows != cv.rows || deltas.len() != sv.rows {
            return Err(Error::Shape("composite expects matching n x 1 inputs".into()));
        }
        if segments.iter().any(|&(s, l)| s + l > sv.rows) {
            return Err(Error::Shape("composite segment out of range".into()));
        }
        let mut out = Vec::with_capacity(segments.len());
        for &(s, l) in &segments {
            let c = composite_segment(&sv.data[s..s + l], &cv.data[s..s + l], &deltas[s..s + l])?;
            out.push(c);
        }
        Ok(self.push(
            Op::Composite {
                sigma,
                color,
                deltas,
                segments,
            },
            Mat::column(out),
        ))
    }

    /// Mean-style dead-zone event loss: `scale * sum_i term(pred_i, target_i)`.
    pub fn deadzone(
        &mut self,
        pred: NodeId,
        target: Vec<T>,
        thresholds: Thresholds<T>,
        scale: T,
    ) -> Result<NodeId> {
        let pv = self.value(pred);
        if pv.cols != 1 || pv.rows != target.len() {
            return Err(Error::Shape("dead-zone loss expects n x 1 predictions".into()));
        }
        let mut s = T::zero();
        for (&p, &y) in pv.data.iter().zip(&target) {
            s += deadzone_term(p, y, &thresholds).0;
        }
        Ok(self.push(
            Op::Deadzone {
                pred,
                target,
                thresholds,
                scale,
            },
            Mat::scalar(s * scale),
        ))
    }

    /// Propagates from a 1x1 `root`, adding parameter gradients into `grads`.
    pub fn backward(&self, root: NodeId, grads: &mut ParamGrads<T>) -> Result<Adjoints<T>> {
        let rv = self.value(root);
        if rv.rows != 1 || rv.cols != 1 {
            return Err(Error::Shape(format!(
                "backward needs a scalar root, got {}x{}",
                rv.rows, rv.cols
            )));
        }
        self.backward_seeded(root, Mat::scalar(T::one()), grads)
    }

    /// Backward pass with an explicit output adjoint.
    pub fn backward_seeded(&self, root: NodeId, seed: Mat<T>, grads: &mut ParamGrads<T>) -> Result<Adjoints<T>> {
        if !seed.same_shape(self.value(root)) {
            return Err(Error::Shape("seed shape differs from root".into()));
        }
        let mut adj: Vec<Option<Mat<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        adj[root.0] = Some(seed);
        for i in (0..=root.0).rev() {
            if !self.nodes[i].requires_grad {
                continue;
            }
            let Some(g) = adj[i].take() else { continue };
            self.propagate(i, &g, &mut adj, grads);
            adj[i] = Some(g);
        }
        Ok(Adjoints {
            grads: adj,
            shapes: self.nodes.iter().map(|n| (n.value.rows, n.value.cols)).collect(),
        })
    }

    fn propagate(&self, i: usize, g: &Mat<T>, adj: &mut [Option<Mat<T>>], grads: &mut ParamGrads<T>) {
        let node = &self.nodes[i];
        let val = |id: NodeId| &self.nodes[id.0].value;
        let accumulate = |adj: &mut [Option<Mat<T>>], id: NodeId, d: Mat<T>| {
            if self.nodes[id.0].requires_grad {
                accumulate(adj, id, d);
            }
        };
        match &node.op {
            Op::Input | Op::Constant => {}
            Op::Linear { x, layer, slot } => {
                let xv = val(*x);
                let lg = &mut grads.nets[slot.net][slot.layer];
                let need_dx = self.nodes[x.0].requires_grad;
                let (n, i, o) = (xv.rows, layer.in_dim, layer.out_dim);
                for r in 0..n {
                    for (b, &go) in lg.bias.iter_mut().zip(g.row(r)) {
                        *b += go;
                    }
                }
                T::gemm(
                    (o, n, i),
                    T::one(),
                    (&g.data, (1, o)),
                    (&xv.data, (i, 1)),
                    T::one(),
                    (&mut lg.weight, (i, 1)),
                );
                if need_dx {
                    let mut dx = Mat::zeros(n, i);
                    T::gemm(
                        (n, o, i),
                        T::one(),
                        (&g.data, (o, 1)),
                        (&layer.weight, (i, 1)),
                        T::zero(),
                        (&mut dx.data, (i, 1)),
                    );
                    accumulate(adj, *x, dx);
                }
            }
            Op::Act(x, kind) => {
                let (xv, yv) = (val(*x), &node.value);
                let d = Mat {
                    rows: g.rows,
                    cols: g.cols,
                    data: g
                        .data
                        .iter()
                        .zip(xv.data.iter().zip(&yv.data))
                        .map(|(&gi, (&xi, &yi))| gi * kind.derivative(xi, yi))
                        .collect(),
                };
                accumulate(adj, *x, d);
            }
            Op::Add(a, b) => {
                accumulate(adj, *a, g.clone());
                accumulate(adj, *b, g.clone());
            }
            Op::Sub(a, b) => {
                accumulate(adj, *a, g.clone());
                accumulate(adj, *b, g.map(|v| -v));
            }
            Op::Mul(a, b) => {
                let (av, bv) = (val(*a), val(*b));
                accumulate(adj, *a, zip_mat(g, bv, |gi, bi| gi * bi));
                accumulate(adj, *b, zip_mat(g, av, |gi, ai| gi * ai));
            }
            Op::AddConst(a) => accumulate(adj, *a, g.clone()),
            Op::Scale(a, s) => {
                let s = *s;
                accumulate(adj, *a, g.map(|v| v * s));
            }
            Op::RowScale(a, f) => {
                let mut d = g.clone();
                for (r, &fr) in f.iter().enumerate() {
                    d.row_mut(r).iter_mut().for_each(|v| *v = *v * fr);
                }
                accumulate(adj, *a, d);
            }
            Op::Log(a) => accumulate(adj, *a, zip_mat(g, val(*a), |gi, ai| gi / ai)),
            Op::Exp(a) => accumulate(adj, *a, zip_mat(g, &node.value, |gi, yi| gi * yi)),
            Op::Sin(a) => accumulate(adj, *a, zip_mat(g, val(*a), |gi, ai| gi * ai.cos())),
            Op::Square(a) => accumulate(adj, *a, zip_mat(g, val(*a), |gi, ai| gi * (ai + ai))),
            Op::Sum(a) => {
                let av = val(*a);
                let s = g.data[0];
                accumulate(adj, *a, Mat {
                    rows: av.rows,
                    cols: av.cols,
                    data: vec![s; av.data.len()],
                });
            }
            Op::Concat(parts) => {
                let mut off = 0;
                for &p in parts {
                    let pv = val(p);
                    let mut d = Mat::zeros(pv.rows, pv.cols);
                    for r in 0..pv.rows {
                        d.row_mut(r).copy_from_slice(&g.row(r)[off..off + pv.cols]);
                    }
                    off += pv.cols;
                    accumulate(adj, p, d);
                }
            }
            Op::Column(a, col) => {
                let av = val(*a);
                let mut d = Mat::zeros(av.rows, av.cols);
                for r in 0..av.rows {
                    d.data[r * av.cols + col] = g.data[r];
                }
                accumulate(adj, *a, d);
            }
            Op::Rows(a, start) => {
                let av = val(*a);
                let mut d = Mat::zeros(av.rows, av.cols);
                d.data[start * av.cols..start * av.cols + g.data.len()].copy_from_slice(&g.data);
                accumulate(adj, *a, d);
            }
            Op::PosEnc {
                x,
                n_freq,
                include_input,
            } => {
                let xv = val(*x);
                let y = &node.value;
                let dim = xv.cols;
                let mut d = Mat::zeros(xv.rows, dim);
                for r in 0..xv.rows {
                    let (gr, yr) = (g.row(r), y.row(r));
                    let dr = d.row_mut(r);
                    let mut off = 0;
                    if *include_input {
                        for j in 0..dim {
                            dr[j] += gr[j];
                        }
                        off = dim;
                    }
                    let mut freq = T::lit(std::f64::consts::PI);
                    for _ in 0..*n_freq {
                        for j in 0..dim {
                            let (s, c) = (yr[off + j], yr[off + dim + j]);
                            dr[j] += freq * (gr[off + j] * c - gr[off + dim + j] * s);
                        }
                        off += 2 * dim;
                        freq = freq + freq;
                    }
                }
                accumulate(adj, *x, d);
            }
            Op::Composite {
                sigma,
                color,
                deltas,
                segments,
            } => {
                let (sv, cv) = (val(*sigma), val(*color));
                let mut ds = Mat::zeros(sv.rows, 1);
                let mut dc = Mat::zeros(cv.rows, 1);
                for (k, &(s, l)) in segments.iter().enumerate() {
                    let gk = g.data[k];
                    if gk.is_zero() {
                        continue;
                    }
                    composite_segment_backward(
                        &sv.data[s..s + l],
                        &cv.data[s..s + l],
                        &deltas[s..s + l],
                        gk,
                        &mut ds.data[s..s + l],
                        &mut dc.data[s..s + l],
                    );
                }
                accumulate(adj, *sigma, ds);
                accumulate(adj, *color, dc);
            }
            Op::Deadzone {
                pred,
                target,
                thresholds,
                scale,
            } => {
                let pv = val(*pred);
                let k = g.data[0] * *scale;
                let data = pv
                    .data
                    .iter()
                    .zip(target)
                    .map(|(&p, &y)| k * deadzone_term(p, y, thresholds).1)
                    .collect();
                accumulate(adj, *pred, Mat::column(data));
            }
        }
    }
}

fn zip_mat<T: Scalar>(a: &Mat<T>, b: &Mat<T>, f: impl Fn(T, T) -> T) -> Mat<T> {
    Mat {
        rows: a.rows,
        cols: a.cols,
        data: a.data.iter().zip(&b.data).map(|(&x, &y)| f(x, y)).collect(),
    }
}

fn accumulate<T: Scalar>(adj: &mut [Option<Mat<T>>], id: NodeId, d: Mat<T>) {
    match &mut adj[id.0] {
        Some(existing) => existing.data.iter_mut().zip(&d.data).for_each(|(a, b)| *a += *b),
        slot @ None => *slot = Some(d),
    }
}

/// Adjoint of one composited ray. With `e_i = exp(-sigma_i delta_i)`,
/// `T_{i+1} = T_i e_i` and `w_i = T_i - T_{i+1}`:
/// `dC/dc_i = w_i`, `dC/dsigma_i = delta_i (T_{i+1} c_i - sum_{j>i} w_j c_j)`.
fn composite_segment_backward<T: Scalar>(
    sigma: &[T],
    color: &[T],
    deltas: &[T],
    g: T,
    dsigma: &mut [T],
    dcolor: &mut [T],
) {
    let n = sigma.len();
    let mut trans = vec![T::one(); n + 1];
    for i in 0..n {
        trans[i + 1] = trans[i] * (-(sigma[i] * deltas[i])).exp();
    }
    let mut suffix = T::zero();
    for i in (0..n).rev() {
        let w = trans[i] - trans[i + 1];
        dcolor[i] += g * w;
        dsigma[i] += g * deltas[i] * (trans[i + 1] * color[i] - suffix);
        suffix += w * color[i];
    }
}

impl Activation {
    #[inline]
    pub fn apply<T: Scalar>(self, x: T) -> T {
        match self {
            Activation::Identity => x,
            Activation::Relu => x.max(T::zero()),
            Activation::Softplus => softplus(x),
            Activation::Sigmoid => sigmoid(x),
        }
    }

    /// Derivative given input `x` and output `y`.
    #[inline]
    fn derivative<T: Scalar>(self, x: T, y: T) -> T {
        match self {
            Activation::Identity => T::one(),
            Activation::Relu => {
                if x > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
            Activation::Softplus => sigmoid(x),
            Activation::Sigmoid => y * (T::one() - y),
        }
    }
}
