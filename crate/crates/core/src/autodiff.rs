//! A small reverse-mode gradient tape.
//!
//! Only the operations needed by the reconstruction, graph and clustering
//! losses are provided. A [`Tape`] is built per optimization step: parameter
//! values are copied in from a [`ParamStore`], the forward pass records one
//! node per op, and [`Tape::backward`] accumulates `d loss / d param` into the
//! store's gradient buffers. Accumulators are only cleared by
//! [`ParamStore::zero_grad`].

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::graph::Laplacian;
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Trainable matrices with their gradient accumulators.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    values: Vec<Matrix>,
    grads: Vec<Matrix>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, value: Matrix) -> ParamId {
        self.grads.push(Matrix::zeros(value.rows(), value.cols()));
        self.values.push(value);
        ParamId(self.values.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.values.len()).map(ParamId)
    }

    pub fn value(&self, id: ParamId) -> &Matrix {
        &self.values[id.0]
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Matrix {
        &mut self.values[id.0]
    }

    pub fn grad(&self, id: ParamId) -> &Matrix {
        &self.grads[id.0]
    }

    pub fn values(&self) -> &[Matrix] {
        &self.values
    }

    pub fn grads(&self) -> &[Matrix] {
        &self.grads
    }

    /// Values and gradients, for optimizers.
    pub fn split_mut(&mut self) -> (&mut [Matrix], &[Matrix]) {
        (&mut self.values, &self.grads)
    }

    pub fn zero_grad(&mut self) {
        self.grads.iter_mut().for_each(|g| g.fill(0.0));
    }
}

/// Handle to a node recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

enum Op<'a> {
    Input,
    Param(ParamId),
    Affine { x: Var, w: Var, b: Var },
    Relu(Var),
    MaskedSqError { x: Var, target: Matrix, mask: Vec<f64> },
    LaplacianTrace { h: Var, lap: &'a Laplacian },
    MeanFuse { hs: Vec<Var>, weights: Vec<Vec<f64>>, denom: Vec<f64> },
    Combine(Vec<(Var, f64)>),
}

struct Node<'a> {
    value: Matrix,
    op: Op<'a>,
}

/// Gradients of a scalar with respect to every recorded node.
pub struct Gradients {
    grads: Vec<Option<Matrix>>,
}

impl Gradients {
    /// `None` when the node does not influence the loss.
    pub fn get(&self, var: Var) -> Option<&Matrix> {
        self.grads[var.0].as_ref()
    }
}

#[derive(Default)]
pub struct Tape<'a> {
    nodes: Vec<Node<'a>>,
}

impl<'a> Tape<'a> {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn value(&self, var: Var) -> &Matrix {
        &self.nodes[var.0].value
    }

    /// Value of a 1x1 node.
    pub fn scalar(&self, var: Var) -> f64 {
        self.value(var)[(0, 0)]
    }

    fn push(&mut self, value: Matrix, op: Op<'a>) -> Result<Var> {
        value.ensure_finite("op output")?;
        self.nodes.push(Node { value, op });
        Ok(Var(self.nodes.len() - 1))
    }

    /// A constant leaf.
    pub fn input(&mut self, value: Matrix) -> Result<Var> {
        self.push(value, Op::Input)
    }

    /// A leaf whose gradient flows back into `store` on [`Tape::backward`].
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Result<Var> {
        self.push(store.value(id).clone(), Op::Param(id))
    }

    /// `x * wt + b` where `x` is `batch x in`, `wt` is `in x out` and `b` is `1 x out`.
    pub fn affine(&mut self, x: Var, wt: Var, b: Var) -> Result<Var> {
        let (xv, wv, bv) = (self.value(x), self.value(wt), self.value(b));
        if bv.shape() != (1, wv.cols()) {
            return Err(Error::dim(format!(
                "bias is {}x{}, expected 1x{}",
                bv.rows(),
                bv.cols(),
                wv.cols()
            )));
        }
        let mut out = xv.matmul(wv)?;
        let bias = bv.row(0);
        for i in 0..out.rows() {
            for (o, &bb) in out.row_mut(i).iter_mut().zip(bias) {
                *o += bb;
            }
        }
        self.push(out, Op::Affine { x, w: wt, b })
    }

    pub fn relu(&mut self, x: Var) -> Result<Var> {
        let out = self.value(x).map(|v| if v > 0.0 { v } else { 0.0 });
        self.push(out, Op::Relu(x))
    }

    /// `sum_i mask_i * ||x_i - target_i||^2` over rows; `mask` has one entry per row.
    pub fn masked_sq_error(&mut self, x: Var, target: Matrix, mask: Vec<f64>) -> Result<Var> {
        let xv = self.value(x);
        target.ensure_shape(xv.rows(), xv.cols(), "target")?;
        target.ensure_finite("target")?;
        if mask.len() != xv.rows() {
            return Err(Error::dim(format!("mask has {} entries for {} rows", mask.len(), xv.rows())));
        }
        let mut total = 0.0;
        for (i, &m) in mask.iter().enumerate() {
            if m != 0.0 {
                total += m * crate::matrix::sq_dist(xv.row(i), target.row(i));
            }
        }
        self.push(Matrix::filled(1, 1, total), Op::MaskedSqError { x, target, mask })
    }

    /// `Tr(h^T L h)` for codes `h` (one row per node of `lap`).
    pub fn laplacian_trace(&mut self, h: Var, lap: &'a Laplacian) -> Result<Var> {
        let hv = self.value(h);
        if hv.rows() != lap.len() {
            return Err(Error::dim(format!(
                "laplacian over {} nodes applied to {} rows",
                lap.len(),
                hv.rows()
            )));
        }
        let total = lap.quadratic_form(hv);
        self.push(Matrix::filled(1, 1, total), Op::LaplacianTrace { h, lap })
    }

    /// Row-wise weighted mean of same-shaped inputs; `weights[v][i]` weighs
    /// row `i` of `hs[v]`. Every row needs a positive total weight.
    pub fn mean_fuse(&mut self, hs: &[Var], weights: Vec<Vec<f64>>) -> Result<Var> {
        let first = hs.first().ok_or_else(|| Error::Contract("mean_fuse needs at least one input".into()))?;
        let (rows, cols) = self.value(*first).shape();
        if weights.len() != hs.len() {
            return Err(Error::dim("one weight vector per fused input is required"));
        }
        let mut denom = vec![0.0; rows];
        for (&h, w) in hs.iter().zip(&weights) {
            self.value(h).ensure_shape(rows, cols, "fused input")?;
            if w.len() != rows {
                return Err(Error::dim(format!("fusion weights have {} entries for {} rows", w.len(), rows)));
            }
            for (d, &wi) in denom.iter_mut().zip(w) {
                *d += wi;
            }
        }
        if let Some(i) = denom.iter().position(|&d| d <= 0.0) {
            return Err(Error::Contract(format!("row {} has no available input to fuse", i)));
        }
        let mut out = Matrix::zeros(rows, cols);
        for (&h, w) in hs.iter().zip(&weights) {
            let hv = self.value(h);
            for i in 0..rows {
                if w[i] == 0.0 {
                    continue;
                }
                let c = w[i] / denom[i];
                for (o, &x) in out.row_mut(i).iter_mut().zip(hv.row(i)) {
                    *o += c * x;
                }
            }
        }
        self.push(out, Op::MeanFuse { hs: hs.to_vec(), weights, denom })
    }

    /// `sum_k c_k * s_k` over 1x1 nodes.
    pub fn combine(&mut self, terms: &[(Var, f64)]) -> Result<Var> {
        let mut total = 0.0;
        for &(s, c) in terms {
            self.value(s).ensure_shape(1, 1, "combined term")?;
            total += c * self.scalar(s);
        }
        self.push(Matrix::filled(1, 1, total), Op::Combine(terms.to_vec()))
    }

    /// Reverse pass from a 1x1 `loss`, returning gradients for every node.
    pub fn gradients(&self, loss: Var) -> Result<Gradients> {
        let lv = self.value(loss);
        if lv.shape() != (1, 1) {
            return Err(Error::Contract(format!(
                "backward needs a scalar loss, got {}x{}",
                lv.rows(),
                lv.cols()
            )));
        }
        let mut grads: Vec<Option<Matrix>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Matrix::filled(1, 1, 1.0));

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            match &node.op {
                Op::Input | Op::Param(_) => {}
                Op::Affine { x, w, b } => {
                    let wv = self.value(*w);
                    let xv = self.value(*x);
                    accumulate(&mut grads, *x, g.matmul_t(wv)?);
                    accumulate(&mut grads, *w, xv.t_matmul(&g)?);
                    let mut db = Matrix::zeros(1, g.cols());
                    for i in 0..g.rows() {
                        for (d, &v) in db.row_mut(0).iter_mut().zip(g.row(i)) {
                            *d += v;
                        }
                    }
                    accumulate(&mut grads, *b, db);
                }
                Op::Relu(x) => {
                    let xv = self.value(*x);
                    let dx = g.zip_map(xv, |gv, xv| if xv > 0.0 { gv } else { 0.0 })?;
                    accumulate(&mut grads, *x, dx);
                }
                Op::MaskedSqError { x, target, mask } => {
                    let s = g[(0, 0)];
                    let xv = self.value(*x);
                    let mut dx = Matrix::zeros(xv.rows(), xv.cols());
                    for (i, &m) in mask.iter().enumerate() {
                        if m == 0.0 {
                            continue;
                        }
                        let c = 2.0 * m * s;
                        for ((d, &a), &t) in dx.row_mut(i).iter_mut().zip(xv.row(i)).zip(target.row(i)) {
                            *d = c * (a - t);
                        }
                    }
                    accumulate(&mut grads, *x, dx);
                }
                Op::LaplacianTrace { h, lap } => {
                    let s = g[(0, 0)];
                    let mut dh = lap.apply(self.value(*h));
                    dh.as_mut_slice().iter_mut().for_each(|v| *v *= 2.0 * s);
                    accumulate(&mut grads, *h, dh);
                }
                Op::MeanFuse { hs, weights, denom } => {
                    for (&h, w) in hs.iter().zip(weights) {
                        let mut dh = Matrix::zeros(g.rows(), g.cols());
                        for i in 0..g.rows() {
                            if w[i] == 0.0 {
                                continue;
                            }
                            let c = w[i] / denom[i];
                            for (d, &gv) in dh.row_mut(i).iter_mut().zip(g.row(i)) {
                                *d = c * gv;
                            }
                        }
                        accumulate(&mut grads, h, dh);
                    }
                }
                Op::Combine(terms) => {
                    let s = g[(0, 0)];
                    for &(t, c) in terms {
                        accumulate(&mut grads, t, Matrix::filled(1, 1, c * s));
                    }
                }
            }
            grads[idx] = Some(g);
        }
        Ok(Gradients { grads })
    }

    /// Reverse pass from `loss`, adding each parameter's gradient into `store`.
    pub fn backward(&self, loss: Var, store: &mut ParamStore) -> Result<()> {
        let grads = self.gradients(loss)?;
        for (node, g) in self.nodes.iter().zip(&grads.grads) {
            if let (Op::Param(id), Some(g)) = (&node.op, g) {
                store.grads[id.0].add_scaled(g, 1.0);
            }
        }
        Ok(())
    }
}

fn accumulate(grads: &mut [Option<Matrix>], var: Var, g: Matrix) {
    match &mut grads[var.0] {
        Some(existing) => existing.add_scaled(&g, 1.0),
        slot @ None => *slot = Some(g),
    }
}
