//! Reverse-mode differentiation over dense matrices.
//!
//! Every forward op appends a node to the [`Tape`]; [`Tape::backward`] walks the
//! nodes in reverse insertion order, which is a valid reverse topological order.

use crate::error::{Error, Result};

use super::Tensor;

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    AddRow(Var, Var),
    ScaleRows(Var, Vec<f64>),
    ConcatCols(Vec<Var>),
    SliceRows(Var, usize),
    Relu(Var),
    LeakyRelu(Var, f64),
    Elu(Var),
    Sigmoid(Var),
    Tanh(Var),
    RowSoftmax(Var),
    MaskedRowSoftmax(Var),
    SumRows(Var),
    MeanRows(Var),
    Transpose(Var),
    FrobeniusNorm(Var),
    SumAll(Var),
    RowEntropyMean(Var),
    CrossEntropy(Var, Vec<usize>),
    NormalizeAdjacency(Var),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    requires_grad: bool,
    op: Op,
}

/// Gradients produced by one backward pass, indexed by [`Var`].
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    /// `None` when the variable does not require a gradient or did not reach the loss.
    pub fn get(&self, var: Var) -> Option<&Tensor> {
        self.grads.get(var.0).and_then(Option::as_ref)
    }

    pub fn take(&mut self, var: Var) -> Option<Tensor> {
        self.grads.get_mut(var.0).and_then(Option::take)
    }
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    consumed: bool,
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

    /// Records a trainable input.
    pub fn param(&mut self, value: Tensor) -> Var {
        self.leaf(value, true)
    }

    /// Records an input that never receives a gradient.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.leaf(value, false)
    }

    pub fn leaf(&mut self, value: Tensor, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            requires_grad,
            op: Op::Leaf,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, var: Var) -> &Tensor {
        &self.nodes[var.0].value
    }

    pub fn shape(&self, var: Var) -> (usize, usize) {
        self.nodes[var.0].value.shape()
    }

    pub fn requires_grad(&self, var: Var) -> bool {
        self.nodes[var.0].requires_grad
    }

    fn push(&mut self, name: &'static str, value: Tensor, inputs: &[Var], op: Op) -> Result<Var> {
        if !value.is_finite() {
            return Err(Error::Numeric(name.to_string()));
        }
        let requires_grad = inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        self.nodes.push(Node {
            value,
            requires_grad,
            op,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa != sb {
            return Err(Error::shape(op, sa, sb));
        }
        Ok(())
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).matmul(self.value(b))?;
        self.push("matmul", value, &[a, b], Op::MatMul(a, b))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).add(self.value(b))?;
        self.push("add", value, &[a, b], Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).sub(self.value(b))?;
        self.push("sub", value, &[a, b], Op::Sub(a, b))
    }

    /// Element-wise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("mul", a, b)?;
        let value = self.value(a).zip_map(self.value(b), |x, y| x * y);
        self.push("mul", value, &[a, b], Op::Mul(a, b))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Result<Var> {
        let value = self.value(a).scale(s);
        self.push("scale", value, &[a], Op::Scale(a, s))
    }

    /// Adds the `1×d` row `b` to every row of the `n×d` matrix `a`.
    pub fn add_row(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sb.0 != 1 || sb.1 != sa.1 {
            return Err(Error::shape("add_row", sa, sb));
        }
        let mut value = self.value(a).clone();
        let bias = self.value(b).data().to_vec();
        for r in 0..sa.0 {
            for (v, b) in value.row_mut(r).iter_mut().zip(&bias) {
                *v += b;
            }
        }
        self.push("add_row", value, &[a, b], Op::AddRow(a, b))
    }

    /// Multiplies row `i` of `a` by the constant `factors[i]`.
    pub fn scale_rows(&mut self, a: Var, factors: Vec<f64>) -> Result<Var> {
        let sa = self.shape(a);
        if factors.len() != sa.0 {
            return Err(Error::shape("scale_rows", sa, (factors.len(), 1)));
        }
        let mut value = self.value(a).clone();
        for (r, &f) in factors.iter().enumerate() {
            value.row_mut(r).iter_mut().for_each(|v| *v *= f);
        }
        self.push("scale_rows", value, &[a], Op::ScaleRows(a, factors))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let first = *parts
            .first()
            .ok_or_else(|| Error::Argument("concat_cols of nothing".into()))?;
        let rows = self.shape(first).0;
        for &p in parts {
            if self.shape(p).0 != rows {
                return Err(Error::shape("concat_cols", self.shape(first), self.shape(p)));
            }
        }
        let cols: usize = parts.iter().map(|&p| self.shape(p).1).sum();
        let mut value = Tensor::zeros(rows, cols);
        for r in 0..rows {
            let mut offset = 0;
            for &p in parts {
                let src = self.value(p).row(r);
                value.row_mut(r)[offset..offset + src.len()].copy_from_slice(src);
                offset += src.len();
            }
        }
        self.push("concat_cols", value, parts, Op::ConcatCols(parts.to_vec()))
    }

    /// Rows `start..start + len` of `a`.
    pub fn slice_rows(&mut self, a: Var, start: usize, len: usize) -> Result<Var> {
        let sa = self.shape(a);
        if start + len > sa.0 {
            return Err(Error::shape("slice_rows", sa, (start + len, sa.1)));
        }
        let src = self.value(a);
        let value = Tensor::new(
            len,
            sa.1,
            src.data()[start * sa.1..(start + len) * sa.1].to_vec(),
        )?;
        self.push("slice_rows", value, &[a], Op::SliceRows(a, start))
    }

    pub fn relu(&mut self, a: Var) -> Result<Var> {
        let value = self.value(a).map(|x| x.max(0.0));
        self.push("relu", value, &[a], Op::Relu(a))
    }

    pub fn leaky_relu(&mut self, a: Var, slope: f64) -> Result<Var> {
        let value = self.value(a).map(|x| if x > 0.0 { x } else { slope * x });
        self.push("leaky_relu", value, &[a], Op::LeakyRelu(a, slope))
    }

    pub fn elu(&mut self, a: Var) -> Result<Var> {
        let value = self.value(a).map(|x| if x > 0.0 { x } else { x.exp_m1() });
        self.push("elu", value, &[a], Op::Elu(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        let value = self.value(a).map(|x| {
            if x >= 0.0 {
                1.0 / (1.0 + (-x).exp())
            } else {
                let e = x.exp();
                e / (1.0 + e)
            }
        });
        self.push("sigmoid", value, &[a], Op::Sigmoid(a))
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var> {
        let value = self.value(a).map(f64::tanh);
        self.push("tanh", value, &[a], Op::Tanh(a))
    }

    pub fn row_softmax(&mut self, a: Var) -> Result<Var> {
        let value = softmax_rows(self.value(a), None);
        self.push("row_softmax", value, &[a], Op::RowSoftmax(a))
    }

    /// Row softmax restricted to entries where `mask` is non-zero; masked entries are exactly 0.
    ///
    /// Every row must keep at least one entry.
    pub fn masked_row_softmax(&mut self, a: Var, mask: &Tensor) -> Result<Var> {
        let sa = self.shape(a);
        if mask.shape() != sa {
            return Err(Error::shape("masked_row_softmax", sa, mask.shape()));
        }
        for r in 0..sa.0 {
            if mask.row(r).iter().all(|&m| m == 0.0) {
                return Err(Error::Argument(format!(
                    "masked_row_softmax: row {r} has no unmasked entry"
                )));
            }
        }
        let value = softmax_rows(self.value(a), Some(mask));
        self.push("masked_row_softmax", value, &[a], Op::MaskedRowSoftmax(a))
    }

    /// Column sums as a `1×cols` row.
    pub fn reduce_sum_rows(&mut self, a: Var) -> Result<Var> {
        let value = column_sums(self.value(a));
        self.push("reduce_sum_rows", value, &[a], Op::SumRows(a))
    }

    /// Column means as a `1×cols` row.
    pub fn reduce_mean_rows(&mut self, a: Var) -> Result<Var> {
        let rows = self.shape(a).0;
        if rows == 0 {
            return Err(Error::Argument("reduce_mean_rows of an empty matrix".into()));
        }
        let value = column_sums(self.value(a)).scale(1.0 / rows as f64);
        self.push("reduce_mean_rows", value, &[a], Op::MeanRows(a))
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let value = self.value(a).transpose();
        self.push("transpose", value, &[a], Op::Transpose(a))
    }

    pub fn frobenius_norm(&mut self, a: Var) -> Result<Var> {
        let norm = self.value(a).data().iter().map(|v| v * v).sum::<f64>().sqrt();
        self.push("frobenius_norm", Tensor::scalar(norm), &[a], Op::FrobeniusNorm(a))
    }

    /// Sum of every entry, as a `1×1` tensor.
    pub fn sum(&mut self, a: Var) -> Result<Var> {
        let total = self.value(a).sum();
        self.push("sum", Tensor::scalar(total), &[a], Op::SumAll(a))
    }

    /// Mean Shannon entropy (natural log) of the rows of a row-stochastic matrix.
    ///
    /// Zero entries contribute nothing (`0 ln 0 = 0`).
    pub fn row_entropy_mean(&mut self, a: Var) -> Result<Var> {
        let t = self.value(a);
        if t.rows() == 0 {
            return Err(Error::Argument("row_entropy_mean of an empty matrix".into()));
        }
        let total: f64 = t
            .data()
            .iter()
            .filter(|&&p| p > 0.0)
            .map(|&p| -p * p.ln())
            .sum();
        let value = Tensor::scalar(total / t.rows() as f64);
        self.push("row_entropy_mean", value, &[a], Op::RowEntropyMean(a))
    }

    /// Mean negative log-likelihood of `labels` under the row softmax of `logits`.
    pub fn cross_entropy(&mut self, logits: Var, labels: &[usize]) -> Result<Var> {
        let t = self.value(logits);
        if labels.is_empty() || t.rows() == 0 {
            return Err(Error::Argument("cross_entropy on an empty batch".into()));
        }
        if labels.len() != t.rows() {
            return Err(Error::shape("cross_entropy", t.shape(), (labels.len(), 1)));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= t.cols()) {
            return Err(Error::Argument(format!(
                "label {bad} out of range for {} classes",
                t.cols()
            )));
        }
        let mut total = 0.0;
        for (r, &label) in labels.iter().enumerate() {
            let row = t.row(r);
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let log_z = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            total += log_z - row[label];
        }
        let value = Tensor::scalar(total / labels.len() as f64);
        self.push(
            "cross_entropy",
            value,
            &[logits],
            Op::CrossEntropy(logits, labels.to_vec()),
        )
    }

    /// `D^{-1/2} (A + I) D^{-1/2}` with `D` the row sums of `A + I`.
    ///
    /// Differentiable counterpart of [`crate::layers::normalize_adjacency`] for
    /// coarsened adjacencies that depend on learned assignments.
    pub fn normalize_adjacency(&mut self, a: Var) -> Result<Var> {
        let t = self.value(a);
        if t.rows() != t.cols() {
            return Err(Error::shape("normalize_adjacency", t.shape(), t.shape()));
        }
        let value = sym_normalize(t)?;
        self.push("normalize_adjacency", value, &[a], Op::NormalizeAdjacency(a))
    }

    /// Runs the backward pass from the scalar `loss`. A tape can be differentiated once.
    pub fn backward(&mut self, loss: Var) -> Result<Gradients> {
        if self.consumed {
            return Err(Error::Usage("backward already ran on this tape".into()));
        }
        if self.shape(loss) != (1, 1) {
            return Err(Error::shape("backward", self.shape(loss), (1, 1)));
        }
        self.consumed = true;

        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(Tensor::scalar(1.0));

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            self.propagate(idx, &g, &mut grads)?;
            grads[idx] = Some(g);
        }

        for (idx, node) in self.nodes.iter().enumerate() {
            if !node.requires_grad {
                grads[idx] = None;
            }
        }
        Ok(Gradients { grads })
    }

    fn propagate(&self, idx: usize, g: &Tensor, grads: &mut [Option<Tensor>]) -> Result<()> {
        let node = &self.nodes[idx];
        let out = &node.value;
        let mut send = |var: Var, delta: Tensor| {
            if !self.nodes[var.0].requires_grad {
                return;
            }
            match &mut grads[var.0] {
                Some(acc) => acc.add_assign(&delta),
                slot @ None => *slot = Some(delta),
            }
        };
        let val = |v: Var| &self.nodes[v.0].value;

        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                if self.nodes[a.0].requires_grad {
                    send(*a, g.matmul_nt(val(*b))?);
                }
                if self.nodes[b.0].requires_grad {
                    send(*b, val(*a).matmul_tn(g)?);
                }
            }
            Op::Add(a, b) => {
                send(*a, g.clone());
                send(*b, g.clone());
            }
            Op::Sub(a, b) => {
                send(*a, g.clone());
                send(*b, g.scale(-1.0));
            }
            Op::Mul(a, b) => {
                send(*a, g.zip_map(val(*b), |x, y| x * y));
                send(*b, g.zip_map(val(*a), |x, y| x * y));
            }
            Op::Scale(a, s) => send(*a, g.scale(*s)),
            Op::AddRow(a, b) => {
                send(*a, g.clone());
                send(*b, column_sums(g));
            }
            Op::ScaleRows(a, factors) => {
                let mut d = g.clone();
                for (r, &f) in factors.iter().enumerate() {
                    d.row_mut(r).iter_mut().for_each(|v| *v *= f);
                }
                send(*a, d);
            }
            Op::ConcatCols(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let (rows, cols) = val(p).shape();
                    let mut d = Tensor::zeros(rows, cols);
                    for r in 0..rows {
                        d.row_mut(r).copy_from_slice(&g.row(r)[offset..offset + cols]);
                    }
                    offset += cols;
                    send(p, d);
                }
            }
            Op::SliceRows(a, start) => {
                let (rows, cols) = val(*a).shape();
                let mut d = Tensor::zeros(rows, cols);
                d.data_mut()[start * cols..start * cols + g.len()].copy_from_slice(g.data());
                send(*a, d);
            }
            Op::Relu(a) => send(*a, g.zip_map(val(*a), |g, x| if x > 0.0 { g } else { 0.0 })),
            Op::LeakyRelu(a, slope) => send(
                *a,
                g.zip_map(val(*a), |g, x| if x > 0.0 { g } else { slope * g }),
            ),
            Op::Elu(a) => {
                let xs = val(*a);
                let mut d = g.clone();
                for ((d, &x), &y) in d.data_mut().iter_mut().zip(xs.data()).zip(out.data()) {
                    if x <= 0.0 {
                        *d *= y + 1.0;
                    }
                }
                send(*a, d);
            }
            Op::Sigmoid(a) => send(*a, g.zip_map(out, |g, y| g * y * (1.0 - y))),
            Op::Tanh(a) => send(*a, g.zip_map(out, |g, y| g * (1.0 - y * y))),
            Op::RowSoftmax(a) | Op::MaskedRowSoftmax(a) => {
                let mut d = Tensor::zeros(out.rows(), out.cols());
                for r in 0..out.rows() {
                    let (y, gr) = (out.row(r), g.row(r));
                    let dot: f64 = y.iter().zip(gr).map(|(y, g)| y * g).sum();
                    for ((d, &y), &g) in d.row_mut(r).iter_mut().zip(y).zip(gr) {
                        *d = y * (g - dot);
                    }
                }
                send(*a, d);
            }
            Op::SumRows(a) | Op::MeanRows(a) => {
                let (rows, cols) = val(*a).shape();
                let factor = match node.op {
                    Op::MeanRows(_) => 1.0 / rows as f64,
                    _ => 1.0,
                };
                let mut d = Tensor::zeros(rows, cols);
                for r in 0..rows {
                    for (d, &g) in d.row_mut(r).iter_mut().zip(g.data()) {
                        *d = g * factor;
                    }
                }
                send(*a, d);
            }
            Op::Transpose(a) => send(*a, g.transpose()),
            Op::FrobeniusNorm(a) => {
                let norm = out.get(0, 0);
                let gs = g.get(0, 0);
                let d = if norm > 0.0 {
                    val(*a).scale(gs / norm)
                } else {
                    Tensor::zeros(val(*a).rows(), val(*a).cols())
                };
                send(*a, d);
            }
            Op::SumAll(a) => {
                let (rows, cols) = val(*a).shape();
                send(*a, Tensor::filled(rows, cols, g.get(0, 0)));
            }
            Op::RowEntropyMean(a) => {
                let s = val(*a);
                let factor = g.get(0, 0) / s.rows() as f64;
                send(
                    *a,
                    s.map(|p| if p > 0.0 { -(p.ln() + 1.0) * factor } else { 0.0 }),
                );
            }
            Op::CrossEntropy(a, labels) => {
                let logits = val(*a);
                let mut d = softmax_rows(logits, None);
                let factor = g.get(0, 0) / labels.len() as f64;
                for (r, &label) in labels.iter().enumerate() {
                    let row = d.row_mut(r);
                    row[label] -= 1.0;
                    row.iter_mut().for_each(|v| *v *= factor);
                }
                send(*a, d);
            }
            Op::NormalizeAdjacency(a) => send(*a, sym_normalize_backward(val(*a), out, g)),
        }
        Ok(())
    }
}

fn column_sums(t: &Tensor) -> Tensor {
    let mut out = Tensor::zeros(1, t.cols());
    for r in 0..t.rows() {
        for (o, &v) in out.data_mut().iter_mut().zip(t.row(r)) {
            *o += v;
        }
    }
    out
}

pub(crate) fn softmax_rows(t: &Tensor, mask: Option<&Tensor>) -> Tensor {
    let mut out = Tensor::zeros(t.rows(), t.cols());
    for r in 0..t.rows() {
        let row = t.row(r);
        let keep = |c: usize| mask.is_none_or(|m| m.get(r, c) != 0.0);
        let max = (0..t.cols())
            .filter(|&c| keep(c))
            .map(|c| row[c])
            .fold(f64::NEG_INFINITY, f64::max);
        let dst = out.row_mut(r);
        let mut z = 0.0;
        for c in 0..row.len() {
            if keep(c) {
                let e = (row[c] - max).exp();
                dst[c] = e;
                z += e;
            }
        }
        dst.iter_mut().for_each(|v| *v /= z);
    }
    out
}

fn degrees_with_self_loops(a: &Tensor) -> Vec<f64> {
    (0..a.rows()).map(|r| a.row(r).iter().sum::<f64>() + 1.0).collect()
}

pub(crate) fn sym_normalize(a: &Tensor) -> Result<Tensor> {
    let n = a.rows();
    let deg = degrees_with_self_loops(a);
    if let Some(i) = deg.iter().position(|&d| d <= 0.0) {
        return Err(Error::Numeric(format!(
            "normalize_adjacency: non-positive degree at node {i}"
        )));
    }
    let inv_sqrt: Vec<f64> = deg.iter().map(|d| 1.0 / d.sqrt()).collect();
    let mut out = Tensor::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let b = a.get(i, j) + if i == j { 1.0 } else { 0.0 };
            out.set(i, j, b * inv_sqrt[i] * inv_sqrt[j]);
        }
    }
    Ok(out)
}

fn sym_normalize_backward(a: &Tensor, _out: &Tensor, g: &Tensor) -> Tensor {
    // N_ij = B_ij r_i r_j, r = d^{-1/2}, d_i = sum_j B_ij, B = A + I.
    let n = a.rows();
    let deg = degrees_with_self_loops(a);
    let r: Vec<f64> = deg.iter().map(|d| 1.0 / d.sqrt()).collect();
    let b = |i: usize, j: usize| a.get(i, j) + if i == j { 1.0 } else { 0.0 };

    let mut grad_deg = vec![0.0; n];
    for i in 0..n {
        let mut acc = 0.0;
        for l in 0..n {
            acc += g.get(i, l) * b(i, l) * r[l];
            acc += g.get(l, i) * b(l, i) * r[l];
        }
        grad_deg[i] = -0.5 * deg[i].powf(-1.5) * acc;
    }

    let mut d = Tensor::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            d.set(i, j, g.get(i, j) * r[i] * r[j] + grad_deg[i]);
        }
    }
    d
}
