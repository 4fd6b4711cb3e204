//! Reverse-mode differentiation over a linear tape of matrix operations.
//!
//! Operations are appended to the [`Tape`] in evaluation order, so the node
//! index order is already a topological order. [`Tape::backward`] walks the
//! indices in reverse exactly once, which makes gradient accumulation
//! deterministic.

use std::cell::RefCell;
use std::sync::Arc;

use super::{AutodiffError, Matrix, Result};

/// Reduction / concatenation axis. `Rows` collapses (or stacks along) the
/// row dimension, `Cols` the column dimension.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    Rows,
    Cols,
}

/// Boolean matrix used by [`Tensor::masked_softmax`]. Cheap to clone.
#[derive(Clone, Debug, PartialEq)]
pub struct Mask {
    rows: usize,
    cols: usize,
    bits: Arc<[bool]>,
}

impl Mask {
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let bits: Vec<bool> = (0..rows * cols).map(|k| f(k / cols, k % cols)).collect();
        Self {
            rows,
            cols,
            bits: bits.into(),
        }
    }

    pub fn shape(&self) -> [usize; 2] {
        [self.rows, self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.bits[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[bool] {
        &self.bits[i * self.cols..(i + 1) * self.cols]
    }

    /// 1.0 where set, 0.0 elsewhere.
    pub fn to_matrix(&self) -> Matrix {
        Matrix::from_fn(self.rows, self.cols, |i, j| {
            f64::from(u8::from(self.get(i, j)))
        })
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(usize, usize),
    Transpose(usize),
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Scale(usize, f64),
    Offset(usize),
    Exp(usize),
    Log(usize),
    Tanh(usize),
    Sigmoid(usize),
    LeakyRelu(usize, f64),
    Elu(usize, f64),
    SqDiff(usize, usize),
    Concat(Vec<usize>, Axis),
    MaskedSoftmax(usize),
    LogSoftmax(usize),
    Sum(usize),
    Mean(usize),
    SumAxis(usize, Axis),
    MeanAxis(usize, Axis),
    GatherRows(usize, Vec<usize>),
    Broadcast(usize),
    OuterSum(usize, usize),
    MgckMix {
        attention: usize,
        alpha: usize,
        beta: usize,
        /// M ⊙ (W + α)
        scaled_weights: Matrix,
        /// M ⊙ (att + β·T)
        stage: Matrix,
        threshold: Matrix,
    },
}

struct Node {
    value: Matrix,
    op: Op,
    requires_grad: bool,
}

/// Records operations for one forward/backward pass.
///
/// A tape is single-threaded; build one tape per independent evaluation.
#[derive(Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
    corrupt_backward: bool,
}

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy)]
pub struct Tensor<'t> {
    tape: &'t Tape,
    id: usize,
}

impl std::fmt::Debug for Tensor<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Tensor")
            .field("id", &self.id)
            .field("shape", &self.shape())
            .finish()
    }
}

/// Gradients produced by [`Tape::backward`], indexed by tensor.
pub struct Gradients {
    grads: Vec<Option<Matrix>>,
    shapes: Vec<[usize; 2]>,
}

impl Gradients {
    /// Gradient for `t`, or `None` when `t` is not on the loss path.
    pub fn get(&self, t: Tensor<'_>) -> Option<&Matrix> {
        self.grads.get(t.id).and_then(Option::as_ref)
    }

    /// Gradient for `t`, with zeros for tensors the loss does not depend on.
    pub fn wrt(&self, t: Tensor<'_>) -> Matrix {
        match self.get(t) {
            Some(g) => g.clone(),
            None => {
                let [r, c] = self.shapes[t.id];
                Matrix::zeros(r, c)
            }
        }
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    /// A tape whose matmul backward rule is deliberately wrong. Only useful
    /// for checking that gradient checks catch a broken rule.
    pub fn with_corrupted_backward() -> Self {
        Self {
            nodes: RefCell::default(),
            corrupt_backward: true,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Records a differentiable leaf (a parameter).
    pub fn leaf(&self, value: Matrix) -> Result<Tensor<'_>> {
        self.push("leaf", value, Op::Leaf, true)
    }

    /// Records a constant; gradients never flow into it.
    pub fn constant(&self, value: Matrix) -> Result<Tensor<'_>> {
        self.push("constant", value, Op::Leaf, false)
    }

    fn push(
        &self,
        name: &'static str,
        value: Matrix,
        op: Op,
        requires_grad: bool,
    ) -> Result<Tensor<'_>> {
        if !value.is_finite() {
            return Err(AutodiffError::NonFinite { op: name });
        }
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Ok(Tensor {
            tape: self,
            id: nodes.len() - 1,
        })
    }

    fn requires_grad(&self, id: usize) -> bool {
        self.nodes.borrow()[id].requires_grad
    }

    /// Computes d`loss`/d`x` for every recorded tensor `x` on the loss path.
    pub fn backward(&self, loss: Tensor<'_>) -> Result<Gradients> {
        if !std::ptr::eq(loss.tape, self) {
            return Err(AutodiffError::DetachedTape);
        }
        let nodes = self.nodes.borrow();
        let shape = nodes[loss.id].value.shape();
        if shape != [1, 1] {
            return Err(AutodiffError::NonScalarLoss { shape });
        }
        let mut grads: Vec<Option<Matrix>> = Vec::with_capacity(nodes.len());
        grads.resize_with(nodes.len(), || None);
        if nodes[loss.id].requires_grad {
            grads[loss.id] = Some(Matrix::scalar(1.0));
        }
        for id in (0..=loss.id).rev() {
            let Some(g) = grads[id].take() else { continue };
            self.propagate(&nodes, id, &g, &mut grads);
            grads[id] = Some(g);
        }
        let shapes = nodes.iter().map(|n| n.value.shape()).collect();
        Ok(Gradients { grads, shapes })
    }

    fn propagate(&self, nodes: &[Node], id: usize, g: &Matrix, grads: &mut [Option<Matrix>]) {
        let node = &nodes[id];
        let out = &node.value;
        let val = |i: usize| &nodes[i].value;
        let mut send = |target: usize, contribution: Matrix| {
            if !nodes[target].requires_grad {
                return;
            }
            match &mut grads[target] {
                Some(acc) => acc.add_assign(&contribution),
                slot @ None => *slot = Some(contribution),
            }
        };
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                if nodes[*a].requires_grad {
                    let mut ga = g.matmul_t(val(*b));
                    if self.corrupt_backward {
                        ga.scale_assign(1.5);
                    }
                    send(*a, ga);
                }
                if nodes[*b].requires_grad {
                    send(*b, val(*a).t_matmul(g));
                }
            }
            Op::Transpose(a) => send(*a, g.transpose()),
            Op::Add(a, b) => {
                send(*a, g.clone());
                send(*b, g.clone());
            }
            Op::Sub(a, b) => {
                send(*a, g.clone());
                send(*b, g.map(|v| -v));
            }
            Op::Mul(a, b) => {
                if nodes[*a].requires_grad {
                    send(*a, g.zip_map(val(*b), |g, y| g * y));
                }
                if nodes[*b].requires_grad {
                    send(*b, g.zip_map(val(*a), |g, x| g * x));
                }
            }
            Op::Scale(a, c) => send(*a, g.map(|v| v * c)),
            Op::Offset(a) => send(*a, g.clone()),
            Op::Exp(a) => send(*a, g.zip_map(out, |g, y| g * y)),
            Op::Log(a) => send(*a, g.zip_map(val(*a), |g, x| g / x)),
            Op::Tanh(a) => send(*a, g.zip_map(out, |g, y| g * (1.0 - y * y))),
            Op::Sigmoid(a) => send(*a, g.zip_map(out, |g, y| g * y * (1.0 - y))),
            Op::LeakyRelu(a, slope) => {
                send(
                    *a,
                    g.zip_map(val(*a), |g, x| if x > 0.0 { g } else { g * slope }),
                );
            }
            Op::Elu(a, alpha) => {
                let x = val(*a);
                let local = x.zip_map(out, |x, y| if x > 0.0 { 1.0 } else { y + alpha });
                send(*a, g.zip_map(&local, |g, d| g * d));
            }
            Op::SqDiff(a, b) => {
                let d = val(*a).zip_map(val(*b), |x, y| 2.0 * (x - y));
                let ga = g.zip_map(&d, |g, d| g * d);
                if nodes[*b].requires_grad {
                    send(*b, ga.map(|v| -v));
                }
                send(*a, ga);
            }
            Op::Concat(parts, axis) => {
                let mut offset = 0;
                for &p in parts {
                    let [r, c] = val(p).shape();
                    let piece = match axis {
                        Axis::Rows => Matrix::from_fn(r, c, |i, j| g[(offset + i, j)]),
                        Axis::Cols => Matrix::from_fn(r, c, |i, j| g[(i, offset + j)]),
                    };
                    offset += if *axis == Axis::Rows { r } else { c };
                    send(p, piece);
                }
            }
            Op::MaskedSoftmax(a) => {
                let mut ga = Matrix::zeros(out.rows(), out.cols());
                for i in 0..out.rows() {
                    let y = out.row(i);
                    let gr = g.row(i);
                    let dot: f64 = y.iter().zip(gr).map(|(y, g)| y * g).sum();
                    for (o, (y, g)) in ga.row_mut(i).iter_mut().zip(y.iter().zip(gr)) {
                        *o = y * (g - dot);
                    }
                }
                send(*a, ga);
            }
            Op::LogSoftmax(a) => {
                let mut ga = Matrix::zeros(out.rows(), out.cols());
                for i in 0..out.rows() {
                    let gsum: f64 = g.row(i).iter().sum();
                    for (o, (y, g)) in ga
                        .row_mut(i)
                        .iter_mut()
                        .zip(out.row(i).iter().zip(g.row(i)))
                    {
                        *o = g - y.exp() * gsum;
                    }
                }
                send(*a, ga);
            }
            Op::Sum(a) => {
                let [r, c] = val(*a).shape();
                send(*a, Matrix::filled(r, c, g.item()));
            }
            Op::Mean(a) => {
                let [r, c] = val(*a).shape();
                send(*a, Matrix::filled(r, c, g.item() / (r * c) as f64));
            }
            Op::SumAxis(a, axis) | Op::MeanAxis(a, axis) => {
                let [r, c] = val(*a).shape();
                let scale = match (&node.op, axis) {
                    (Op::MeanAxis(..), Axis::Rows) => 1.0 / r as f64,
                    (Op::MeanAxis(..), Axis::Cols) => 1.0 / c as f64,
                    _ => 1.0,
                };
                let ga = match axis {
                    Axis::Rows => Matrix::from_fn(r, c, |_, j| g[(0, j)] * scale),
                    Axis::Cols => Matrix::from_fn(r, c, |i, _| g[(i, 0)] * scale),
                };
                send(*a, ga);
            }
            Op::GatherRows(a, idx) => {
                let [r, c] = val(*a).shape();
                let mut ga = Matrix::zeros(r, c);
                for (k, &src) in idx.iter().enumerate() {
                    for (o, v) in ga.row_mut(src).iter_mut().zip(g.row(k)) {
                        *o += v;
                    }
                }
                send(*a, ga);
            }
            Op::Broadcast(a) => {
                let [r, c] = val(*a).shape();
                let ga = if [r, c] == g.shape() {
                    g.clone()
                } else if r == 1 && c == 1 {
                    Matrix::scalar(g.sum())
                } else if r == 1 {
                    reduce_axis(g, Axis::Rows, 1.0)
                } else {
                    reduce_axis(g, Axis::Cols, 1.0)
                };
                send(*a, ga);
            }
            Op::OuterSum(a, b) => {
                send(*a, reduce_axis(g, Axis::Cols, 1.0));
                send(*b, reduce_axis(g, Axis::Rows, 1.0).transpose());
            }
            Op::MgckMix {
                attention,
                alpha,
                beta,
                scaled_weights,
                stage,
                threshold,
            } => {
                if nodes[*attention].requires_grad {
                    send(*attention, g.zip_map(scaled_weights, |g, w| g * w));
                }
                let dot = |m: &Matrix| {
                    g.as_slice()
                        .iter()
                        .zip(m.as_slice())
                        .map(|(g, v)| g * v)
                        .sum::<f64>()
                };
                send(*alpha, Matrix::scalar(dot(stage)));
                if nodes[*beta].requires_grad {
                    let gb: f64 = g
                        .as_slice()
                        .iter()
                        .zip(scaled_weights.as_slice())
                        .zip(threshold.as_slice())
                        .map(|((g, w), t)| g * w * t)
                        .sum();
                    send(*beta, Matrix::scalar(gb));
                }
            }
        }
    }
}

fn same_tape(a: Tensor<'_>, b: Tensor<'_>) -> Result<()> {
    if std::ptr::eq(a.tape, b.tape) {
        Ok(())
    } else {
        Err(AutodiffError::DetachedTape)
    }
}

fn shape_mismatch(op: &'static str, lhs: [usize; 2], rhs: [usize; 2]) -> AutodiffError {
    AutodiffError::ShapeMismatch { op, lhs, rhs }
}

#[allow(clippy::should_implement_trait)]
impl<'t> Tensor<'t> {
    pub fn tape(&self) -> &'t Tape {
        self.tape
    }

    pub fn shape(&self) -> [usize; 2] {
        self.tape.nodes.borrow()[self.id].value.shape()
    }

    pub fn value(&self) -> Matrix {
        self.tape.nodes.borrow()[self.id].value.clone()
    }

    /// Runs `f` on the recorded value without cloning it.
    pub fn with_value<R>(&self, f: impl FnOnce(&Matrix) -> R) -> R {
        f(&self.tape.nodes.borrow()[self.id].value)
    }

    /// Value of a `1×1` tensor.
    pub fn item(&self) -> f64 {
        self.with_value(Matrix::item)
    }

    fn unary(self, name: &'static str, f: impl FnOnce(&Matrix) -> Matrix, op: Op) -> Result<Self> {
        let value = self.with_value(f);
        self.tape
            .push(name, value, op, self.tape.requires_grad(self.id))
    }

    fn binary(
        self,
        rhs: Self,
        name: &'static str,
        f: impl FnOnce(&Matrix, &Matrix) -> Matrix,
        op: Op,
    ) -> Result<Self> {
        same_tape(self, rhs)?;
        let value = {
            let nodes = self.tape.nodes.borrow();
            f(&nodes[self.id].value, &nodes[rhs.id].value)
        };
        let rg = self.tape.requires_grad(self.id) || self.tape.requires_grad(rhs.id);
        self.tape.push(name, value, op, rg)
    }

    fn elementwise(
        self,
        rhs: Self,
        name: &'static str,
        f: impl Fn(f64, f64) -> f64,
        op: Op,
    ) -> Result<Self> {
        let (l, r) = (self.shape(), rhs.shape());
        if l != r {
            return Err(shape_mismatch(name, l, r));
        }
        self.binary(rhs, name, |a, b| a.zip_map(b, f), op)
    }

    pub fn matmul(self, rhs: Self) -> Result<Self> {
        let (l, r) = (self.shape(), rhs.shape());
        if l[1] != r[0] {
            return Err(shape_mismatch("matmul", l, r));
        }
        self.binary(rhs, "matmul", Matrix::matmul, Op::MatMul(self.id, rhs.id))
    }

    pub fn transpose(self) -> Result<Self> {
        self.unary("transpose", Matrix::transpose, Op::Transpose(self.id))
    }

    pub fn add(self, rhs: Self) -> Result<Self> {
        self.elementwise(rhs, "add", |a, b| a + b, Op::Add(self.id, rhs.id))
    }

    pub fn sub(self, rhs: Self) -> Result<Self> {
        self.elementwise(rhs, "sub", |a, b| a - b, Op::Sub(self.id, rhs.id))
    }

    /// Elementwise (Hadamard) product.
    pub fn mul(self, rhs: Self) -> Result<Self> {
        self.elementwise(rhs, "mul", |a, b| a * b, Op::Mul(self.id, rhs.id))
    }

    /// Elementwise product with a constant matrix.
    pub fn mul_const(self, rhs: &Matrix) -> Result<Self> {
        let c = self.tape.constant(rhs.clone())?;
        self.mul(c)
    }

    pub fn scale(self, factor: f64) -> Result<Self> {
        self.unary(
            "scale",
            |m| m.map(|v| v * factor),
            Op::Scale(self.id, factor),
        )
    }

    pub fn neg(self) -> Result<Self> {
        self.scale(-1.0)
    }

    /// Adds a constant to every entry.
    pub fn offset(self, c: f64) -> Result<Self> {
        self.unary("offset", |m| m.map(|v| v + c), Op::Offset(self.id))
    }

    pub fn exp(self) -> Result<Self> {
        self.unary("exp", |m| m.map(f64::exp), Op::Exp(self.id))
    }

    pub fn log(self) -> Result<Self> {
        self.unary("log", |m| m.map(f64::ln), Op::Log(self.id))
    }

    pub fn tanh(self) -> Result<Self> {
        self.unary("tanh", |m| m.map(f64::tanh), Op::Tanh(self.id))
    }

    pub fn sigmoid(self) -> Result<Self> {
        self.unary("sigmoid", |m| m.map(sigmoid), Op::Sigmoid(self.id))
    }

    pub fn leaky_relu(self, slope: f64) -> Result<Self> {
        self.unary(
            "leaky_relu",
            |m| m.map(|x| if x > 0.0 { x } else { slope * x }),
            Op::LeakyRelu(self.id, slope),
        )
    }

    /// Exponential linear unit: `x` for `x > 0`, `alpha·(eˣ − 1)` otherwise.
    pub fn elu(self, alpha: f64) -> Result<Self> {
        self.unary(
            "elu",
            |m| m.map(|x| if x > 0.0 { x } else { alpha * x.exp_m1() }),
            Op::Elu(self.id, alpha),
        )
    }

    /// `(self − rhs)²` elementwise.
    pub fn sq_diff(self, rhs: Self) -> Result<Self> {
        self.elementwise(
            rhs,
            "sq_diff",
            |a, b| (a - b) * (a - b),
            Op::SqDiff(self.id, rhs.id),
        )
    }

    pub fn concat(parts: &[Self], axis: Axis) -> Result<Self> {
        let first = *parts
            .first()
            .ok_or(AutodiffError::EmptyInput { op: "concat" })?;
        let base = first.shape();
        for p in &parts[1..] {
            same_tape(first, *p)?;
            let s = p.shape();
            let ok = match axis {
                Axis::Rows => s[1] == base[1],
                Axis::Cols => s[0] == base[0],
            };
            if !ok {
                return Err(shape_mismatch("concat", base, s));
            }
        }
        let tape = first.tape;
        let value = {
            let nodes = tape.nodes.borrow();
            let mats: Vec<&Matrix> = parts.iter().map(|p| &nodes[p.id].value).collect();
            concat_values(&mats, axis)
        };
        let rg = parts.iter().any(|p| tape.requires_grad(p.id));
        let ids = parts.iter().map(|p| p.id).collect();
        tape.push("concat", value, Op::Concat(ids, axis), rg)
    }

    /// Row-wise softmax restricted to `mask`. Masked-out entries are exactly
    /// zero; a row with no unmasked entry comes out all-zero.
    pub fn masked_softmax(self, mask: &Mask) -> Result<Self> {
        let shape = self.shape();
        if shape != mask.shape() {
            return Err(shape_mismatch("masked_softmax", shape, mask.shape()));
        }
        self.unary(
            "masked_softmax",
            |m| masked_softmax_value(m, mask),
            Op::MaskedSoftmax(self.id),
        )
    }

    /// Row-wise log-softmax in log-sum-exp form.
    pub fn log_softmax(self) -> Result<Self> {
        self.unary("log_softmax", log_softmax_value, Op::LogSoftmax(self.id))
    }

    pub fn sum(self) -> Result<Self> {
        self.unary("sum", |m| Matrix::scalar(m.sum()), Op::Sum(self.id))
    }

    pub fn mean(self) -> Result<Self> {
        if self.with_value(Matrix::is_empty) {
            return Err(AutodiffError::EmptyInput { op: "mean" });
        }
        self.unary(
            "mean",
            |m| Matrix::scalar(m.sum() / m.len() as f64),
            Op::Mean(self.id),
        )
    }

    pub fn sum_axis(self, axis: Axis) -> Result<Self> {
        self.unary(
            "sum_axis",
            |m| reduce_axis(m, axis, 1.0),
            Op::SumAxis(self.id, axis),
        )
    }

    pub fn mean_axis(self, axis: Axis) -> Result<Self> {
        let [r, c] = self.shape();
        let n = if axis == Axis::Rows { r } else { c };
        if n == 0 {
            return Err(AutodiffError::EmptyInput { op: "mean_axis" });
        }
        self.unary(
            "mean_axis",
            |m| reduce_axis(m, axis, 1.0 / n as f64),
            Op::MeanAxis(self.id, axis),
        )
    }

    /// Selects rows by index (repeats allowed).
    pub fn gather_rows(self, idx: &[usize]) -> Result<Self> {
        let [r, _] = self.shape();
        if let Some(&bad) = idx.iter().find(|&&i| i >= r) {
            return Err(AutodiffError::IndexOutOfRange { index: bad, len: r });
        }
        self.unary(
            "gather_rows",
            |m| {
                let mut data = Vec::with_capacity(idx.len() * m.cols());
                for &i in idx {
                    data.extend_from_slice(m.row(i));
                }
                Matrix::from_vec(idx.len(), m.cols(), data)
            },
            Op::GatherRows(self.id, idx.to_vec()),
        )
    }

    /// Repeats a `1×1`, `1×c` or `r×1` tensor to `rows×cols`.
    pub fn broadcast(self, rows: usize, cols: usize) -> Result<Self> {
        let [r, c] = self.shape();
        let ok = (r == rows || r == 1) && (c == cols || c == 1);
        if !ok {
            return Err(shape_mismatch("broadcast", [r, c], [rows, cols]));
        }
        self.unary(
            "broadcast",
            |m| broadcast_value(m, rows, cols),
            Op::Broadcast(self.id),
        )
    }

    /// `out_ij = self_i + other_j` for column vectors `self` (N×1) and `other` (M×1).
    pub fn outer_sum(self, other: Self) -> Result<Self> {
        let (l, r) = (self.shape(), other.shape());
        if l[1] != 1 || r[1] != 1 {
            return Err(shape_mismatch("outer_sum", l, r));
        }
        self.binary(
            other,
            "outer_sum",
            |a, b| Matrix::from_fn(a.rows(), b.rows(), |i, j| a.as_slice()[i] + b.as_slice()[j]),
            Op::OuterSum(self.id, other.id),
        )
    }

    /// Fused `M ⊙ (W + α) ⊙ (self + β·T)` for constant `W`, `T`, `M` and
    /// scalar tensors `α`, `β`.
    pub fn mgck_mix(
        self,
        alpha: Self,
        beta: Self,
        weights: &Matrix,
        threshold: &Matrix,
        mask: &Matrix,
    ) -> Result<Self> {
        let shape = self.shape();
        for m in [weights, threshold, mask] {
            if m.shape() != shape {
                return Err(shape_mismatch("mgck_mix", shape, m.shape()));
            }
        }
        for s in [alpha, beta] {
            same_tape(self, s)?;
            if s.shape() != [1, 1] {
                return Err(shape_mismatch("mgck_mix", [1, 1], s.shape()));
            }
        }
        let (a, b) = (alpha.item(), beta.item());
        let scaled_weights = weights.zip_map(mask, |w, m| m * (w + a));
        let stage = self.with_value(|att| {
            let mixed = att.zip_map(threshold, |x, t| x + b * t);
            mixed.zip_map(mask, |x, m| x * m)
        });
        let value = scaled_weights.zip_map(&stage, |w, s| w * s);
        let tape = self.tape;
        let rg = [self, alpha, beta].iter().any(|t| tape.requires_grad(t.id));
        tape.push(
            "mgck_mix",
            value,
            Op::MgckMix {
                attention: self.id,
                alpha: alpha.id,
                beta: beta.id,
                scaled_weights,
                stage,
                threshold: threshold.clone(),
            },
            rg,
        )
    }
}

fn broadcast_value(m: &Matrix, rows: usize, cols: usize) -> Matrix {
    let [r, c] = m.shape();
    if r == rows && c == cols {
        m.clone()
    } else if r == 1 && c == 1 {
        Matrix::filled(rows, cols, m.item())
    } else if r == 1 {
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            data.extend_from_slice(m.as_slice());
        }
        Matrix::from_vec(rows, cols, data)
    } else {
        let mut data = Vec::with_capacity(rows * cols);
        for &v in m.as_slice() {
            data.extend(std::iter::repeat_n(v, cols));
        }
        Matrix::from_vec(rows, cols, data)
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn concat_values(mats: &[&Matrix], axis: Axis) -> Matrix {
    match axis {
        Axis::Rows => {
            let cols = mats[0].cols();
            let mut data = Vec::new();
            for m in mats {
                data.extend_from_slice(m.as_slice());
            }
            Matrix::from_vec(data.len() / cols.max(1), cols, data)
        }
        Axis::Cols => {
            let rows = mats[0].rows();
            let cols: usize = mats.iter().map(|m| m.cols()).sum();
            let mut data = Vec::with_capacity(rows * cols);
            for i in 0..rows {
                for m in mats {
                    data.extend_from_slice(m.row(i));
                }
            }
            Matrix::from_vec(rows, cols, data)
        }
    }
}

pub(crate) fn masked_softmax_value(m: &Matrix, mask: &Mask) -> Matrix {
    let mut out = Matrix::zeros(m.rows(), m.cols());
    for i in 0..m.rows() {
        let bits = mask.row(i);
        let row = m.row(i);
        let max = row
            .iter()
            .zip(bits)
            .filter(|(_, &b)| b)
            .map(|(&v, _)| v)
            .fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY {
            log::debug!("masked_softmax: row {i} has no unmasked entries");
            continue;
        }
        let o = out.row_mut(i);
        let mut total = 0.0;
        for j in 0..row.len() {
            if bits[j] {
                o[j] = (row[j] - max).exp();
                total += o[j];
            }
        }
        for v in o.iter_mut() {
            *v /= total;
        }
    }
    out
}

fn log_softmax_value(m: &Matrix) -> Matrix {
    let mut out = m.clone();
    for i in 0..m.rows() {
        let row = out.row_mut(i);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        for v in row.iter_mut() {
            *v -= lse;
        }
    }
    out
}

fn reduce_axis(m: &Matrix, axis: Axis, scale: f64) -> Matrix {
    match axis {
        Axis::Rows => {
            let mut out = vec![0.0; m.cols()];
            for i in 0..m.rows() {
                out.iter_mut().zip(m.row(i)).for_each(|(o, v)| *o += v);
            }
            out.iter_mut().for_each(|o| *o *= scale);
            Matrix::from_vec(1, m.cols(), out)
        }
        Axis::Cols => Matrix::from_fn(m.rows(), 1, |i, _| m.row(i).iter().sum::<f64>() * scale),
    }
}
