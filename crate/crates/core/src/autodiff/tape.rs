use rand::Rng;

use super::{Matrix, TensorError};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Operation kinds, used for error reporting and fault injection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OpKind {
    Leaf,
    MatMul,
    Add,
    Mul,
    AddBias,
    Relu,
    Sigmoid,
    Dropout,
    MeanRows,
    ConcatCols,
    AbsSum,
    Sum,
    ScalarMul,
    ScalarAdd,
    SoftmaxRows,
    SoftmaxCrossEntropy,
    PairwiseConcatLinear,
    Reshape,
    SymmetrizeUnitDiag,
    SymNormalize,
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Mul(Var, Var),
    AddBias(Var, Var),
    Relu(Var),
    Sigmoid(Var),
    Dropout(Var, Vec<f64>),
    MeanRows(Var),
    ConcatCols(Vec<Var>),
    AbsSum(Var),
    Sum(Var),
    ScalarMul(Var, f64),
    ScalarAdd(Var),
    SoftmaxRows(Var),
    SoftmaxCrossEntropy(Var, Vec<usize>),
    PairwiseConcatLinear(Var, Var),
    Reshape(Var),
    SymmetrizeUnitDiag(Var),
    SymNormalize(Var),
}

impl Op {
    fn kind(&self) -> OpKind {
        match self {
            Op::Leaf => OpKind::Leaf,
            Op::MatMul(..) => OpKind::MatMul,
            Op::Add(..) => OpKind::Add,
            Op::Mul(..) => OpKind::Mul,
            Op::AddBias(..) => OpKind::AddBias,
            Op::Relu(..) => OpKind::Relu,
            Op::Sigmoid(..) => OpKind::Sigmoid,
            Op::Dropout(..) => OpKind::Dropout,
            Op::MeanRows(..) => OpKind::MeanRows,
            Op::ConcatCols(..) => OpKind::ConcatCols,
            Op::AbsSum(..) => OpKind::AbsSum,
            Op::Sum(..) => OpKind::Sum,
            Op::ScalarMul(..) => OpKind::ScalarMul,
            Op::ScalarAdd(..) => OpKind::ScalarAdd,
            Op::SoftmaxRows(..) => OpKind::SoftmaxRows,
            Op::SoftmaxCrossEntropy(..) => OpKind::SoftmaxCrossEntropy,
            Op::PairwiseConcatLinear(..) => OpKind::PairwiseConcatLinear,
            Op::Reshape(..) => OpKind::Reshape,
            Op::SymmetrizeUnitDiag(..) => OpKind::SymmetrizeUnitDiag,
            Op::SymNormalize(..) => OpKind::SymNormalize,
        }
    }
}

#[derive(Debug, Clone)]
struct Node {
    value: Matrix,
    op: Op,
    requires_grad: bool,
}

/// Records operations in evaluation order; [`Tape::backward`] replays them in
/// exact reverse.
#[derive(Debug, Clone, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    fault: Option<OpKind>,
}

/// Gradients produced by one backward pass, indexed by [`Var`].
#[derive(Debug, Clone)]
pub struct Gradients {
    grads: Vec<Option<Matrix>>,
}

impl Gradients {
    /// Gradient of the loss with respect to `v`, or `None` if `v` does not
    /// require gradients or does not influence the loss.
    pub fn get(&self, v: Var) -> Option<&Matrix> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    pub fn take(&mut self, v: Var) -> Option<Matrix> {
        self.grads.get_mut(v.0).and_then(Option::take)
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

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    /// Test hook: halves the backward contribution of every `kind` op so a
    /// gradient check has something to catch.
    #[doc(hidden)]
    pub fn inject_fault(&mut self, kind: OpKind) {
        self.fault = Some(kind);
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    pub fn scalar(&self, v: Var) -> f64 {
        self.nodes[v.0].value.data()[0]
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    pub fn leaf(&mut self, value: Matrix, requires_grad: bool) -> Var {
        self.nodes.push(Node { value, op: Op::Leaf, requires_grad });
        Var(self.nodes.len() - 1)
    }

    pub fn constant(&mut self, value: Matrix) -> Var {
        self.leaf(value, false)
    }

    fn push(&mut self, value: Matrix, op: Op) -> Result<Var, TensorError> {
        if !value.is_finite() {
            return Err(TensorError::NonFinite(op.kind()));
        }
        let requires_grad = match &op {
            Op::Leaf => false,
            Op::MatMul(a, b) | Op::Add(a, b) | Op::Mul(a, b) | Op::AddBias(a, b) | Op::PairwiseConcatLinear(a, b) => {
                self.requires_grad(*a) || self.requires_grad(*b)
            }
            Op::ConcatCols(vs) => vs.iter().any(|&v| self.requires_grad(v)),
            Op::Relu(a)
            | Op::Sigmoid(a)
            | Op::Dropout(a, _)
            | Op::MeanRows(a)
            | Op::AbsSum(a)
            | Op::Sum(a)
            | Op::ScalarMul(a, _)
            | Op::ScalarAdd(a)
            | Op::SoftmaxRows(a)
            | Op::SoftmaxCrossEntropy(a, _)
            | Op::Reshape(a)
            | Op::SymmetrizeUnitDiag(a)
            | Op::SymNormalize(a) => self.requires_grad(*a),
        };
        self.nodes.push(Node { value, op, requires_grad });
        Ok(Var(self.nodes.len() - 1))
    }

    fn mismatch(&self, op: OpKind, a: Var, b: Var) -> TensorError {
        TensorError::ShapeMismatch { op, left: self.value(a).shape(), right: self.value(b).shape() }
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        if self.value(a).cols() != self.value(b).rows() {
            return Err(self.mismatch(OpKind::MatMul, a, b));
        }
        let out = self.value(a).matmul(self.value(b));
        self.push(out, Op::MatMul(a, b))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        if self.value(a).shape() != self.value(b).shape() {
            return Err(self.mismatch(OpKind::Add, a, b));
        }
        let mut out = self.value(a).clone();
        out.add_assign(self.value(b));
        self.push(out, Op::Add(a, b))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        if self.value(a).shape() != self.value(b).shape() {
            return Err(self.mismatch(OpKind::Mul, a, b));
        }
        let (x, y) = (self.value(a), self.value(b));
        let out = Matrix::from_vec(x.rows(), x.cols(), x.data().iter().zip(y.data()).map(|(p, q)| p * q).collect());
        self.push(out, Op::Mul(a, b))
    }

    /// Adds the `1 x c` row `bias` to every row of `x`.
    pub fn add_bias(&mut self, x: Var, bias: Var) -> Result<Var, TensorError> {
        let (xs, bs) = (self.value(x).shape(), self.value(bias).shape());
        if bs.0 != 1 || bs.1 != xs.1 {
            return Err(self.mismatch(OpKind::AddBias, x, bias));
        }
        let b = self.value(bias).data().to_vec();
        let mut out = self.value(x).clone();
        for row in out.data_mut().chunks_mut(xs.1.max(1)) {
            for (o, bv) in row.iter_mut().zip(&b) {
                *o += bv;
            }
        }
        self.push(out, Op::AddBias(x, bias))
    }

    /// `max(x, 0)`; the subgradient at exactly 0 is 0.
    pub fn relu(&mut self, x: Var) -> Result<Var, TensorError> {
        let out = self.value(x).map(|v| v.max(0.0));
        self.push(out, Op::Relu(x))
    }

    pub fn sigmoid(&mut self, x: Var) -> Result<Var, TensorError> {
        let out = self.value(x).map(sigmoid);
        self.push(out, Op::Sigmoid(x))
    }

    /// Inverted dropout. In eval mode (`train == false`) returns `x` itself.
    pub fn dropout<R: Rng + ?Sized>(&mut self, x: Var, p: f64, rng: &mut R, train: bool) -> Result<Var, TensorError> {
        if !(0.0..1.0).contains(&p) {
            return Err(TensorError::InvalidArgument(format!("dropout rate must lie in [0, 1), got {p}")));
        }
        if !train || p == 0.0 {
            return Ok(x);
        }
        let keep = 1.0 / (1.0 - p);
        let mask: Vec<f64> = (0..self.value(x).len())
            .map(|_| if rng.random::<f64>() < p { 0.0 } else { keep })
            .collect();
        let src = self.value(x);
        let out = Matrix::from_vec(src.rows(), src.cols(), src.data().iter().zip(&mask).map(|(a, m)| a * m).collect());
        self.push(out, Op::Dropout(x, mask))
    }

    /// Column-wise mean over rows: `n x c -> 1 x c`.
    pub fn mean_rows(&mut self, x: Var) -> Result<Var, TensorError> {
        let src = self.value(x);
        let (n, c) = src.shape();
        if n == 0 {
            return Err(TensorError::InvalidArgument("mean over zero rows".into()));
        }
        let mut out = Matrix::zeros(1, c);
        for i in 0..n {
            for (o, v) in out.data_mut().iter_mut().zip(src.row(i)) {
                *o += v;
            }
        }
        out.scale(1.0 / n as f64);
        self.push(out, Op::MeanRows(x))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var, TensorError> {
        let Some(&first) = parts.first() else {
            return Err(TensorError::InvalidArgument("concat of nothing".into()));
        };
        let rows = self.value(first).rows();
        if let Some(&bad) = parts.iter().find(|&&p| self.value(p).rows() != rows) {
            return Err(self.mismatch(OpKind::ConcatCols, first, bad));
        }
        let cols: usize = parts.iter().map(|&p| self.value(p).cols()).sum();
        let mut out = Matrix::zeros(rows, cols);
        let mut offset = 0;
        for &p in parts {
            let v = self.value(p);
            for i in 0..rows {
                for j in 0..v.cols() {
                    out.set(i, offset + j, v.get(i, j));
                }
            }
            offset += v.cols();
        }
        self.push(out, Op::ConcatCols(parts.to_vec()))
    }

    /// `sum |x|` as a `1 x 1` scalar.
    pub fn abs_sum(&mut self, x: Var) -> Result<Var, TensorError> {
        let s = self.value(x).data().iter().map(|v| v.abs()).sum();
        self.push(Matrix::filled(1, 1, s), Op::AbsSum(x))
    }

    pub fn sum(&mut self, x: Var) -> Result<Var, TensorError> {
        let s = self.value(x).sum();
        self.push(Matrix::filled(1, 1, s), Op::Sum(x))
    }

    pub fn scalar_mul(&mut self, x: Var, s: f64) -> Result<Var, TensorError> {
        let out = self.value(x).map(|v| v * s);
        self.push(out, Op::ScalarMul(x, s))
    }

    pub fn scalar_add(&mut self, x: Var, s: f64) -> Result<Var, TensorError> {
        let out = self.value(x).map(|v| v + s);
        self.push(out, Op::ScalarAdd(x))
    }

    pub fn softmax_rows(&mut self, x: Var) -> Result<Var, TensorError> {
        let src = self.value(x);
        let mut out = src.clone();
        let c = src.cols().max(1);
        for row in out.data_mut().chunks_mut(c) {
            softmax_in_place(row);
        }
        self.push(out, Op::SoftmaxRows(x))
    }

    /// Mean over rows of `-log softmax(logits)[target]`, fused and
    /// log-sum-exp stabilized.
    pub fn softmax_cross_entropy(&mut self, logits: Var, targets: &[usize]) -> Result<Var, TensorError> {
        let src = self.value(logits);
        let (n, c) = src.shape();
        if targets.len() != n || n == 0 {
            return Err(TensorError::InvalidArgument(format!("{} targets for {n} rows", targets.len())));
        }
        if let Some(&t) = targets.iter().find(|&&t| t >= c) {
            return Err(TensorError::InvalidArgument(format!("target {t} out of range for {c} classes")));
        }
        let mut total = 0.0;
        for (i, &t) in targets.iter().enumerate() {
            let row = src.row(i);
            total += log_sum_exp(row) - row[t];
        }
        self.push(Matrix::filled(1, 1, total / n as f64), Op::SoftmaxCrossEntropy(logits, targets.to_vec()))
    }

    /// For `x: n x d` and `w: 2d x h`, row `s * n + t` of the `n² x h` output
    /// is `[x_s || x_t] · w`.
    pub fn pairwise_concat_linear(&mut self, x: Var, w: Var) -> Result<Var, TensorError> {
        let (n, d) = self.value(x).shape();
        let (wr, h) = self.value(w).shape();
        if wr != 2 * d {
            return Err(self.mismatch(OpKind::PairwiseConcatLinear, x, w));
        }
        let (w_top, w_bot) = split_rows(self.value(w), d);
        let u = self.value(x).matmul(&w_top);
        let v = self.value(x).matmul(&w_bot);
        let mut out = Matrix::zeros(n * n, h);
        for s in 0..n {
            let us = u.row(s);
            for t in 0..n {
                let vt = v.row(t);
                let base = (s * n + t) * h;
                let dst = &mut out.data_mut()[base..base + h];
                for k in 0..h {
                    dst[k] = us[k] + vt[k];
                }
            }
        }
        self.push(out, Op::PairwiseConcatLinear(x, w))
    }

    pub fn reshape(&mut self, x: Var, rows: usize, cols: usize) -> Result<Var, TensorError> {
        if rows * cols != self.value(x).len() {
            return Err(TensorError::InvalidArgument(format!(
                "cannot reshape {:?} into ({rows}, {cols})",
                self.value(x).shape()
            )));
        }
        let out = self.value(x).clone().reshaped(rows, cols);
        self.push(out, Op::Reshape(x))
    }

    /// `(A + A^T) / 2` with the diagonal overwritten by exactly 1.
    pub fn symmetrize_unit_diag(&mut self, a: Var) -> Result<Var, TensorError> {
        let src = self.value(a);
        let (n, m) = src.shape();
        if n != m {
            return Err(TensorError::NonSquare(n, m));
        }
        let out = Matrix::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.5 * (src.get(i, j) + src.get(j, i)) });
        self.push(out, Op::SymmetrizeUnitDiag(a))
    }

    /// `D^{-1/2} A D^{-1/2}` with `D` the diagonal of row sums of `A`. Rows
    /// with non-positive sum are zeroed.
    pub fn sym_normalize(&mut self, a: Var) -> Result<Var, TensorError> {
        let src = self.value(a);
        let (n, m) = src.shape();
        if n != m {
            return Err(TensorError::NonSquare(n, m));
        }
        let s = inv_sqrt_degrees(src);
        let out = Matrix::from_fn(n, n, |i, j| src.get(i, j) * (s[i] * s[j]));
        self.push(out, Op::SymNormalize(a))
    }

    /// Reverse pass from the scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients, TensorError> {
        let shape = self.value(loss).shape();
        if shape != (1, 1) {
            return Err(TensorError::NonScalarLoss(shape));
        }
        let mut grads: Vec<Option<Matrix>> = vec![None; self.nodes.len()];
        if !self.nodes[loss.0].requires_grad {
            return Ok(Gradients { grads });
        }
        grads[loss.0] = Some(Matrix::filled(1, 1, 1.0));

        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.requires_grad || matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(mut g) = grads[idx].take() else { continue };
            if self.fault == Some(node.op.kind()) {
                g.scale(0.5);
            }
            self.propagate(idx, &g, &mut grads);
        }
        // only leaves keep their gradients; interior slots were consumed
        Ok(Gradients { grads })
    }

    fn accumulate(&self, grads: &mut [Option<Matrix>], v: Var, g: Matrix) {
        if !self.nodes[v.0].requires_grad {
            return;
        }
        match &mut grads[v.0] {
            Some(acc) => acc.add_assign(&g),
            slot @ None => *slot = Some(g),
        }
    }

    fn propagate(&self, idx: usize, g: &Matrix, grads: &mut [Option<Matrix>]) {
        let node = &self.nodes[idx];
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                if self.requires_grad(*a) {
                    self.accumulate(grads, *a, g.matmul_nt(self.value(*b)));
                }
                if self.requires_grad(*b) {
                    self.accumulate(grads, *b, self.value(*a).matmul_tn(g));
                }
            }
            Op::Add(a, b) => {
                self.accumulate(grads, *a, g.clone());
                self.accumulate(grads, *b, g.clone());
            }
            Op::Mul(a, b) => {
                let hadamard = |m: &Matrix| {
                    Matrix::from_vec(g.rows(), g.cols(), g.data().iter().zip(m.data()).map(|(p, q)| p * q).collect())
                };
                if self.requires_grad(*a) {
                    self.accumulate(grads, *a, hadamard(self.value(*b)));
                }
                if self.requires_grad(*b) {
                    self.accumulate(grads, *b, hadamard(self.value(*a)));
                }
            }
            Op::AddBias(x, b) => {
                self.accumulate(grads, *x, g.clone());
                if self.requires_grad(*b) {
                    let c = g.cols();
                    let mut gb = Matrix::zeros(1, c);
                    for i in 0..g.rows() {
                        for (o, v) in gb.data_mut().iter_mut().zip(g.row(i)) {
                            *o += v;
                        }
                    }
                    self.accumulate(grads, *b, gb);
                }
            }
            Op::Relu(x) => {
                let xv = self.value(*x);
                let out = Matrix::from_vec(
                    g.rows(),
                    g.cols(),
                    g.data().iter().zip(xv.data()).map(|(&gv, &v)| if v > 0.0 { gv } else { 0.0 }).collect(),
                );
                self.accumulate(grads, *x, out);
            }
            Op::Sigmoid(x) => {
                let y = &node.value;
                let out = Matrix::from_vec(
                    g.rows(),
                    g.cols(),
                    g.data().iter().zip(y.data()).map(|(&gv, &s)| gv * s * (1.0 - s)).collect(),
                );
                self.accumulate(grads, *x, out);
            }
            Op::Dropout(x, mask) => {
                let out = Matrix::from_vec(g.rows(), g.cols(), g.data().iter().zip(mask).map(|(a, m)| a * m).collect());
                self.accumulate(grads, *x, out);
            }
            Op::MeanRows(x) => {
                let n = self.value(*x).rows();
                let inv = 1.0 / n as f64;
                let out = Matrix::from_fn(n, g.cols(), |_, j| g.get(0, j) * inv);
                self.accumulate(grads, *x, out);
            }
            Op::ConcatCols(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let c = self.value(p).cols();
                    if self.requires_grad(p) {
                        let out = Matrix::from_fn(g.rows(), c, |i, j| g.get(i, offset + j));
                        self.accumulate(grads, p, out);
                    }
                    offset += c;
                }
            }
            Op::AbsSum(x) => {
                let s = g.get(0, 0);
                let out = self.value(*x).map(|v| {
                    if v > 0.0 {
                        s
                    } else if v < 0.0 {
                        -s
                    } else {
                        0.0
                    }
                });
                self.accumulate(grads, *x, out);
            }
            Op::Sum(x) => {
                let (r, c) = self.value(*x).shape();
                self.accumulate(grads, *x, Matrix::filled(r, c, g.get(0, 0)));
            }
            Op::ScalarMul(x, s) => {
                let out = g.map(|v| v * s);
                self.accumulate(grads, *x, out);
            }
            Op::ScalarAdd(x) => self.accumulate(grads, *x, g.clone()),
            Op::SoftmaxRows(x) => {
                let y = &node.value;
                let c = y.cols();
                let mut out = Matrix::zeros(y.rows(), c);
                for i in 0..y.rows() {
                    let (yr, gr) = (y.row(i), g.row(i));
                    let dot: f64 = yr.iter().zip(gr).map(|(a, b)| a * b).sum();
                    for j in 0..c {
                        out.set(i, j, yr[j] * (gr[j] - dot));
                    }
                }
                self.accumulate(grads, *x, out);
            }
            Op::SoftmaxCrossEntropy(x, targets) => {
                let logits = self.value(*x);
                let n = logits.rows();
                let scale = g.get(0, 0) / n as f64;
                let mut out = logits.clone();
                for (i, row) in out.data_mut().chunks_mut(logits.cols()).enumerate() {
                    softmax_in_place(row);
                    row[targets[i]] -= 1.0;
                    for v in row.iter_mut() {
                        *v *= scale;
                    }
                }
                self.accumulate(grads, *x, out);
            }
            Op::PairwiseConcatLinear(x, w) => {
                let xv = self.value(*x);
                let (n, d) = xv.shape();
                let h = g.cols();
                // row sums over t and column sums over s of the n x n x h gradient
                let mut gu = Matrix::zeros(n, h);
                let mut gv = Matrix::zeros(n, h);
                for s in 0..n {
                    for t in 0..n {
                        let row = g.row(s * n + t);
                        let base_s = s * h;
                        let base_t = t * h;
                        for k in 0..h {
                            gu.data_mut()[base_s + k] += row[k];
                            gv.data_mut()[base_t + k] += row[k];
                        }
                    }
                }
                if self.requires_grad(*w) {
                    let top = xv.matmul_tn(&gu);
                    let bot = xv.matmul_tn(&gv);
                    let mut data = top.into_data();
                    data.extend(bot.into_data());
                    self.accumulate(grads, *w, Matrix::from_vec(2 * d, h, data));
                }
                if self.requires_grad(*x) {
                    let (w_top, w_bot) = split_rows(self.value(*w), d);
                    let mut gx = gu.matmul_nt(&w_top);
                    gx.add_assign(&gv.matmul_nt(&w_bot));
                    self.accumulate(grads, *x, gx);
                }
            }
            Op::Reshape(x) => {
                let (r, c) = self.value(*x).shape();
                self.accumulate(grads, *x, g.clone().reshaped(r, c));
            }
            Op::SymmetrizeUnitDiag(x) => {
                let n = g.rows();
                let out = Matrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { 0.5 * (g.get(i, j) + g.get(j, i)) });
                self.accumulate(grads, *x, out);
            }
            Op::SymNormalize(x) => {
                let a = self.value(*x);
                let n = a.rows();
                let s = inv_sqrt_degrees(a);
                let mut row_term = vec![0.0; n];
                let mut col_term = vec![0.0; n];
                for i in 0..n {
                    for j in 0..n {
                        let w = g.get(i, j) * a.get(i, j);
                        row_term[i] += w * s[j];
                        col_term[j] += w * s[i];
                    }
                }
                let out = Matrix::from_fn(n, n, |k, l| {
                    g.get(k, l) * s[k] * s[l] - 0.5 * s[k] * s[k] * s[k] * (row_term[k] + col_term[k])
                });
                self.accumulate(grads, *x, out);
            }
        }
    }
}

fn split_rows(w: &Matrix, d: usize) -> (Matrix, Matrix) {
    let h = w.cols();
    let top = Matrix::from_vec(d, h, w.data()[..d * h].to_vec());
    let bot = Matrix::from_vec(w.rows() - d, h, w.data()[d * h..].to_vec());
    (top, bot)
}

fn inv_sqrt_degrees(a: &Matrix) -> Vec<f64> {
    (0..a.rows())
        .map(|i| {
            let d: f64 = a.row(i).iter().sum();
            if d > 0.0 {
                1.0 / d.sqrt()
            } else {
                0.0
            }
        })
        .collect()
}

fn log_sum_exp(row: &[f64]) -> f64 {
    let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + row.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

pub(crate) fn softmax_in_place(row: &mut [f64]) {
    let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for v in row.iter_mut() {
        *v = (*v - m).exp();
        total += *v;
    }
    for v in row.iter_mut() {
        *v /= total;
    }
}
