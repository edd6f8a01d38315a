use std::sync::Arc;

use super::{AutodiffError, Tensor};
use crate::scalar::Scalar;

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op<T> {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Scale(Var, T),
    AddScalar(Var, T),
    Mul(Var, Var),
    ConcatCols(Var, Var),
    ConcatRows(Var, Var),
    Relu(Var),
    Sigmoid(Var),
    Log2OnePlus(Var),
    GatherRows(Var, Arc<[usize]>),
    SumPool(Var, Arc<[usize]>),
    /// Source row per output entry, `usize::MAX` for empty groups.
    MaxPool(Var, Vec<usize>),
    SumAll(Var),
}

#[derive(Debug, Clone)]
struct Node<T> {
    value: Tensor<T>,
    grad: Option<Vec<T>>,
    op: Op<T>,
    requires_grad: bool,
}

/// Define-by-run recording of a computation for reverse-mode
/// differentiation. Nodes are appended in evaluation order, so the tape is
/// always topologically sorted.
#[derive(Debug, Clone, Default)]
pub struct Tape<T> {
    nodes: Vec<Node<T>>,
}

fn mismatch(what: &str, a: (usize, usize), b: (usize, usize)) -> AutodiffError {
    AutodiffError::ShapeMismatch(format!("{what}: {}×{} vs {}×{}", a.0, a.1, b.0, b.1))
}

#[inline]
fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            grad: None,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// A trainable leaf; gradients are kept for it.
    pub fn param(&mut self, value: Tensor<T>) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// A leaf that is not differentiated.
    pub fn constant(&mut self, value: Tensor<T>) -> Var {
        self.push(value, Op::Leaf, false)
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    /// Gradient of the last [`backward`](Self::backward) loss with respect
    /// to `v`, if any flowed into it.
    pub fn grad(&self, v: Var) -> Option<&[T]> {
        self.nodes[v.0].grad.as_deref()
    }

    /// Gradient shaped like `v`, zero when nothing flowed into it.
    pub fn grad_tensor(&self, v: Var) -> Tensor<T> {
        let (r, c) = self.value(v).shape();
        match self.grad(v) {
            Some(g) => Tensor::new(r, c, g.to_vec()).expect("gradient matches value shape"),
            None => Tensor::zeros(r, c),
        }
    }

    pub fn zero_grad(&mut self) {
        for node in &mut self.nodes {
            node.grad = None;
        }
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        let value = self
            .value(a)
            .matmul(self.value(b))
            .map_err(|_| mismatch("matmul", self.value(a).shape(), self.value(b).shape()))?;
        let rg = self.needs(a) || self.needs(b);
        Ok(self.push(value, Op::MatMul(a, b), rg))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        let (x, y) = (self.value(a), self.value(b));
        if x.shape() != y.shape() {
            return Err(mismatch("add", x.shape(), y.shape()));
        }
        let data = x.data().iter().zip(y.data()).map(|(&p, &q)| p + q).collect();
        let value = Tensor::new(x.rows(), x.cols(), data)?;
        let rg = self.needs(a) || self.needs(b);
        Ok(self.push(value, Op::Add(a, b), rg))
    }

    /// `a - b` via scaling; recorded as two nodes.
    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        let neg = self.scale(b, -T::one());
        self.add(a, neg)
    }

    /// Adds the `1 × C` row `b` to every row of `a`.
    pub fn add_row(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        let (x, y) = (self.value(a), self.value(b));
        if y.rows() != 1 || y.cols() != x.cols() {
            return Err(mismatch("add_row", x.shape(), y.shape()));
        }
        let cols = x.cols();
        let data = x
            .data()
            .iter()
            .enumerate()
            .map(|(i, &p)| p + y.data()[i % cols])
            .collect();
        let value = Tensor::new(x.rows(), cols, data)?;
        let rg = self.needs(a) || self.needs(b);
        Ok(self.push(value, Op::AddRow(a, b), rg))
    }

    pub fn scale(&mut self, a: Var, s: T) -> Var {
        let value = self.value(a).map(|x| x * s);
        let rg = self.needs(a);
        self.push(value, Op::Scale(a, s), rg)
    }

    pub fn add_scalar(&mut self, a: Var, s: T) -> Var {
        let value = self.value(a).map(|x| x + s);
        let rg = self.needs(a);
        self.push(value, Op::AddScalar(a, s), rg)
    }

    /// Elementwise product of equally shaped tensors.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        let (x, y) = (self.value(a), self.value(b));
        if x.shape() != y.shape() {
            return Err(mismatch("mul", x.shape(), y.shape()));
        }
        let data = x.data().iter().zip(y.data()).map(|(&p, &q)| p * q).collect();
        let value = Tensor::new(x.rows(), x.cols(), data)?;
        let rg = self.needs(a) || self.needs(b);
        Ok(self.push(value, Op::Mul(a, b), rg))
    }

    /// `[a | b]` for tensors with the same row count.
    pub fn concat_cols(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        let (x, y) = (self.value(a), self.value(b));
        if x.rows() != y.rows() {
            return Err(mismatch("concat_cols", x.shape(), y.shape()));
        }
        let cols = x.cols() + y.cols();
        let mut data = Vec::with_capacity(x.rows() * cols);
        for r in 0..x.rows() {
            data.extend_from_slice(x.row(r));
            data.extend_from_slice(y.row(r));
        }
        let value = Tensor::new(x.rows(), cols, data)?;
        let rg = self.needs(a) || self.needs(b);
        Ok(self.push(value, Op::ConcatCols(a, b), rg))
    }

    /// `a` stacked above `b`.
    pub fn concat_rows(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        let (x, y) = (self.value(a), self.value(b));
        if x.cols() != y.cols() {
            return Err(mismatch("concat_rows", x.shape(), y.shape()));
        }
        let mut data = Vec::with_capacity(x.len() + y.len());
        data.extend_from_slice(x.data());
        data.extend_from_slice(y.data());
        let value = Tensor::new(x.rows() + y.rows(), x.cols(), data)?;
        let rg = self.needs(a) || self.needs(b);
        Ok(self.push(value, Op::ConcatRows(a, b), rg))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let value = self.value(a).map(|x| if x > T::zero() { x } else { T::zero() });
        let rg = self.needs(a);
        self.push(value, Op::Relu(a), rg)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let value = self.value(a).map(sigmoid);
        let rg = self.needs(a);
        self.push(value, Op::Sigmoid(a), rg)
    }

    /// `log2(1 + x)`; inputs must exceed −1.
    pub fn log2_1p(&mut self, a: Var) -> Var {
        let inv_ln2 = T::one() / T::of(std::f64::consts::LN_2);
        let value = self.value(a).map(|x| x.ln_1p() * inv_ln2);
        let rg = self.needs(a);
        self.push(value, Op::Log2OnePlus(a), rg)
    }

    /// Row `i` of the output is row `index[i]` of `a`.
    pub fn gather_rows(&mut self, a: Var, index: Arc<[usize]>) -> Result<Var, AutodiffError> {
        let x = self.value(a);
        if let Some(&bad) = index.iter().find(|&&i| i >= x.rows()) {
            return Err(AutodiffError::IndexOutOfRange {
                index: bad,
                len: x.rows(),
            });
        }
        let mut data = Vec::with_capacity(index.len() * x.cols());
        for &i in index.iter() {
            data.extend_from_slice(x.row(i));
        }
        let value = Tensor::new(index.len(), x.cols(), data)?;
        let rg = self.needs(a);
        Ok(self.push(value, Op::GatherRows(a, index), rg))
    }

    fn check_groups(&self, a: Var, group: &[usize], n_groups: usize) -> Result<(), AutodiffError> {
        let x = self.value(a);
        if group.len() != x.rows() {
            return Err(AutodiffError::ShapeMismatch(format!(
                "{} group labels for {} rows",
                group.len(),
                x.rows()
            )));
        }
        if let Some(&bad) = group.iter().find(|&&g| g >= n_groups) {
            return Err(AutodiffError::IndexOutOfRange {
                index: bad,
                len: n_groups,
            });
        }
        Ok(())
    }

    /// Sums the rows of `a` into `n_groups` buckets: output row `g` is the
    /// sum of every row `i` with `group[i] == g` (zero for empty buckets).
    pub fn sum_pool(&mut self, a: Var, group: Arc<[usize]>, n_groups: usize) -> Result<Var, AutodiffError> {
        self.check_groups(a, &group, n_groups)?;
        let x = self.value(a);
        let cols = x.cols();
        let mut out = Tensor::zeros(n_groups, cols);
        for (i, &g) in group.iter().enumerate() {
            let dst = &mut out.data_mut()[g * cols..(g + 1) * cols];
            for (d, &s) in dst.iter_mut().zip(x.row(i)) {
                *d += s;
            }
        }
        let rg = self.needs(a);
        Ok(self.push(out, Op::SumPool(a, group), rg))
    }

    /// Columnwise maximum over each bucket (zero for empty buckets). The
    /// gradient goes to the first row attaining the maximum.
    pub fn max_pool(&mut self, a: Var, group: Arc<[usize]>, n_groups: usize) -> Result<Var, AutodiffError> {
        self.check_groups(a, &group, n_groups)?;
        let x = self.value(a);
        let cols = x.cols();
        let mut source = vec![usize::MAX; n_groups * cols];
        let mut out = Tensor::zeros(n_groups, cols);
        for (i, &g) in group.iter().enumerate() {
            for (c, &v) in x.row(i).iter().enumerate() {
                let slot = g * cols + c;
                if source[slot] == usize::MAX || v > out.data()[slot] {
                    source[slot] = i;
                    out.data_mut()[slot] = v;
                }
            }
        }
        let rg = self.needs(a);
        Ok(self.push(out, Op::MaxPool(a, source), rg))
    }

    pub fn sum_all(&mut self, a: Var) -> Var {
        let total = self.value(a).data().iter().copied().sum();
        let rg = self.needs(a);
        self.push(Tensor::scalar(total), Op::SumAll(a), rg)
    }

    /// Accumulates gradients of the scalar `loss` into every node that
    /// depends on a parameter. Call [`zero_grad`](Self::zero_grad) first to
    /// start from scratch.
    pub fn backward(&mut self, loss: Var) -> Result<(), AutodiffError> {
        let shape = self.value(loss).shape();
        if shape != (1, 1) {
            return Err(AutodiffError::NonScalarLoss(shape.0, shape.1));
        }
        if !self.needs(loss) {
            return Ok(());
        }
        accumulate(&mut self.nodes[loss.0], &[T::one()]);
        for i in (0..=loss.0).rev() {
            if !self.nodes[i].requires_grad {
                continue;
            }
            let Some(grad) = self.nodes[i].grad.take() else {
                continue;
            };
            let (parents, rest) = self.nodes.split_at_mut(i);
            let node = &rest[0];
            propagate(parents, node, &grad);
            rest[0].grad = Some(grad);
        }
        Ok(())
    }
}

fn accumulate<T: Scalar>(node: &mut Node<T>, contribution: &[T]) {
    match &mut node.grad {
        Some(g) => {
            for (a, &b) in g.iter_mut().zip(contribution) {
                *a += b;
            }
        }
        None => node.grad = Some(contribution.to_vec()),
    }
}

/// Pushes `grad` (the gradient of `node`) into the node's parents.
fn propagate<T: Scalar>(parents: &mut [Node<T>], node: &Node<T>, grad: &[T]) {
    let out = &node.value;
    match &node.op {
        Op::Leaf => {}
        Op::MatMul(a, b) => {
            let (m, k) = parents[a.0].value.shape();
            let n = parents[b.0].value.cols();
            if parents[a.0].requires_grad {
                // dA = dC · Bᵀ
                let mut da = vec![T::zero(); m * k];
                T::gemm(m, n, k, grad, n, 1, parents[b.0].value.data(), 1, n, &mut da, k, 1);
                accumulate(&mut parents[a.0], &da);
            }
            if parents[b.0].requires_grad {
                // dB = Aᵀ · dC
                let mut db = vec![T::zero(); k * n];
                T::gemm(k, m, n, parents[a.0].value.data(), 1, k, grad, n, 1, &mut db, n, 1);
                accumulate(&mut parents[b.0], &db);
            }
        }
        Op::Add(a, b) => {
            for p in [a, b] {
                if parents[p.0].requires_grad {
                    accumulate(&mut parents[p.0], grad);
                }
            }
        }
        Op::AddRow(a, b) => {
            if parents[a.0].requires_grad {
                accumulate(&mut parents[a.0], grad);
            }
            if parents[b.0].requires_grad {
                let cols = out.cols();
                let mut db = vec![T::zero(); cols];
                for row in grad.chunks_exact(cols) {
                    for (d, &g) in db.iter_mut().zip(row) {
                        *d += g;
                    }
                }
                accumulate(&mut parents[b.0], &db);
            }
        }
        Op::Scale(a, s) => {
            let d: Vec<T> = grad.iter().map(|&g| g * *s).collect();
            accumulate(&mut parents[a.0], &d);
        }
        Op::AddScalar(a, _) => accumulate(&mut parents[a.0], grad),
        Op::Mul(a, b) => {
            if parents[a.0].requires_grad {
                let d: Vec<T> = grad
                    .iter()
                    .zip(parents[b.0].value.data())
                    .map(|(&g, &y)| g * y)
                    .collect();
                accumulate(&mut parents[a.0], &d);
            }
            if parents[b.0].requires_grad {
                let d: Vec<T> = grad
                    .iter()
                    .zip(parents[a.0].value.data())
                    .map(|(&g, &x)| g * x)
                    .collect();
                accumulate(&mut parents[b.0], &d);
            }
        }
        Op::ConcatCols(a, b) => {
            let ca = parents[a.0].value.cols();
            let cols = out.cols();
            if parents[a.0].requires_grad {
                let d: Vec<T> = grad.chunks_exact(cols).flat_map(|r| r[..ca].iter().copied()).collect();
                accumulate(&mut parents[a.0], &d);
            }
            if parents[b.0].requires_grad {
                let d: Vec<T> = grad.chunks_exact(cols).flat_map(|r| r[ca..].iter().copied()).collect();
                accumulate(&mut parents[b.0], &d);
            }
        }
        Op::ConcatRows(a, b) => {
            let split = parents[a.0].value.len();
            if parents[a.0].requires_grad {
                accumulate(&mut parents[a.0], &grad[..split]);
            }
            if parents[b.0].requires_grad {
                accumulate(&mut parents[b.0], &grad[split..]);
            }
        }
        Op::Relu(a) => {
            let d: Vec<T> = grad
                .iter()
                .zip(parents[a.0].value.data())
                .map(|(&g, &x)| if x > T::zero() { g } else { T::zero() })
                .collect();
            accumulate(&mut parents[a.0], &d);
        }
        Op::Sigmoid(a) => {
            // σ(x)·σ(−x) rather than y·(1 − y): stays nonzero after y has
            // rounded to 0 or 1
            let d: Vec<T> = grad
                .iter()
                .zip(out.data())
                .zip(parents[a.0].value.data())
                .map(|((&g, &y), &x)| g * y * sigmoid(-x))
                .collect();
            accumulate(&mut parents[a.0], &d);
        }
        Op::Log2OnePlus(a) => {
            let ln2 = T::of(std::f64::consts::LN_2);
            let d: Vec<T> = grad
                .iter()
                .zip(parents[a.0].value.data())
                .map(|(&g, &x)| g / ((T::one() + x) * ln2))
                .collect();
            accumulate(&mut parents[a.0], &d);
        }
        Op::GatherRows(a, index) => {
            let src = &parents[a.0].value;
            let cols = src.cols();
            let mut d = vec![T::zero(); src.len()];
            for (row, &i) in grad.chunks_exact(cols.max(1)).zip(index.iter()) {
                for (dst, &g) in d[i * cols..(i + 1) * cols].iter_mut().zip(row) {
                    *dst += g;
                }
            }
            accumulate(&mut parents[a.0], &d);
        }
        Op::SumPool(a, group) => {
            let cols = out.cols();
            let mut d = Vec::with_capacity(group.len() * cols);
            for &g in group.iter() {
                d.extend_from_slice(&grad[g * cols..(g + 1) * cols]);
            }
            accumulate(&mut parents[a.0], &d);
        }
        Op::MaxPool(a, source) => {
            let cols = out.cols();
            let mut d = vec![T::zero(); parents[a.0].value.len()];
            for (slot, &i) in source.iter().enumerate() {
                if i != usize::MAX {
                    d[i * cols + slot % cols] += grad[slot];
                }
            }
            accumulate(&mut parents[a.0], &d);
        }
        Op::SumAll(a) => {
            let d = vec![grad[0]; parents[a.0].value.len()];
            accumulate(&mut parents[a.0], &d);
        }
    }
}
