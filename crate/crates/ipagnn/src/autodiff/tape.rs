//! The recording tape. Each primitive stores its inputs and forward value;
//! `backward` walks the records once in reverse, accumulating adjoints.
//! Shape violations are programming errors and panic with both shapes.

use thiserror::Error;

use super::tensor::{matmul_acc, matmul_nt_acc, matmul_tn_acc, Element, Tensor};

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ValueId(usize);

#[derive(Debug, Error, PartialEq, Eq)]
pub enum BackwardError {
    #[error("loss must be a scalar, got shape {shape:?}")]
    NonScalarLoss { shape: Vec<usize> },
    #[error("backward already ran on this tape; build a fresh tape instead")]
    DoubleBackward,
}

enum Op<E> {
    Leaf,
    MatMul(ValueId, ValueId),
    Add(ValueId, ValueId),
    /// `[m,n] + [n]`, the bias pattern.
    AddRow(ValueId, ValueId),
    Mul(ValueId, ValueId),
    /// Row `i` of the left operand scaled by element `i` of the right.
    MulCol(ValueId, ValueId),
    Sigmoid(ValueId),
    Tanh(ValueId),
    Softmax(ValueId),
    LogSoftmax(ValueId),
    Log(ValueId),
    Scale(ValueId, E),
    Concat0(ValueId, ValueId),
    Concat1(ValueId, ValueId),
    SliceCols(ValueId, usize),
    RowGather(ValueId, Vec<usize>),
    RowScatterAdd(ValueId, Vec<usize>),
    GatherElems(ValueId, Vec<(usize, usize)>),
    Reshape(ValueId),
    SumAll(ValueId),
    SumAxis0(ValueId),
    SumAxis1(ValueId),
}

struct Node<E> {
    op: Op<E>,
    value: Tensor<E>,
}

/// A single-use forward/backward recording.
pub struct Tape<E> {
    nodes: Vec<Node<E>>,
    grads: Vec<Option<Tensor<E>>>,
    backward_done: bool,
}

impl<E: Element> Default for Tape<E> {
    fn default() -> Self {
        Self::new()
    }
}

impl<E: Element> Tape<E> {
    pub fn new() -> Self {
        Tape {
            nodes: Vec::new(),
            grads: Vec::new(),
            backward_done: false,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: ValueId) -> &Tensor<E> {
        &self.nodes[id.0].value
    }

    /// The accumulated adjoint of `id`; `None` until backward runs or when
    /// the value does not influence the loss.
    pub fn grad(&self, id: ValueId) -> Option<&Tensor<E>> {
        self.grads[id.0].as_ref()
    }

    fn push(&mut self, op: Op<E>, value: Tensor<E>) -> ValueId {
        self.nodes.push(Node { op, value });
        self.grads.push(None);
        ValueId(self.nodes.len() - 1)
    }

    pub fn leaf(&mut self, value: Tensor<E>) -> ValueId {
        self.push(Op::Leaf, value)
    }

    pub fn matmul(&mut self, a: ValueId, b: ValueId) -> ValueId {
        let (ta, tb) = (self.value(a), self.value(b));
        assert!(
            ta.rank() == 2 && tb.rank() == 2 && ta.cols() == tb.rows(),
            "matmul shape mismatch: {:?} @ {:?}",
            ta.shape(),
            tb.shape()
        );
        let (m, k, n) = (ta.rows(), ta.cols(), tb.cols());
        let mut out = Tensor::zeros(&[m, n]);
        matmul_acc(out.data_mut(), ta.data(), tb.data(), m, k, n);
        self.push(Op::MatMul(a, b), out)
    }

    pub fn add(&mut self, a: ValueId, b: ValueId) -> ValueId {
        let (ta, tb) = (self.value(a), self.value(b));
        assert_eq!(
            ta.shape(),
            tb.shape(),
            "add shape mismatch: {:?} + {:?}",
            ta.shape(),
            tb.shape()
        );
        let mut out = ta.clone();
        out.add_assign(tb);
        self.push(Op::Add(a, b), out)
    }

    /// Adds a `[n]` vector to every row of a `[m,n]` matrix.
    pub fn add_row(&mut self, a: ValueId, b: ValueId) -> ValueId {
        let (ta, tb) = (self.value(a), self.value(b));
        assert!(
            ta.rank() == 2 && tb.rank() == 1 && ta.cols() == tb.len(),
            "add_row shape mismatch: {:?} + {:?}",
            ta.shape(),
            tb.shape()
        );
        let mut out = ta.clone();
        for i in 0..out.rows() {
            for (o, &bv) in out.row_mut(i).iter_mut().zip(tb.data()) {
                *o += bv;
            }
        }
        self.push(Op::AddRow(a, b), out)
    }

    pub fn mul(&mut self, a: ValueId, b: ValueId) -> ValueId {
        let (ta, tb) = (self.value(a), self.value(b));
        assert_eq!(
            ta.shape(),
            tb.shape(),
            "mul shape mismatch: {:?} * {:?}",
            ta.shape(),
            tb.shape()
        );
        let data = ta
            .data()
            .iter()
            .zip(tb.data())
            .map(|(&x, &y)| x * y)
            .collect();
        let out = Tensor::from_vec(ta.shape(), data);
        self.push(Op::Mul(a, b), out)
    }

    /// Scales row `i` of `a` by element `i` of column vector `v`
    /// (shape `[m]` or `[m,1]`).
    pub fn mul_col(&mut self, a: ValueId, v: ValueId) -> ValueId {
        let (ta, tv) = (self.value(a), self.value(v));
        assert!(
            ta.rank() == 2 && tv.len() == ta.rows(),
            "mul_col shape mismatch: {:?} x {:?}",
            ta.shape(),
            tv.shape()
        );
        let mut out = ta.clone();
        for i in 0..out.rows() {
            let s = tv.data()[i];
            for o in out.row_mut(i) {
                *o *= s;
            }
        }
        self.push(Op::MulCol(a, v), out)
    }

    pub fn sigmoid(&mut self, a: ValueId) -> ValueId {
        let one = E::one();
        let data = self
            .value(a)
            .data()
            .iter()
            .map(|&x| one / (one + (-x).exp()))
            .collect();
        let out = Tensor::from_vec(self.value(a).shape(), data);
        self.push(Op::Sigmoid(a), out)
    }

    pub fn tanh(&mut self, a: ValueId) -> ValueId {
        let data = self.value(a).data().iter().map(|&x| x.tanh()).collect();
        let out = Tensor::from_vec(self.value(a).shape(), data);
        self.push(Op::Tanh(a), out)
    }

    fn last_axis_rows(t: &Tensor<E>) -> (usize, usize) {
        match t.rank() {
            1 => (1, t.len()),
            2 => (t.shape()[0], t.shape()[1]),
            r => panic!("softmax expects rank 1 or 2, got rank {r}"),
        }
    }

    /// Softmax over the last axis (whole vector for rank 1, rows for rank 2).
    pub fn softmax(&mut self, a: ValueId) -> ValueId {
        let ta = self.value(a);
        let (rows, cols) = Self::last_axis_rows(ta);
        let mut data = ta.data().to_vec();
        for r in 0..rows {
            let row = &mut data[r * cols..(r + 1) * cols];
            let max = row.iter().cloned().fold(E::neg_infinity(), E::max);
            let mut sum = E::zero();
            for v in row.iter_mut() {
                *v = (*v - max).exp();
                sum += *v;
            }
            for v in row.iter_mut() {
                *v /= sum;
            }
        }
        let out = Tensor::from_vec(ta.shape(), data);
        self.push(Op::Softmax(a), out)
    }

    /// Numerically stable `x - logsumexp(x)` over the last axis.
    pub fn log_softmax(&mut self, a: ValueId) -> ValueId {
        let ta = self.value(a);
        let (rows, cols) = Self::last_axis_rows(ta);
        let mut data = ta.data().to_vec();
        for r in 0..rows {
            let row = &mut data[r * cols..(r + 1) * cols];
            let max = row.iter().cloned().fold(E::neg_infinity(), E::max);
            let lse = max
                + row
                    .iter()
                    .map(|&v| (v - max).exp())
                    .sum::<E>()
                    .ln();
            for v in row.iter_mut() {
                *v -= lse;
            }
        }
        let out = Tensor::from_vec(ta.shape(), data);
        self.push(Op::LogSoftmax(a), out)
    }

    pub fn log(&mut self, a: ValueId) -> ValueId {
        let data = self.value(a).data().iter().map(|&x| x.ln()).collect();
        let out = Tensor::from_vec(self.value(a).shape(), data);
        self.push(Op::Log(a), out)
    }

    pub fn scale(&mut self, a: ValueId, c: E) -> ValueId {
        let mut out = self.value(a).clone();
        out.scale_assign(c);
        self.push(Op::Scale(a, c), out)
    }

    /// Concatenates along axis 0 (vectors end to end, matrices row-wise).
    pub fn concat0(&mut self, a: ValueId, b: ValueId) -> ValueId {
        let (ta, tb) = (self.value(a), self.value(b));
        assert_eq!(ta.rank(), tb.rank(), "concat0 rank mismatch");
        let shape = match ta.rank() {
            1 => vec![ta.len() + tb.len()],
            2 => {
                assert_eq!(
                    ta.cols(),
                    tb.cols(),
                    "concat0 shape mismatch: {:?} | {:?}",
                    ta.shape(),
                    tb.shape()
                );
                vec![ta.rows() + tb.rows(), ta.cols()]
            }
            r => panic!("concat0 expects rank 1 or 2, got rank {r}"),
        };
        let mut data = Vec::with_capacity(ta.len() + tb.len());
        data.extend_from_slice(ta.data());
        data.extend_from_slice(tb.data());
        let out = Tensor::from_vec(&shape, data);
        self.push(Op::Concat0(a, b), out)
    }

    /// Concatenates two matrices column-wise.
    pub fn concat1(&mut self, a: ValueId, b: ValueId) -> ValueId {
        let (ta, tb) = (self.value(a), self.value(b));
        assert!(
            ta.rank() == 2 && tb.rank() == 2 && ta.rows() == tb.rows(),
            "concat1 shape mismatch: {:?} | {:?}",
            ta.shape(),
            tb.shape()
        );
        let rows = ta.rows();
        let mut data = Vec::with_capacity(ta.len() + tb.len());
        for i in 0..rows {
            data.extend_from_slice(ta.row(i));
            data.extend_from_slice(tb.row(i));
        }
        let out = Tensor::from_vec(&[rows, ta.cols() + tb.cols()], data);
        self.push(Op::Concat1(a, b), out)
    }

    /// Copies the column range `start..end` of a matrix.
    pub fn slice_cols(&mut self, a: ValueId, start: usize, end: usize) -> ValueId {
        let ta = self.value(a);
        assert!(
            ta.rank() == 2 && start < end && end <= ta.cols(),
            "slice_cols {start}..{end} out of bounds for shape {:?}",
            ta.shape()
        );
        let rows = ta.rows();
        let mut data = Vec::with_capacity(rows * (end - start));
        for i in 0..rows {
            data.extend_from_slice(&ta.row(i)[start..end]);
        }
        let out = Tensor::from_vec(&[rows, end - start], data);
        self.push(Op::SliceCols(a, start), out)
    }

    /// Selects rows of a matrix by index; duplicates allowed.
    pub fn row_gather(&mut self, a: ValueId, indices: Vec<usize>) -> ValueId {
        let ta = self.value(a);
        assert_eq!(ta.rank(), 2, "row_gather on shape {:?}", ta.shape());
        let cols = ta.cols();
        let mut data = Vec::with_capacity(indices.len() * cols);
        for &i in &indices {
            assert!(i < ta.rows(), "row index {i} out of {} rows", ta.rows());
            data.extend_from_slice(ta.row(i));
        }
        let out = Tensor::from_vec(&[indices.len(), cols], data);
        self.push(Op::RowGather(a, indices), out)
    }

    /// Scatters rows of `a` into a `[rows, cols]` zero matrix, summing rows
    /// sent to the same destination.
    pub fn row_scatter_add(&mut self, a: ValueId, indices: Vec<usize>, rows: usize) -> ValueId {
        let ta = self.value(a);
        assert!(
            ta.rank() == 2 && ta.rows() == indices.len(),
            "row_scatter_add: {} indices for shape {:?}",
            indices.len(),
            ta.shape()
        );
        let cols = ta.cols();
        let mut out = Tensor::zeros(&[rows, cols]);
        for (i, &dst) in indices.iter().enumerate() {
            assert!(dst < rows, "scatter destination {dst} out of {rows} rows");
            for (o, &v) in out.row_mut(dst).iter_mut().zip(ta.row(i)) {
                *o += v;
            }
        }
        self.push(Op::RowScatterAdd(a, indices), out)
    }

    /// Gathers single elements `(row, col)` of a matrix into a `[k,1]` column.
    pub fn gather_elems(&mut self, a: ValueId, indices: Vec<(usize, usize)>) -> ValueId {
        let ta = self.value(a);
        assert_eq!(ta.rank(), 2, "gather_elems on shape {:?}", ta.shape());
        let data = indices
            .iter()
            .map(|&(r, c)| {
                assert!(
                    r < ta.rows() && c < ta.cols(),
                    "element ({r},{c}) out of shape {:?}",
                    ta.shape()
                );
                ta.row(r)[c]
            })
            .collect();
        let out = Tensor::from_vec(&[indices.len(), 1], data);
        self.push(Op::GatherElems(a, indices), out)
    }

    pub fn reshape(&mut self, a: ValueId, shape: &[usize]) -> ValueId {
        let ta = self.value(a);
        let want: usize = if shape.is_empty() {
            1
        } else {
            shape.iter().product()
        };
        assert_eq!(
            ta.len(),
            want,
            "reshape {:?} -> {shape:?} changes element count",
            ta.shape()
        );
        let out = Tensor::from_vec(shape, ta.data().to_vec());
        self.push(Op::Reshape(a), out)
    }

    pub fn sum_all(&mut self, a: ValueId) -> ValueId {
        let s: E = self.value(a).data().iter().cloned().sum();
        self.push(Op::SumAll(a), Tensor::scalar(s))
    }

    /// Column sums: `[m,n] -> [n]`.
    pub fn sum_axis0(&mut self, a: ValueId) -> ValueId {
        let ta = self.value(a);
        assert_eq!(ta.rank(), 2, "sum_axis0 on shape {:?}", ta.shape());
        let (rows, cols) = (ta.rows(), ta.cols());
        let mut data = vec![E::zero(); cols];
        for i in 0..rows {
            for (d, &v) in data.iter_mut().zip(ta.row(i)) {
                *d += v;
            }
        }
        let out = Tensor::from_vec(&[cols], data);
        self.push(Op::SumAxis0(a), out)
    }

    /// Row sums: `[m,n] -> [m]`.
    pub fn sum_axis1(&mut self, a: ValueId) -> ValueId {
        let ta = self.value(a);
        assert_eq!(ta.rank(), 2, "sum_axis1 on shape {:?}", ta.shape());
        let data = (0..ta.rows())
            .map(|i| ta.row(i).iter().cloned().sum())
            .collect();
        let out = Tensor::from_vec(&[ta.rows()], data);
        self.push(Op::SumAxis1(a), out)
    }

    fn accumulate(slot: &mut Option<Tensor<E>>, shape: &[usize], add: impl FnOnce(&mut Tensor<E>)) {
        let g = slot.get_or_insert_with(|| Tensor::zeros(shape));
        add(g);
    }

    /// Propagates adjoints from a scalar loss back to every recorded value.
    pub fn backward(&mut self, loss: ValueId) -> Result<(), BackwardError> {
        if self.backward_done {
            return Err(BackwardError::DoubleBackward);
        }
        if self.value(loss).len() != 1 {
            return Err(BackwardError::NonScalarLoss {
                shape: self.value(loss).shape().to_vec(),
            });
        }
        self.backward_done = true;
        self.grads[loss.0] = Some(Tensor::from_vec(
            self.value(loss).shape(),
            vec![E::one()],
        ));

        for i in (0..self.nodes.len()).rev() {
            let Some(g) = self.grads[i].take() else {
                continue;
            };
            self.propagate(i, &g);
            self.grads[i] = Some(g);
        }
        Ok(())
    }

    fn propagate(&mut self, i: usize, g: &Tensor<E>) {
        // Grad slots of inputs always have smaller indices than `i`, so the
        // splits below never alias.
        match &self.nodes[i].op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (a, b) = (*a, *b);
                let (m, k) = (self.value(a).rows(), self.value(a).cols());
                let n = self.value(b).cols();
                let da = {
                    let mut da = Tensor::zeros(&[m, k]);
                    matmul_nt_acc(da.data_mut(), g.data(), self.value(b).data(), m, n, k);
                    da
                };
                let db = {
                    let mut db = Tensor::zeros(&[k, n]);
                    matmul_tn_acc(db.data_mut(), self.value(a).data(), g.data(), m, k, n);
                    db
                };
                Self::accumulate(&mut self.grads[a.0], &[m, k], |t| t.add_assign(&da));
                Self::accumulate(&mut self.grads[b.0], &[k, n], |t| t.add_assign(&db));
            }
            Op::Add(a, b) => {
                let (a, b) = (*a, *b);
                let shape = g.shape().to_vec();
                Self::accumulate(&mut self.grads[a.0], &shape, |t| t.add_assign(g));
                Self::accumulate(&mut self.grads[b.0], &shape, |t| t.add_assign(g));
            }
            Op::AddRow(a, b) => {
                let (a, b) = (*a, *b);
                let (rows, cols) = (g.rows(), g.cols());
                let mut colsum = vec![E::zero(); cols];
                for i in 0..rows {
                    for (s, &v) in colsum.iter_mut().zip(g.row(i)) {
                        *s += v;
                    }
                }
                let db = Tensor::from_vec(&[cols], colsum);
                Self::accumulate(&mut self.grads[a.0], &[rows, cols], |t| t.add_assign(g));
                Self::accumulate(&mut self.grads[b.0], &[cols], |t| t.add_assign(&db));
            }
            Op::Mul(a, b) => {
                let (a, b) = (*a, *b);
                let shape = g.shape().to_vec();
                let da = {
                    let tb = self.value(b);
                    let data = g.data().iter().zip(tb.data()).map(|(&x, &y)| x * y).collect();
                    Tensor::from_vec(&shape, data)
                };
                let db = {
                    let ta = self.value(a);
                    let data = g.data().iter().zip(ta.data()).map(|(&x, &y)| x * y).collect();
                    Tensor::from_vec(&shape, data)
                };
                Self::accumulate(&mut self.grads[a.0], &shape, |t| t.add_assign(&da));
                Self::accumulate(&mut self.grads[b.0], &shape, |t| t.add_assign(&db));
            }
            Op::MulCol(a, v) => {
                let (a, v) = (*a, *v);
                let (rows, cols) = (g.rows(), g.cols());
                let vshape = self.value(v).shape().to_vec();
                let da = {
                    let tv = self.value(v);
                    let mut da = g.clone();
                    for i in 0..rows {
                        let s = tv.data()[i];
                        for x in da.row_mut(i) {
                            *x *= s;
                        }
                    }
                    da
                };
                let dv = {
                    let ta = self.value(a);
                    let data: Vec<E> = (0..rows)
                        .map(|i| {
                            g.row(i)
                                .iter()
                                .zip(ta.row(i))
                                .map(|(&x, &y)| x * y)
                                .sum()
                        })
                        .collect();
                    Tensor::from_vec(&vshape, data)
                };
                Self::accumulate(&mut self.grads[a.0], &[rows, cols], |t| t.add_assign(&da));
                Self::accumulate(&mut self.grads[v.0], &vshape, |t| t.add_assign(&dv));
            }
            Op::Sigmoid(a) => {
                let a = *a;
                let out = &self.nodes[i].value;
                let data = g
                    .data()
                    .iter()
                    .zip(out.data())
                    .map(|(&gv, &s)| gv * s * (E::one() - s))
                    .collect();
                let da = Tensor::from_vec(g.shape(), data);
                let shape = g.shape().to_vec();
                Self::accumulate(&mut self.grads[a.0], &shape, |t| t.add_assign(&da));
            }
            Op::Tanh(a) => {
                let a = *a;
                let out = &self.nodes[i].value;
                let data = g
                    .data()
                    .iter()
                    .zip(out.data())
                    .map(|(&gv, &th)| gv * (E::one() - th * th))
                    .collect();
                let da = Tensor::from_vec(g.shape(), data);
                let shape = g.shape().to_vec();
                Self::accumulate(&mut self.grads[a.0], &shape, |t| t.add_assign(&da));
            }
            Op::Softmax(a) => {
                // dx = s * (g - <g, s>) per row, the fused Jacobian-vector form.
                let a = *a;
                let out = &self.nodes[i].value;
                let (rows, cols) = Self::last_axis_rows(out);
                let mut data = vec![E::zero(); rows * cols];
                for r in 0..rows {
                    let s = &out.data()[r * cols..(r + 1) * cols];
                    let gr = &g.data()[r * cols..(r + 1) * cols];
                    let dot: E = s.iter().zip(gr).map(|(&sv, &gv)| sv * gv).sum();
                    for ((d, &sv), &gv) in data[r * cols..(r + 1) * cols]
                        .iter_mut()
                        .zip(s)
                        .zip(gr)
                    {
                        *d = sv * (gv - dot);
                    }
                }
                let da = Tensor::from_vec(g.shape(), data);
                let shape = g.shape().to_vec();
                Self::accumulate(&mut self.grads[a.0], &shape, |t| t.add_assign(&da));
            }
            Op::LogSoftmax(a) => {
                // dx = g - softmax(x) * sum(g) per row; softmax = exp(out).
                let a = *a;
                let out = &self.nodes[i].value;
                let (rows, cols) = Self::last_axis_rows(out);
                let mut data = vec![E::zero(); rows * cols];
                for r in 0..rows {
                    let o = &out.data()[r * cols..(r + 1) * cols];
                    let gr = &g.data()[r * cols..(r + 1) * cols];
                    let gsum: E = gr.iter().cloned().sum();
                    for ((d, &ov), &gv) in data[r * cols..(r + 1) * cols]
                        .iter_mut()
                        .zip(o)
                        .zip(gr)
                    {
                        *d = gv - ov.exp() * gsum;
                    }
                }
                let da = Tensor::from_vec(g.shape(), data);
                let shape = g.shape().to_vec();
                Self::accumulate(&mut self.grads[a.0], &shape, |t| t.add_assign(&da));
            }
            Op::Log(a) => {
                let a = *a;
                let ta = self.value(a);
                let data = g
                    .data()
                    .iter()
                    .zip(ta.data())
                    .map(|(&gv, &x)| gv / x)
                    .collect();
                let da = Tensor::from_vec(g.shape(), data);
                let shape = g.shape().to_vec();
                Self::accumulate(&mut self.grads[a.0], &shape, |t| t.add_assign(&da));
            }
            Op::Scale(a, c) => {
                let (a, c) = (*a, *c);
                let mut da = g.clone();
                da.scale_assign(c);
                let shape = g.shape().to_vec();
                Self::accumulate(&mut self.grads[a.0], &shape, |t| t.add_assign(&da));
            }
            Op::Concat0(a, b) => {
                let (a, b) = (*a, *b);
                let (sa, sb) = (
                    self.value(a).shape().to_vec(),
                    self.value(b).shape().to_vec(),
                );
                let na = self.value(a).len();
                let da = Tensor::from_vec(&sa, g.data()[..na].to_vec());
                let db = Tensor::from_vec(&sb, g.data()[na..].to_vec());
                Self::accumulate(&mut self.grads[a.0], &sa, |t| t.add_assign(&da));
                Self::accumulate(&mut self.grads[b.0], &sb, |t| t.add_assign(&db));
            }
            Op::Concat1(a, b) => {
                let (a, b) = (*a, *b);
                let (sa, sb) = (
                    self.value(a).shape().to_vec(),
                    self.value(b).shape().to_vec(),
                );
                let (rows, ca) = (sa[0], sa[1]);
                let cb = sb[1];
                let mut da = Tensor::zeros(&[rows, ca]);
                let mut db = Tensor::zeros(&[rows, cb]);
                for r in 0..rows {
                    let grow = g.row(r);
                    da.row_mut(r).copy_from_slice(&grow[..ca]);
                    db.row_mut(r).copy_from_slice(&grow[ca..]);
                }
                Self::accumulate(&mut self.grads[a.0], &sa, |t| t.add_assign(&da));
                Self::accumulate(&mut self.grads[b.0], &sb, |t| t.add_assign(&db));
            }
            Op::SliceCols(a, start) => {
                let (a, start) = (*a, *start);
                let sa = self.value(a).shape().to_vec();
                let mut da = Tensor::zeros(&sa);
                for r in 0..g.rows() {
                    let dst = &mut da.row_mut(r)[start..start + g.cols()];
                    for (d, &v) in dst.iter_mut().zip(g.row(r)) {
                        *d += v;
                    }
                }
                Self::accumulate(&mut self.grads[a.0], &sa, |t| t.add_assign(&da));
            }
            Op::RowGather(a, indices) => {
                let a = *a;
                let indices = indices.clone();
                let sa = self.value(a).shape().to_vec();
                Self::accumulate(&mut self.grads[a.0], &sa, |t| {
                    for (i, &src) in indices.iter().enumerate() {
                        for (d, &v) in t.row_mut(src).iter_mut().zip(g.row(i)) {
                            *d += v;
                        }
                    }
                });
            }
            Op::RowScatterAdd(a, indices) => {
                let a = *a;
                let indices = indices.clone();
                let sa = self.value(a).shape().to_vec();
                Self::accumulate(&mut self.grads[a.0], &sa, |t| {
                    for (i, &dst) in indices.iter().enumerate() {
                        for (d, &v) in t.row_mut(i).iter_mut().zip(g.row(dst)) {
                            *d += v;
                        }
                    }
                });
            }
            Op::GatherElems(a, indices) => {
                let a = *a;
                let indices = indices.clone();
                let sa = self.value(a).shape().to_vec();
                Self::accumulate(&mut self.grads[a.0], &sa, |t| {
                    let cols = t.cols();
                    for (i, &(r, c)) in indices.iter().enumerate() {
                        t.data_mut()[r * cols + c] += g.data()[i];
                    }
                });
            }
            Op::Reshape(a) => {
                let a = *a;
                let sa = self.value(a).shape().to_vec();
                let da = Tensor::from_vec(&sa, g.data().to_vec());
                Self::accumulate(&mut self.grads[a.0], &sa, |t| t.add_assign(&da));
            }
            Op::SumAll(a) => {
                let a = *a;
                let sa = self.value(a).shape().to_vec();
                let gv = g.data()[0];
                Self::accumulate(&mut self.grads[a.0], &sa, |t| {
                    for d in t.data_mut() {
                        *d += gv;
                    }
                });
            }
            Op::SumAxis0(a) => {
                let a = *a;
                let sa = self.value(a).shape().to_vec();
                Self::accumulate(&mut self.grads[a.0], &sa, |t| {
                    for r in 0..sa[0] {
                        for (d, &v) in t.row_mut(r).iter_mut().zip(g.data()) {
                            *d += v;
                        }
                    }
                });
            }
            Op::SumAxis1(a) => {
                let a = *a;
                let sa = self.value(a).shape().to_vec();
                Self::accumulate(&mut self.grads[a.0], &sa, |t| {
                    for r in 0..sa[0] {
                        let gv = g.data()[r];
                        for d in t.row_mut(r) {
                            *d += gv;
                        }
                    }
                });
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softmax_of_equal_logits_is_uniform() {
        let mut tape = Tape::<f64>::new();
        let x = tape.leaf(Tensor::from_vec(&[2], vec![0.0, 0.0]));
        let s = tape.softmax(x);
        assert_eq!(tape.value(s).data(), &[0.5, 0.5]);
    }

    #[test]
    fn identity_matmul_and_sum_gradient() {
        let mut tape = Tape::<f64>::new();
        let eye = tape.leaf(Tensor::from_vec(&[2, 2], vec![1.0, 0.0, 0.0, 1.0]));
        let x = tape.leaf(Tensor::from_vec(&[2, 2], vec![1.0, 2.0, 3.0, 4.0]));
        let y = tape.matmul(eye, x);
        assert_eq!(tape.value(y).data(), &[1.0, 2.0, 3.0, 4.0]);
        let loss = tape.sum_all(y);
        tape.backward(loss).unwrap();
        assert_eq!(tape.grad(x).unwrap().data(), &[1.0, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn sum_gradient_is_ones() {
        let mut tape = Tape::<f64>::new();
        let x = tape.leaf(Tensor::from_vec(&[3], vec![1.0, -2.0, 0.5]));
        let loss = tape.sum_all(x);
        tape.backward(loss).unwrap();
        assert_eq!(tape.grad(x).unwrap().data(), &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn unused_leaf_has_no_grad_entry() {
        let mut tape = Tape::<f64>::new();
        let x = tape.leaf(Tensor::from_vec(&[2], vec![1.0, 2.0]));
        let unused = tape.leaf(Tensor::from_vec(&[2], vec![5.0, 6.0]));
        let loss = tape.sum_all(x);
        tape.backward(loss).unwrap();
        assert!(tape.grad(unused).is_none());
        assert!(tape.grad(x).is_some());
    }

    #[test]
    fn non_scalar_loss_is_rejected() {
        let mut tape = Tape::<f64>::new();
        let x = tape.leaf(Tensor::from_vec(&[2], vec![1.0, 2.0]));
        let e = tape.backward(x).unwrap_err();
        assert_eq!(e, BackwardError::NonScalarLoss { shape: vec![2] });
    }

    #[test]
    fn double_backward_is_rejected() {
        let mut tape = Tape::<f64>::new();
        let x = tape.leaf(Tensor::scalar(2.0));
        let loss = tape.scale(x, 3.0);
        tape.backward(loss).unwrap();
        assert_eq!(tape.backward(loss).unwrap_err(), BackwardError::DoubleBackward);
    }

    #[test]
    fn fan_out_accumulates() {
        let mut tape = Tape::<f64>::new();
        let x = tape.leaf(Tensor::from_vec(&[2], vec![3.0, 4.0]));
        let y = tape.mul(x, x); // x^2
        let loss = tape.sum_all(y);
        tape.backward(loss).unwrap();
        assert_eq!(tape.grad(x).unwrap().data(), &[6.0, 8.0]);
    }

    #[test]
    #[should_panic(expected = "matmul shape mismatch: [2, 3] @ [4, 2]")]
    fn matmul_shape_mismatch_names_both_shapes() {
        let mut tape = Tape::<f64>::new();
        let a = tape.leaf(Tensor::zeros(&[2, 3]));
        let b = tape.leaf(Tensor::zeros(&[4, 2]));
        let _ = tape.matmul(a, b);
    }

    #[test]
    fn scatter_then_gather_round_trip() {
        let mut tape = Tape::<f64>::new();
        let x = tape.leaf(Tensor::from_vec(&[3, 2], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]));
        let scattered = tape.row_scatter_add(x, vec![1, 0, 1], 2);
        assert_eq!(tape.value(scattered).data(), &[3.0, 4.0, 6.0, 8.0]);
        let gathered = tape.row_gather(scattered, vec![0, 1, 1]);
        let loss = tape.sum_all(gathered);
        tape.backward(loss).unwrap();
        assert_eq!(tape.grad(x).unwrap().data(), &[2.0, 2.0, 1.0, 1.0, 2.0, 2.0]);
    }
}
