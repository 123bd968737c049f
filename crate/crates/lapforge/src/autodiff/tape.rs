//! Reverse-mode tape: records primitive operations during a forward pass
//! and replays their backward rules in reverse topological order.
//!
//! Node indices only grow, so reverse index order is a valid topological
//! order for backpropagation. Gradients accumulate (+=) into every input,
//! which makes parameter reuse (e.g. shared convolution weights applied S
//! times) come out correctly with no special casing.

use std::cell::RefCell;
use std::rc::Rc;

use super::tensor::{matmul, matmul_nt, matmul_tn, Tensor};

/// Handle to a tape node.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(usize);

/// Guard for safe division in norm backward rules; numerators are zero
/// whenever the guarded denominator engages, so the quotient stays zero.
const NORM_GUARD: f64 = 1e-300;

enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    /// (m×c) + (1×c), the only broadcast in the engine.
    AddBias(Var, Var),
    /// Rows of (m×c) scaled by the entries of (m×1).
    RowScale(Var, Var),
    Scale(Var, f64),
    AddConst(Var),
    /// Elementwise product with a constant tensor (no gradient into it).
    MulConst(Var, Rc<Tensor>),
    Relu(Var),
    Sigmoid(Var),
    Softplus(Var),
    /// ln(max(x, eps)); zero gradient in the clamped region.
    LogClamped(Var, f64),
    ConcatCols(Rc<Vec<Var>>),
    SumAll(Var),
    /// Column-wise max/min over rows; payload records the first extremal
    /// row per column, which alone receives gradient.
    ColMax(Var, Rc<Vec<usize>>),
    ColMin(Var, Rc<Vec<usize>>),
    ColMean(Var),
    /// (1×c) stacked into (m×c).
    RepeatRows(Var),
    GatherRows(Var, Rc<Vec<usize>>),
    /// Row r contributes to segment seg[r]; each segment averages its
    /// members, empty segments produce zero rows.
    SegmentMeanRows(Var, Rc<Vec<usize>>, Rc<Vec<usize>>),
    /// (m×1) written into an n×n matrix at distinct flat positions.
    ScatterToSquare(Var, Rc<Vec<usize>>),
    Transpose(Var),
    RowSums(Var),
    /// Per-row 2-norms, (n×c) → (n×1).
    RowNorms(Var),
    /// 2-norm over all entries → 1×1.
    NormAll(Var),
}

struct Node {
    value: Tensor,
    op: Op,
}

/// Gradients produced by [`Tape::backward`], indexed by [`Var`].
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, var: Var) -> Option<&Tensor> {
        self.grads[var.0].as_ref()
    }

    pub fn take(&mut self, var: Var) -> Option<Tensor> {
        self.grads[var.0].take()
    }
}

#[derive(Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.borrow().is_empty()
    }

    fn push(&self, value: Tensor, op: Op) -> Var {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node { value, op });
        Var(nodes.len() - 1)
    }

    pub fn leaf(&self, value: Tensor) -> Var {
        self.push(value, Op::Leaf)
    }

    /// Clone of the node's current value.
    pub fn value(&self, var: Var) -> Tensor {
        self.nodes.borrow()[var.0].value.clone()
    }

    pub fn shape(&self, var: Var) -> (usize, usize) {
        self.nodes.borrow()[var.0].value.shape()
    }

    fn with<R>(&self, var: Var, f: impl FnOnce(&Tensor) -> R) -> R {
        f(&self.nodes.borrow()[var.0].value)
    }

    fn with2<R>(&self, a: Var, b: Var, f: impl FnOnce(&Tensor, &Tensor) -> R) -> R {
        let nodes = self.nodes.borrow();
        f(&nodes[a.0].value, &nodes[b.0].value)
    }

    pub fn matmul(&self, a: Var, b: Var) -> Var {
        let out = self.with2(a, b, matmul);
        self.push(out, Op::MatMul(a, b))
    }

    pub fn add(&self, a: Var, b: Var) -> Var {
        let out = self.with2(a, b, |x, y| {
            assert_eq!(x.shape(), y.shape(), "add: mismatched shapes");
            Tensor::new(x.rows(), x.cols(), x.data().iter().zip(y.data()).map(|(p, q)| p + q).collect())
        });
        self.push(out, Op::Add(a, b))
    }

    pub fn sub(&self, a: Var, b: Var) -> Var {
        let out = self.with2(a, b, |x, y| {
            assert_eq!(x.shape(), y.shape(), "sub: mismatched shapes");
            Tensor::new(x.rows(), x.cols(), x.data().iter().zip(y.data()).map(|(p, q)| p - q).collect())
        });
        self.push(out, Op::Sub(a, b))
    }

    pub fn mul(&self, a: Var, b: Var) -> Var {
        let out = self.with2(a, b, |x, y| {
            assert_eq!(x.shape(), y.shape(), "mul: mismatched shapes");
            Tensor::new(x.rows(), x.cols(), x.data().iter().zip(y.data()).map(|(p, q)| p * q).collect())
        });
        self.push(out, Op::Mul(a, b))
    }

    pub fn add_bias(&self, a: Var, bias: Var) -> Var {
        let out = self.with2(a, bias, |x, b| {
            assert_eq!(b.rows(), 1, "add_bias: bias must be a row vector");
            assert_eq!(x.cols(), b.cols(), "add_bias: width mismatch");
            let mut data = Vec::with_capacity(x.len());
            for i in 0..x.rows() {
                for (v, bv) in x.row(i).iter().zip(b.row(0)) {
                    data.push(v + bv);
                }
            }
            Tensor::new(x.rows(), x.cols(), data)
        });
        self.push(out, Op::AddBias(a, bias))
    }

    pub fn row_scale(&self, a: Var, weights: Var) -> Var {
        let out = self.with2(a, weights, |x, w| {
            assert_eq!(w.cols(), 1, "row_scale: weights must be a column vector");
            assert_eq!(x.rows(), w.rows(), "row_scale: row count mismatch");
            let mut data = Vec::with_capacity(x.len());
            for i in 0..x.rows() {
                let wi = w.get(i, 0);
                data.extend(x.row(i).iter().map(|v| v * wi));
            }
            Tensor::new(x.rows(), x.cols(), data)
        });
        self.push(out, Op::RowScale(a, weights))
    }

    pub fn scale(&self, a: Var, k: f64) -> Var {
        let out = self.with(a, |x| Tensor::new(x.rows(), x.cols(), x.data().iter().map(|v| v * k).collect()));
        self.push(out, Op::Scale(a, k))
    }

    pub fn add_const(&self, a: Var, k: f64) -> Var {
        let out = self.with(a, |x| Tensor::new(x.rows(), x.cols(), x.data().iter().map(|v| v + k).collect()));
        self.push(out, Op::AddConst(a))
    }

    pub fn mul_const(&self, a: Var, t: Rc<Tensor>) -> Var {
        let out = self.with(a, |x| {
            assert_eq!(x.shape(), t.shape(), "mul_const: mismatched shapes");
            Tensor::new(x.rows(), x.cols(), x.data().iter().zip(t.data()).map(|(p, q)| p * q).collect())
        });
        self.push(out, Op::MulConst(a, t))
    }

    pub fn relu(&self, a: Var) -> Var {
        let out = self.with(a, |x| {
            Tensor::new(x.rows(), x.cols(), x.data().iter().map(|v| v.max(0.0)).collect())
        });
        self.push(out, Op::Relu(a))
    }

    pub fn sigmoid(&self, a: Var) -> Var {
        let out = self.with(a, |x| {
            Tensor::new(x.rows(), x.cols(), x.data().iter().map(|v| 1.0 / (1.0 + (-v).exp())).collect())
        });
        self.push(out, Op::Sigmoid(a))
    }

    /// ln(1 + eˣ), evaluated as max(x, 0) + ln(1 + e^−|x|) so that neither
    /// branch overflows. Unlike a log of a saturated sigmoid, its gradient
    /// σ(x) never collapses to an exact zero for finite negative inputs,
    /// which keeps cross-entropy terms trainable however far a logit drifts.
    pub fn softplus(&self, a: Var) -> Var {
        let out = self.with(a, |x| {
            Tensor::new(
                x.rows(),
                x.cols(),
                x.data().iter().map(|v| v.max(0.0) + (-v.abs()).exp().ln_1p()).collect(),
            )
        });
        self.push(out, Op::Softplus(a))
    }

    pub fn log_clamped(&self, a: Var, eps: f64) -> Var {
        assert!(eps > 0.0, "log_clamped: eps must be positive");
        let out = self.with(a, |x| {
            Tensor::new(x.rows(), x.cols(), x.data().iter().map(|v| v.max(eps).ln()).collect())
        });
        self.push(out, Op::LogClamped(a, eps))
    }

    pub fn concat_cols(&self, parts: &[Var]) -> Var {
        assert!(!parts.is_empty(), "concat_cols: no inputs");
        let nodes = self.nodes.borrow();
        let rows = nodes[parts[0].0].value.rows();
        let total: usize = parts.iter().map(|p| nodes[p.0].value.cols()).sum();
        let mut data = Vec::with_capacity(rows * total);
        for i in 0..rows {
            for p in parts {
                let t = &nodes[p.0].value;
                assert_eq!(t.rows(), rows, "concat_cols: row count mismatch");
                data.extend_from_slice(t.row(i));
            }
        }
        drop(nodes);
        self.push(Tensor::new(rows, total, data), Op::ConcatCols(Rc::new(parts.to_vec())))
    }

    pub fn sum_all(&self, a: Var) -> Var {
        let out = self.with(a, |x| Tensor::scalar(x.data().iter().sum()));
        self.push(out, Op::SumAll(a))
    }

    pub fn col_max(&self, a: Var) -> Var {
        let (out, arg) = self.with(a, |x| col_extremum(x, true));
        self.push(out, Op::ColMax(a, Rc::new(arg)))
    }

    pub fn col_min(&self, a: Var) -> Var {
        let (out, arg) = self.with(a, |x| col_extremum(x, false));
        self.push(out, Op::ColMin(a, Rc::new(arg)))
    }

    pub fn col_mean(&self, a: Var) -> Var {
        let out = self.with(a, |x| {
            assert!(x.rows() > 0, "col_mean: empty input");
            let mut sums = vec![0.0; x.cols()];
            for i in 0..x.rows() {
                for (s, v) in sums.iter_mut().zip(x.row(i)) {
                    *s += v;
                }
            }
            let m = x.rows() as f64;
            Tensor::new(1, x.cols(), sums.into_iter().map(|s| s / m).collect())
        });
        self.push(out, Op::ColMean(a))
    }

    pub fn repeat_rows(&self, a: Var, times: usize) -> Var {
        let out = self.with(a, |x| {
            assert_eq!(x.rows(), 1, "repeat_rows: input must be a row vector");
            let mut data = Vec::with_capacity(times * x.cols());
            for _ in 0..times {
                data.extend_from_slice(x.row(0));
            }
            Tensor::new(times, x.cols(), data)
        });
        self.push(out, Op::RepeatRows(a))
    }

    pub fn gather_rows(&self, a: Var, indices: Rc<Vec<usize>>) -> Var {
        let out = self.with(a, |x| {
            let mut data = Vec::with_capacity(indices.len() * x.cols());
            for &i in indices.iter() {
                data.extend_from_slice(x.row(i));
            }
            Tensor::new(indices.len(), x.cols(), data)
        });
        self.push(out, Op::GatherRows(a, indices))
    }

    /// `segments[r]` names the output row receiving input row r; output has
    /// `segment_count` rows; empty segments are zero.
    pub fn segment_mean_rows(&self, a: Var, segments: Rc<Vec<usize>>, segment_count: usize) -> Var {
        let (out, counts) = self.with(a, |x| {
            assert_eq!(x.rows(), segments.len(), "segment_mean_rows: segment list length mismatch");
            let mut counts = vec![0usize; segment_count];
            let mut sums = vec![0.0; segment_count * x.cols()];
            for (r, &s) in segments.iter().enumerate() {
                counts[s] += 1;
                let dst = &mut sums[s * x.cols()..(s + 1) * x.cols()];
                for (d, v) in dst.iter_mut().zip(x.row(r)) {
                    *d += v;
                }
            }
            for (s, &c) in counts.iter().enumerate() {
                if c > 1 {
                    let inv = 1.0 / c as f64;
                    for v in &mut sums[s * x.cols()..(s + 1) * x.cols()] {
                        *v *= inv;
                    }
                }
            }
            (Tensor::new(segment_count, x.cols(), sums), counts)
        });
        self.push(out, Op::SegmentMeanRows(a, segments, Rc::new(counts)))
    }

    /// Writes the entries of an (m×1) vector into an n×n matrix at distinct
    /// row-major positions; untouched cells are exactly zero.
    pub fn scatter_to_square(&self, a: Var, positions: Rc<Vec<usize>>, n: usize) -> Var {
        let out = self.with(a, |x| {
            assert_eq!(x.cols(), 1, "scatter_to_square: input must be a column vector");
            assert_eq!(x.rows(), positions.len(), "scatter_to_square: position count mismatch");
            let mut data = vec![0.0; n * n];
            for (r, &p) in positions.iter().enumerate() {
                data[p] = x.get(r, 0);
            }
            Tensor::new(n, n, data)
        });
        self.push(out, Op::ScatterToSquare(a, positions))
    }

    pub fn transpose(&self, a: Var) -> Var {
        let out = self.with(a, |x| {
            let mut data = vec![0.0; x.len()];
            for i in 0..x.rows() {
                for j in 0..x.cols() {
                    data[j * x.rows() + i] = x.get(i, j);
                }
            }
            Tensor::new(x.cols(), x.rows(), data)
        });
        self.push(out, Op::Transpose(a))
    }

    pub fn row_sums(&self, a: Var) -> Var {
        let out = self.with(a, |x| {
            Tensor::new(x.rows(), 1, (0..x.rows()).map(|i| x.row(i).iter().sum()).collect())
        });
        self.push(out, Op::RowSums(a))
    }

    pub fn row_norms(&self, a: Var) -> Var {
        let out = self.with(a, |x| {
            Tensor::new(
                x.rows(),
                1,
                (0..x.rows())
                    .map(|i| x.row(i).iter().map(|v| v * v).sum::<f64>().sqrt())
                    .collect(),
            )
        });
        self.push(out, Op::RowNorms(a))
    }

    pub fn norm_all(&self, a: Var) -> Var {
        let out = self.with(a, |x| Tensor::scalar(x.data().iter().map(|v| v * v).sum::<f64>().sqrt()));
        self.push(out, Op::NormAll(a))
    }

    /// Backpropagates from a scalar `loss` through every recorded node and
    /// returns all gradients.
    pub fn backward(&self, loss: Var) -> Gradients {
        let nodes = self.nodes.borrow();
        assert_eq!(nodes[loss.0].value.shape(), (1, 1), "backward: loss must be scalar");
        let mut grads: Vec<Option<Tensor>> = (0..nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::scalar(1.0));

        for idx in (0..nodes.len()).rev() {
            let Some(grad) = grads[idx].take() else { continue };
            let node = &nodes[idx];
            match &node.op {
                Op::Leaf => {
                    grads[idx] = Some(grad);
                    continue;
                }
                Op::MatMul(a, b) => {
                    let (da, db) = {
                        let (va, vb) = (&nodes[a.0].value, &nodes[b.0].value);
                        (matmul_nt(&grad, vb), matmul_tn(va, &grad))
                    };
                    accumulate(&mut grads, *a, da);
                    accumulate(&mut grads, *b, db);
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads, *a, grad.clone());
                    accumulate(&mut grads, *b, grad);
                }
                Op::Sub(a, b) => {
                    let neg = Tensor::new(grad.rows(), grad.cols(), grad.data().iter().map(|v| -v).collect());
                    accumulate(&mut grads, *a, grad);
                    accumulate(&mut grads, *b, neg);
                }
                Op::Mul(a, b) => {
                    let (da, db) = {
                        let (va, vb) = (&nodes[a.0].value, &nodes[b.0].value);
                        (
                            Tensor::new(grad.rows(), grad.cols(), grad.data().iter().zip(vb.data()).map(|(g, v)| g * v).collect()),
                            Tensor::new(grad.rows(), grad.cols(), grad.data().iter().zip(va.data()).map(|(g, v)| g * v).collect()),
                        )
                    };
                    accumulate(&mut grads, *a, da);
                    accumulate(&mut grads, *b, db);
                }
                Op::AddBias(a, bias) => {
                    let db = {
                        let mut sums = vec![0.0; grad.cols()];
                        for i in 0..grad.rows() {
                            for (s, g) in sums.iter_mut().zip(grad.row(i)) {
                                *s += g;
                            }
                        }
                        Tensor::new(1, grad.cols(), sums)
                    };
                    accumulate(&mut grads, *a, grad);
                    accumulate(&mut grads, *bias, db);
                }
                Op::RowScale(a, w) => {
                    let (da, dw) = {
                        let (va, vw) = (&nodes[a.0].value, &nodes[w.0].value);
                        let mut da = Vec::with_capacity(grad.len());
                        let mut dw = Vec::with_capacity(vw.rows());
                        for i in 0..grad.rows() {
                            let wi = vw.get(i, 0);
                            da.extend(grad.row(i).iter().map(|g| g * wi));
                            dw.push(grad.row(i).iter().zip(va.row(i)).map(|(g, v)| g * v).sum());
                        }
                        (Tensor::new(grad.rows(), grad.cols(), da), Tensor::new(vw.rows(), 1, dw))
                    };
                    accumulate(&mut grads, *a, da);
                    accumulate(&mut grads, *w, dw);
                }
                Op::Scale(a, k) => {
                    let da = Tensor::new(grad.rows(), grad.cols(), grad.data().iter().map(|g| g * k).collect());
                    accumulate(&mut grads, *a, da);
                }
                Op::AddConst(a) => accumulate(&mut grads, *a, grad),
                Op::MulConst(a, t) => {
                    let da = Tensor::new(grad.rows(), grad.cols(), grad.data().iter().zip(t.data()).map(|(g, v)| g * v).collect());
                    accumulate(&mut grads, *a, da);
                }
                Op::Relu(a) => {
                    let da = {
                        let va = &nodes[a.0].value;
                        Tensor::new(
                            grad.rows(),
                            grad.cols(),
                            grad.data().iter().zip(va.data()).map(|(g, v)| if *v > 0.0 { *g } else { 0.0 }).collect(),
                        )
                    };
                    accumulate(&mut grads, *a, da);
                }
                Op::Sigmoid(a) => {
                    // Uses the stored output s: ds/dx = s(1−s).
                    let da = Tensor::new(
                        grad.rows(),
                        grad.cols(),
                        grad.data().iter().zip(node.value.data()).map(|(g, s)| g * s * (1.0 - s)).collect(),
                    );
                    accumulate(&mut grads, *a, da);
                }
                Op::Softplus(a) => {
                    // d softplus/dx = σ(x), computed from the input on the
                    // overflow-safe branch for its sign.
                    let da = {
                        let va = &nodes[a.0].value;
                        Tensor::new(
                            grad.rows(),
                            grad.cols(),
                            grad.data()
                                .iter()
                                .zip(va.data())
                                .map(|(g, v)| {
                                    let s = if *v >= 0.0 {
                                        1.0 / (1.0 + (-v).exp())
                                    } else {
                                        let e = v.exp();
                                        e / (1.0 + e)
                                    };
                                    g * s
                                })
                                .collect(),
                        )
                    };
                    accumulate(&mut grads, *a, da);
                }
                Op::LogClamped(a, eps) => {
                    let da = {
                        let va = &nodes[a.0].value;
                        Tensor::new(
                            grad.rows(),
                            grad.cols(),
                            grad.data()
                                .iter()
                                .zip(va.data())
                                .map(|(g, v)| if *v > *eps { g / v } else { 0.0 })
                                .collect(),
                        )
                    };
                    accumulate(&mut grads, *a, da);
                }
                Op::ConcatCols(parts) => {
                    let mut offset = 0;
                    for p in parts.iter() {
                        let width = nodes[p.0].value.cols();
                        let mut data = Vec::with_capacity(grad.rows() * width);
                        for i in 0..grad.rows() {
                            data.extend_from_slice(&grad.row(i)[offset..offset + width]);
                        }
                        accumulate(&mut grads, *p, Tensor::new(grad.rows(), width, data));
                        offset += width;
                    }
                }
                Op::SumAll(a) => {
                    let va = &nodes[a.0].value;
                    accumulate(&mut grads, *a, Tensor::full(va.rows(), va.cols(), grad.item()));
                }
                Op::ColMax(a, arg) | Op::ColMin(a, arg) => {
                    let va = &nodes[a.0].value;
                    let mut da = Tensor::zeros(va.rows(), va.cols());
                    for (j, &i) in arg.iter().enumerate() {
                        da.set(i, j, grad.get(0, j));
                    }
                    accumulate(&mut grads, *a, da);
                }
                Op::ColMean(a) => {
                    let va = &nodes[a.0].value;
                    let inv = 1.0 / va.rows() as f64;
                    let mut data = Vec::with_capacity(va.len());
                    for _ in 0..va.rows() {
                        data.extend(grad.row(0).iter().map(|g| g * inv));
                    }
                    accumulate(&mut grads, *a, Tensor::new(va.rows(), va.cols(), data));
                }
                Op::RepeatRows(a) => {
                    let mut sums = vec![0.0; grad.cols()];
                    for i in 0..grad.rows() {
                        for (s, g) in sums.iter_mut().zip(grad.row(i)) {
                            *s += g;
                        }
                    }
                    accumulate(&mut grads, *a, Tensor::new(1, grad.cols(), sums));
                }
                Op::GatherRows(a, indices) => {
                    let va = &nodes[a.0].value;
                    let mut da = Tensor::zeros(va.rows(), va.cols());
                    for (r, &src) in indices.iter().enumerate() {
                        let row = grad.row(r);
                        let dst = &mut da.data_mut()[src * va.cols()..(src + 1) * va.cols()];
                        for (d, g) in dst.iter_mut().zip(row) {
                            *d += g;
                        }
                    }
                    accumulate(&mut grads, *a, da);
                }
                Op::SegmentMeanRows(a, segments, counts) => {
                    let va = &nodes[a.0].value;
                    let cols = va.cols();
                    let mut da = Vec::with_capacity(va.len());
                    for &s in segments.iter() {
                        let inv = 1.0 / counts[s] as f64;
                        da.extend(grad.row(s).iter().map(|g| g * inv));
                    }
                    accumulate(&mut grads, *a, Tensor::new(va.rows(), cols, da));
                }
                Op::ScatterToSquare(a, positions) => {
                    let da = Tensor::new(
                        positions.len(),
                        1,
                        positions.iter().map(|&p| grad.data()[p]).collect(),
                    );
                    accumulate(&mut grads, *a, da);
                }
                Op::Transpose(a) => {
                    let mut data = vec![0.0; grad.len()];
                    for i in 0..grad.rows() {
                        for j in 0..grad.cols() {
                            data[j * grad.rows() + i] = grad.get(i, j);
                        }
                    }
                    accumulate(&mut grads, *a, Tensor::new(grad.cols(), grad.rows(), data));
                }
                Op::RowSums(a) => {
                    let va = &nodes[a.0].value;
                    let mut data = Vec::with_capacity(va.len());
                    for i in 0..va.rows() {
                        data.extend(std::iter::repeat_n(grad.get(i, 0), va.cols()));
                    }
                    accumulate(&mut grads, *a, Tensor::new(va.rows(), va.cols(), data));
                }
                Op::RowNorms(a) => {
                    let va = &nodes[a.0].value;
                    let mut data = Vec::with_capacity(va.len());
                    for i in 0..va.rows() {
                        let scale = grad.get(i, 0) / node.value.get(i, 0).max(NORM_GUARD);
                        data.extend(va.row(i).iter().map(|v| v * scale));
                    }
                    accumulate(&mut grads, *a, Tensor::new(va.rows(), va.cols(), data));
                }
                Op::NormAll(a) => {
                    let va = &nodes[a.0].value;
                    let scale = grad.item() / node.value.item().max(NORM_GUARD);
                    accumulate(
                        &mut grads,
                        *a,
                        Tensor::new(va.rows(), va.cols(), va.data().iter().map(|v| v * scale).collect()),
                    );
                }
            }
        }
        Gradients { grads }
    }
}

fn col_extremum(x: &Tensor, maximize: bool) -> (Tensor, Vec<usize>) {
    assert!(x.rows() > 0, "column reduction over empty input");
    let mut best: Vec<f64> = x.row(0).to_vec();
    let mut arg = vec![0usize; x.cols()];
    for i in 1..x.rows() {
        for (j, &v) in x.row(i).iter().enumerate() {
            // Strict comparison keeps the first extremal index on ties.
            let better = if maximize { v > best[j] } else { v < best[j] };
            if better {
                best[j] = v;
                arg[j] = i;
            }
        }
    }
    (Tensor::new(1, x.cols(), best), arg)
}

fn accumulate(grads: &mut [Option<Tensor>], var: Var, delta: Tensor) {
    match &mut grads[var.0] {
        Some(g) => {
            debug_assert_eq!(g.shape(), delta.shape());
            for (a, b) in g.data_mut().iter_mut().zip(delta.data()) {
                *a += b;
            }
        }
        slot @ None => *slot = Some(delta),
    }
}
