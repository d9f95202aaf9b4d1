//! Reverse-mode automatic differentiation over [`Tensor`] values.
//!
//! Every op appends a node holding its forward value and enough information
//! to push an upstream gradient back to its inputs. Nodes are appended in
//! evaluation order, so the node list is already topologically sorted and
//! [`Tape::backward`] is a single reverse sweep.
//!
//! ```
//! use cwdae_core::numerics::{Tape, Tensor};
//!
//! let mut tape = Tape::new();
//! let w = tape.leaf(Tensor::scalar(3.0));
//! let y = tape.mul(w, w);
//! let grads = tape.backward(y).unwrap();
//! assert_eq!(grads.wrt(w).item(), 6.0);
//! ```
//!
//! A non-finite forward value does not panic; the tape remembers the first
//! offending op and `backward` reports it.

use crate::error::{Error, Result};
use crate::numerics::tensor::Tensor;

/// Handle to a node on a [`Tape`].
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
    Constant,
    MatMul(Var, Var),
    /// `[r, c] + [1, c]` broadcast over rows.
    AddRow(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    MulConst(Var, Tensor),
    Scale(Var, f64),
    Exp(Var),
    Log(Var),
    Softplus(Var),
    Elu(Var),
    Relu(Var),
    ClampMin(Var, f64),
    SoftmaxRows(Var),
    SumCols(Var),
    SumAll(Var),
    SliceCols(Var, usize),
    ConcatCols(Vec<Var>),
    /// Forward value is a fixed tensor; gradient passes unchanged to the input.
    StraightThrough(Var),
    /// Scalar-valued function with its Jacobian precomputed at forward time.
    ScalarFn(Vec<(Var, Tensor)>),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
}

/// Recording of one forward pass.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    first_non_finite: Option<(usize, &'static str)>,
}

/// Gradients produced by [`Tape::backward`].
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
    shapes: Vec<(usize, usize)>,
}

impl Gradients {
    /// Gradient of the loss w.r.t. `v`; exactly zero when `v` does not reach the loss.
    pub fn wrt(&self, v: Var) -> Tensor {
        match &self.grads[v.0] {
            Some(g) => g.clone(),
            None => {
                let (r, c) = self.shapes[v.0];
                Tensor::zeros(r, c)
            }
        }
    }

    pub fn take(&mut self, v: Var) -> Tensor {
        match self.grads[v.0].take() {
            Some(g) => g,
            None => {
                let (r, c) = self.shapes[v.0];
                Tensor::zeros(r, c)
            }
        }
    }
}

fn elu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        x.exp_m1()
    }
}

/// Numerically stable `log(1 + e^x)`.
pub fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else if x < -30.0 {
        x.exp()
    } else {
        x.exp().ln_1p()
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Row-wise softmax of a matrix.
pub fn softmax_rows(t: &Tensor) -> Tensor {
    let mut out = t.clone();
    for r in 0..out.rows() {
        let row = out.row_mut(r);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    out
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

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    fn push(&mut self, value: Tensor, op: Op, name: &'static str) -> Var {
        let idx = self.nodes.len();
        if self.first_non_finite.is_none() && !value.is_finite() {
            self.first_non_finite = Some((idx, name));
        }
        self.nodes.push(Node { value, op });
        Var(idx)
    }

    /// A trainable input. Gradients are reported for leaves.
    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, "leaf")
    }

    /// An input that never needs a gradient (data, noise).
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Constant, "constant")
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.value(a).matmul(self.value(b))?;
        Ok(self.push(v, Op::MatMul(a, b), "matmul"))
    }

    pub fn add_row(&mut self, a: Var, bias: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(bias));
        if bv.rows() != 1 || bv.cols() != av.cols() {
            return Err(Error::Config(format!(
                "bias shape {:?} does not broadcast over {:?}",
                bv.shape(),
                av.shape()
            )));
        }
        let mut out = av.clone();
        let b = bv.data().to_vec();
        for r in 0..out.rows() {
            for (o, bb) in out.row_mut(r).iter_mut().zip(&b) {
                *o += bb;
            }
        }
        Ok(self.push(out, Op::AddRow(a, bias), "add_row"))
    }

    fn check_same(&self, a: Var, b: Var, what: &str) -> Result<()> {
        if !self.value(a).same_shape(self.value(b)) {
            return Err(Error::Config(format!(
                "{what}: shapes {:?} and {:?} differ",
                self.value(a).shape(),
                self.value(b).shape()
            )));
        }
        Ok(())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        self.try_add(a, b).expect("add: shape mismatch")
    }

    pub fn try_add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.check_same(a, b, "add")?;
        let v = self.value(a).zip_map(self.value(b), |x, y| x + y);
        Ok(self.push(v, Op::Add(a, b), "add"))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        assert!(
            self.value(a).same_shape(self.value(b)),
            "sub: shape mismatch"
        );
        let v = self.value(a).zip_map(self.value(b), |x, y| x - y);
        self.push(v, Op::Sub(a, b), "sub")
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        assert!(
            self.value(a).same_shape(self.value(b)),
            "mul: shape mismatch"
        );
        let v = self.value(a).zip_map(self.value(b), |x, y| x * y);
        self.push(v, Op::Mul(a, b), "mul")
    }

    /// Elementwise product with a tensor that carries no gradient.
    pub fn mul_const(&mut self, a: Var, c: Tensor) -> Var {
        assert!(self.value(a).same_shape(&c), "mul_const: shape mismatch");
        let v = self.value(a).zip_map(&c, |x, y| x * y);
        self.push(v, Op::MulConst(a, c), "mul_const")
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let v = self.value(a).map(|x| x * s);
        self.push(v, Op::Scale(a, s), "scale")
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let v = self.value(a).map(f64::exp);
        self.push(v, Op::Exp(a), "exp")
    }

    pub fn log(&mut self, a: Var) -> Var {
        let v = self.value(a).map(f64::ln);
        self.push(v, Op::Log(a), "log")
    }

    pub fn softplus(&mut self, a: Var) -> Var {
        let v = self.value(a).map(softplus);
        self.push(v, Op::Softplus(a), "softplus")
    }

    /// ELU with alpha = 1.
    pub fn elu(&mut self, a: Var) -> Var {
        let v = self.value(a).map(elu);
        self.push(v, Op::Elu(a), "elu")
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let v = self.value(a).map(|x| x.max(0.0));
        self.push(v, Op::Relu(a), "relu")
    }

    /// `max(a, floor)`; gradient is zero where the floor binds.
    pub fn clamp_min(&mut self, a: Var, floor: f64) -> Var {
        let v = self.value(a).map(|x| x.max(floor));
        self.push(v, Op::ClampMin(a, floor), "clamp_min")
    }

    pub fn softmax_rows(&mut self, a: Var) -> Var {
        let v = softmax_rows(self.value(a));
        self.push(v, Op::SoftmaxRows(a), "softmax_rows")
    }

    /// Row sums: `[r, c] -> [r, 1]`.
    pub fn sum_cols(&mut self, a: Var) -> Var {
        let av = self.value(a);
        let sums: Vec<f64> = (0..av.rows()).map(|r| av.row(r).iter().sum()).collect();
        let v = Tensor::matrix(av.rows(), 1, sums).expect("row sums");
        self.push(v, Op::SumCols(a), "sum_cols")
    }

    pub fn sum_all(&mut self, a: Var) -> Var {
        let s = self.value(a).data().iter().sum();
        self.push(Tensor::scalar(s), Op::SumAll(a), "sum_all")
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, end: usize) -> Var {
        let v = self.value(a).slice_cols(start, end);
        self.push(v, Op::SliceCols(a, start), "slice_cols")
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let vals: Vec<&Tensor> = parts.iter().map(|&p| self.value(p)).collect();
        let v = Tensor::concat_cols(&vals)?;
        Ok(self.push(v, Op::ConcatCols(parts.to_vec()), "concat_cols"))
    }

    /// Emits `forward` as the value while routing gradients straight to `surrogate`.
    pub fn straight_through(&mut self, surrogate: Var, forward: Tensor) -> Var {
        assert!(
            self.value(surrogate).same_shape(&forward),
            "straight_through: shape mismatch"
        );
        self.push(forward, Op::StraightThrough(surrogate), "straight_through")
    }

    /// Record a scalar function of several inputs whose partial derivatives
    /// were computed alongside its value.
    pub fn scalar_fn(&mut self, value: f64, partials: Vec<(Var, Tensor)>) -> Result<Var> {
        for (v, g) in &partials {
            if !self.value(*v).same_shape(g) {
                return Err(Error::Config(format!(
                    "scalar_fn: partial shape {:?} does not match input {:?}",
                    g.shape(),
                    self.value(*v).shape()
                )));
            }
        }
        Ok(self.push(Tensor::scalar(value), Op::ScalarFn(partials), "scalar_fn"))
    }

    /// Propagate d(loss)/d(node) for every node that reaches `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        if let Some((idx, name)) = self.first_non_finite {
            return Err(Error::NonFinite(format!("forward op #{idx} ({name})")));
        }
        if self.value(loss).len() != 1 {
            return Err(Error::Contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.value(loss).shape()
            )));
        }
        let n = self.nodes.len();
        let mut grads: Vec<Option<Tensor>> = (0..n).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::filled(
            self.value(loss).rows(),
            self.value(loss).cols(),
            1.0,
        ));

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            self.propagate(node, &g, &mut grads);
            grads[idx] = Some(g);
        }

        let shapes = self
            .nodes
            .iter()
            .map(|n| (n.value.rows(), n.value.cols()))
            .collect();
        Ok(Gradients { grads, shapes })
    }

    fn propagate(&self, node: &Node, g: &Tensor, grads: &mut [Option<Tensor>]) {
        fn accum(grads: &mut [Option<Tensor>], v: Var, delta: Tensor) {
            match &mut grads[v.0] {
                Some(existing) => existing.add_assign(&delta),
                slot @ None => *slot = Some(delta),
            }
        }
        let out = &node.value;
        match &node.op {
            Op::Leaf | Op::Constant => {}
            Op::MatMul(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                let ga = g.matmul(&bv.transpose()).expect("matmul grad");
                let gb = av.transpose().matmul(g).expect("matmul grad");
                accum(grads, *a, ga);
                accum(grads, *b, gb);
            }
            Op::AddRow(a, bias) => {
                let mut gb = Tensor::zeros(1, g.cols());
                for r in 0..g.rows() {
                    for (acc, v) in gb.data_mut().iter_mut().zip(g.row(r)) {
                        *acc += v;
                    }
                }
                accum(grads, *a, g.clone());
                accum(grads, *bias, gb);
            }
            Op::Add(a, b) => {
                accum(grads, *a, g.clone());
                accum(grads, *b, g.clone());
            }
            Op::Sub(a, b) => {
                accum(grads, *a, g.clone());
                accum(grads, *b, g.map(|x| -x));
            }
            Op::Mul(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                accum(grads, *a, g.zip_map(bv, |x, y| x * y));
                accum(grads, *b, g.zip_map(av, |x, y| x * y));
            }
            Op::MulConst(a, c) => accum(grads, *a, g.zip_map(c, |x, y| x * y)),
            Op::Scale(a, s) => accum(grads, *a, g.map(|x| x * s)),
            Op::Exp(a) => accum(grads, *a, g.zip_map(out, |x, y| x * y)),
            Op::Log(a) => accum(grads, *a, g.zip_map(self.value(*a), |x, y| x / y)),
            Op::Softplus(a) => accum(grads, *a, g.zip_map(self.value(*a), |x, y| x * sigmoid(y))),
            Op::Elu(a) => accum(
                grads,
                *a,
                g.zip_map(self.value(*a), |x, y| if y > 0.0 { x } else { x * y.exp() }),
            ),
            Op::Relu(a) => accum(
                grads,
                *a,
                g.zip_map(self.value(*a), |x, y| if y > 0.0 { x } else { 0.0 }),
            ),
            Op::ClampMin(a, floor) => accum(
                grads,
                *a,
                g.zip_map(self.value(*a), |x, y| if y > *floor { x } else { 0.0 }),
            ),
            Op::SoftmaxRows(a) => {
                // dx_i = s_i * (g_i - sum_j g_j s_j)
                let mut ga = g.clone();
                for r in 0..out.rows() {
                    let s = out.row(r);
                    let dot: f64 = s.iter().zip(g.row(r)).map(|(a, b)| a * b).sum();
                    for (gi, si) in ga.row_mut(r).iter_mut().zip(s) {
                        *gi = si * (*gi - dot);
                    }
                }
                accum(grads, *a, ga);
            }
            Op::SumCols(a) => {
                let av = self.value(*a);
                let mut ga = Tensor::zeros(av.rows(), av.cols());
                for r in 0..av.rows() {
                    let gr = g.get(r, 0);
                    ga.row_mut(r).iter_mut().for_each(|v| *v = gr);
                }
                accum(grads, *a, ga);
            }
            Op::SumAll(a) => {
                let av = self.value(*a);
                accum(grads, *a, Tensor::filled(av.rows(), av.cols(), g.item()));
            }
            Op::SliceCols(a, start) => {
                let av = self.value(*a);
                let mut ga = Tensor::zeros(av.rows(), av.cols());
                for r in 0..g.rows() {
                    ga.row_mut(r)[*start..*start + g.cols()].copy_from_slice(g.row(r));
                }
                accum(grads, *a, ga);
            }
            Op::ConcatCols(parts) => {
                let mut offset = 0;
                for p in parts {
                    let w = self.value(*p).cols();
                    accum(grads, *p, g.slice_cols(offset, offset + w));
                    offset += w;
                }
            }
            Op::StraightThrough(a) => accum(grads, *a, g.clone()),
            Op::ScalarFn(partials) => {
                let up = g.item();
                for (v, p) in partials {
                    accum(grads, *v, p.map(|x| x * up));
                }
            }
        }
    }
}
