use std::sync::Arc;

use rand::Rng;

use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::hetgraph::MetaPathAdjacency;
use crate::scalar::Scalar;

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// How the spike primitive evaluates its forward pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TapeMode {
    /// Binary Heaviside forward, surrogate backward.
    #[default]
    Spiking,
    /// Logistic forward `σ(αx)` with its exact derivative. Makes the whole
    /// graph differentiable so finite differences can check it.
    SmoothSurrogate,
}

#[derive(Debug)]
enum Op<T> {
    Param,
    Constant,
    MatMul(Var, Var),
    Aggregate(Arc<MetaPathAdjacency>, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddRow(Var, Var),
    Scale(Var, T),
    SubScalar(Var, T),
    AddScalar(Var, T),
    RSubScalar(T, Var),
    DivScalar(Var, T),
    ScaleBy(Var, Var),
    Recip(Var),
    Softplus(Var),
    Tanh(Var),
    Relu(Var),
    Elu(Var),
    Softmax(Var),
    MatVec(Var, Var),
    Mean(Var),
    Sum(Var),
    Stack(Vec<Var>),
    WeightedSum(Vec<Var>, Var),
    Dropout(Var, Vec<T>),
    Heaviside { x: Var, alpha: T, chain_alpha: bool },
    Detach,
    MaskedCrossEntropy { x: Var, targets: Vec<(usize, usize)>, eps: T },
    RowNormalize { x: Var, eps: T },
}

#[derive(Debug)]
struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
    requires_grad: bool,
}

/// Gradients of the trainable leaves after [`Tape::backward`].
#[derive(Debug, Clone)]
pub struct Gradients<T> {
    entries: Vec<(Var, Tensor<T>)>,
}

impl<T: Scalar> Gradients<T> {
    pub fn get(&self, var: Var) -> Option<&Tensor<T>> {
        self.entries.iter().find(|(v, _)| *v == var).map(|(_, g)| g)
    }

    pub fn iter(&self) -> impl Iterator<Item = (Var, &Tensor<T>)> {
        self.entries.iter().map(|(v, g)| (*v, g))
    }
}

/// Records primitive applications in topological order and replays them in
/// reverse to compute gradients.
///
/// A tape supports one [`Tape::backward`] per recording. A second call is a
/// contract error until [`Tape::zero_grad`] or [`Tape::reset`] is called.
#[derive(Debug)]
pub struct Tape<T> {
    nodes: Vec<Node<T>>,
    grads: Vec<Option<Tensor<T>>>,
    mode: TapeMode,
    backward_done: bool,
}

impl<T: Scalar> Default for Tape<T> {
    fn default() -> Self {
        Self::new(TapeMode::Spiking)
    }
}

impl<T: Scalar> Tape<T> {
    pub fn new(mode: TapeMode) -> Self {
        Self {
            nodes: Vec::new(),
            grads: Vec::new(),
            mode,
            backward_done: false,
        }
    }

    pub fn mode(&self) -> TapeMode {
        self.mode
    }

    /// Drop every recorded node; the tape can record a fresh graph.
    pub fn reset(&mut self) {
        self.nodes.clear();
        self.grads.clear();
        self.backward_done = false;
    }

    /// Clear gradients but keep the recording.
    pub fn zero_grad(&mut self) {
        self.grads.clear();
        self.backward_done = false;
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    pub fn grad(&self, v: Var) -> Option<&Tensor<T>> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    /// Trainable leaves in registration order.
    pub fn trainable_leaves(&self) -> Vec<Var> {
        self.nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| matches!(n.op, Op::Param))
            .map(|(i, _)| Var(i))
            .collect()
    }

    /// Total number of scalar entries across trainable leaves.
    pub fn trainable_element_count(&self) -> usize {
        self.trainable_leaves().iter().map(|&v| self.value(v).len()).sum()
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>, inputs: &[Var]) -> Var {
        let requires_grad = match op {
            Op::Param => true,
            Op::Constant | Op::Detach => false,
            _ => inputs.iter().any(|v| self.nodes[v.0].requires_grad),
        };
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn param(&mut self, value: Tensor<T>) -> Var {
        self.push(value, Op::Param, &[])
    }

    pub fn constant(&mut self, value: Tensor<T>) -> Var {
        self.push(value, Op::Constant, &[])
    }

    fn same_shape(&self, a: Var, b: Var, what: &str) -> Result<()> {
        let (sa, sb) = (self.value(a).shape(), self.value(b).shape());
        if sa != sb {
            return Err(Error::Shape(format!("{what}: {sa:?} vs {sb:?}")));
        }
        Ok(())
    }

    fn unary(&mut self, x: Var, op: Op<T>, f: impl Fn(T) -> T) -> Var {
        let value = self.value(x).map(f);
        self.push(value, op, &[x])
    }

    /// `x · w` for `x: n×a`, `w: a×b`.
    pub fn matmul(&mut self, x: Var, w: Var) -> Result<Var> {
        let value = self.value(x).matmul(self.value(w))?;
        Ok(self.push(value, Op::MatMul(x, w), &[x, w]))
    }

    /// Row `i` of the output is `Σ_{j ∈ N_i} coeff(i, j) · x_j`.
    pub fn aggregate(&mut self, adj: Arc<MetaPathAdjacency>, x: Var) -> Result<Var> {
        let xv = self.value(x);
        if !xv.is_matrix() || xv.rows() != adj.n() {
            return Err(Error::Shape(format!(
                "adjacency `{}` over {} nodes applied to features of shape {:?}",
                adj.name(),
                adj.n(),
                xv.shape()
            )));
        }
        let d = xv.cols();
        let mut out = vec![T::zero(); adj.n() * d];
        for i in 0..adj.n() {
            let orow = &mut out[i * d..(i + 1) * d];
            for (&j, &c) in adj.row(i).iter().zip(adj.row_coeffs(i)) {
                let c = T::of(c);
                for (o, &v) in orow.iter_mut().zip(xv.row(j)) {
                    *o = *o + c * v;
                }
            }
        }
        let value = Tensor::matrix(adj.n(), d, out)?;
        Ok(self.push(value, Op::Aggregate(adj, x), &[x]))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "add")?;
        let value = self.value(a).zip_map(self.value(b), |x, y| x + y)?;
        Ok(self.push(value, Op::Add(a, b), &[a, b]))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "sub")?;
        let value = self.value(a).zip_map(self.value(b), |x, y| x - y)?;
        Ok(self.push(value, Op::Sub(a, b), &[a, b]))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "mul")?;
        let value = self.value(a).zip_map(self.value(b), |x, y| x * y)?;
        Ok(self.push(value, Op::Mul(a, b), &[a, b]))
    }

    /// `x + b` with `b` broadcast over the rows of `x`.
    pub fn add_row(&mut self, x: Var, b: Var) -> Result<Var> {
        let (xv, bv) = (self.value(x), self.value(b));
        if !xv.is_matrix() || bv.len() != xv.cols() {
            return Err(Error::Shape(format!(
                "row broadcast of {:?} onto {:?}",
                bv.shape(),
                xv.shape()
            )));
        }
        let c = xv.cols();
        let mut value = xv.clone();
        for (k, v) in value.data_mut().iter_mut().enumerate() {
            *v = *v + bv.data()[k % c];
        }
        Ok(self.push(value, Op::AddRow(x, b), &[x, b]))
    }

    pub fn scale(&mut self, x: Var, c: T) -> Var {
        self.unary(x, Op::Scale(x, c), |v| c * v)
    }

    pub fn sub_scalar(&mut self, x: Var, c: T) -> Var {
        self.unary(x, Op::SubScalar(x, c), |v| v - c)
    }

    pub fn add_scalar(&mut self, x: Var, c: T) -> Var {
        self.unary(x, Op::AddScalar(x, c), |v| v + c)
    }

    /// `c - x`.
    pub fn rsub_scalar(&mut self, c: T, x: Var) -> Var {
        self.unary(x, Op::RSubScalar(c, x), |v| c - v)
    }

    pub fn div_scalar(&mut self, x: Var, c: T) -> Var {
        self.unary(x, Op::DivScalar(x, c), |v| v / c)
    }

    /// `s · x` where `s` is a one-element tensor on the tape.
    pub fn scale_by(&mut self, x: Var, s: Var) -> Result<Var> {
        if self.value(s).len() != 1 {
            return Err(Error::Shape(format!("scale_by expects a scalar, got {:?}", self.value(s).shape())));
        }
        let sv = self.value(s).item();
        let value = self.value(x).map(|v| sv * v);
        Ok(self.push(value, Op::ScaleBy(x, s), &[x, s]))
    }

    pub fn recip(&mut self, x: Var) -> Var {
        self.unary(x, Op::Recip(x), |v| T::one() / v)
    }

    /// `ln(1 + e^x)`, evaluated without overflow.
    pub fn softplus(&mut self, x: Var) -> Var {
        self.unary(x, Op::Softplus(x), softplus)
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        self.unary(x, Op::Tanh(x), |v| v.tanh())
    }

    pub fn relu(&mut self, x: Var) -> Var {
        self.unary(x, Op::Relu(x), |v| if v > T::zero() { v } else { T::zero() })
    }

    pub fn elu(&mut self, x: Var) -> Var {
        self.unary(x, Op::Elu(x), |v| if v > T::zero() { v } else { v.exp_m1() })
    }

    /// Softmax of a vector with max subtraction.
    pub fn softmax(&mut self, x: Var) -> Result<Var> {
        let xv = self.value(x);
        if !xv.all_finite() {
            return Err(Error::Numeric(format!("softmax input is not finite: {:?}", xv.data())));
        }
        if xv.is_empty() {
            return Err(Error::Shape("softmax of an empty vector".into()));
        }
        let max = xv.data().iter().copied().fold(T::neg_infinity(), T::max);
        let exps: Vec<T> = xv.data().iter().map(|&v| (v - max).exp()).collect();
        let total = exps.iter().fold(T::zero(), |a, &b| a + b);
        let value = Tensor::new(xv.shape().to_vec(), exps.into_iter().map(|e| e / total).collect())?;
        Ok(self.push(value, Op::Softmax(x), &[x]))
    }

    /// `x · v` for `x: n×d`, `v: d`, giving a length-`n` vector.
    pub fn matvec(&mut self, x: Var, v: Var) -> Result<Var> {
        let (xv, vv) = (self.value(x), self.value(v));
        if !xv.is_matrix() || vv.len() != xv.cols() {
            return Err(Error::Shape(format!("matvec of {:?} by {:?}", xv.shape(), vv.shape())));
        }
        let out: Vec<T> = (0..xv.rows())
            .map(|i| {
                xv.row(i)
                    .iter()
                    .zip(vv.data())
                    .fold(T::zero(), |acc, (&a, &b)| acc + a * b)
            })
            .collect();
        Ok(self.push(Tensor::vector(out), Op::MatVec(x, v), &[x, v]))
    }

    pub fn mean(&mut self, x: Var) -> Var {
        let xv = self.value(x);
        let value = Tensor::scalar(xv.sum() / T::of(xv.len() as f64));
        self.push(value, Op::Mean(x), &[x])
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let value = Tensor::scalar(self.value(x).sum());
        self.push(value, Op::Sum(x), &[x])
    }

    /// Collect one-element tensors into a vector.
    pub fn stack(&mut self, items: &[Var]) -> Result<Var> {
        let mut out = Vec::with_capacity(items.len());
        for &v in items {
            let t = self.value(v);
            if t.len() != 1 {
                return Err(Error::Shape(format!("stack expects scalars, got {:?}", t.shape())));
            }
            out.push(t.item());
        }
        Ok(self.push(Tensor::vector(out), Op::Stack(items.to_vec()), items))
    }

    /// `Σ_p weights[p] · items[p]`.
    pub fn weighted_sum(&mut self, items: &[Var], weights: Var) -> Result<Var> {
        let w = self.value(weights);
        if items.is_empty() || w.len() != items.len() {
            return Err(Error::Shape(format!(
                "weighted sum of {} tensors with {} weights",
                items.len(),
                w.len()
            )));
        }
        let shape = self.value(items[0]).shape().to_vec();
        let mut out = Tensor::zeros(shape.clone());
        for (p, &h) in items.iter().enumerate() {
            let hv = self.value(h);
            if hv.shape() != shape.as_slice() {
                return Err(Error::Shape(format!("weighted sum: {:?} vs {shape:?}", hv.shape())));
            }
            let wp = w.data()[p];
            for (o, &v) in out.data_mut().iter_mut().zip(hv.data()) {
                *o = *o + wp * v;
            }
        }
        let mut inputs = items.to_vec();
        inputs.push(weights);
        Ok(self.push(out, Op::WeightedSum(items.to_vec(), weights), &inputs))
    }

    /// Inverted dropout. Identity when not training or when `rate == 0`.
    pub fn dropout<R: Rng + ?Sized>(&mut self, x: Var, rate: f64, training: bool, rng: &mut R) -> Result<Var> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::Config(format!("dropout rate {rate} outside [0, 1)")));
        }
        if !training || rate == 0.0 {
            return Ok(x);
        }
        let keep = T::of(1.0 / (1.0 - rate));
        let mask: Vec<T> = (0..self.value(x).len())
            .map(|_| if rng.random::<f64>() < rate { T::zero() } else { keep })
            .collect();
        let xv = self.value(x);
        let value = Tensor::new(
            xv.shape().to_vec(),
            xv.data().iter().zip(&mask).map(|(&v, &m)| v * m).collect(),
        )?;
        Ok(self.push(value, Op::Dropout(x, mask), &[x]))
    }

    /// Spike nonlinearity `Θ(x)` with `Θ(0) = 1`.
    ///
    /// Backward uses `σ'(αx)` (times `α` when `chain_alpha` is set). In
    /// [`TapeMode::SmoothSurrogate`] the forward is `σ(αx)` and the backward
    /// its exact derivative `α σ'(αx)`.
    pub fn heaviside(&mut self, x: Var, alpha: T, chain_alpha: bool) -> Result<Var> {
        if alpha.is_nan() || alpha <= T::zero() {
            return Err(Error::Config(format!("surrogate alpha must be positive, got {alpha}")));
        }
        let op = Op::Heaviside { x, alpha, chain_alpha };
        Ok(match self.mode {
            TapeMode::Spiking => self.unary(x, op, |v| if v >= T::zero() { T::one() } else { T::zero() }),
            TapeMode::SmoothSurrogate => self.unary(x, op, |v| (alpha * v).sigmoid()),
        })
    }

    /// Copy of `x` that blocks gradient flow.
    pub fn detach(&mut self, x: Var) -> Var {
        let value = self.value(x).clone();
        self.push(value, Op::Detach, &[])
    }

    /// `-Σ ln(max(x[r, c], eps))` over the `(row, class)` targets.
    ///
    /// The backward passes `-1 / max(x, eps)` straight through the clamp so
    /// rows with no spikes still receive a gradient.
    pub fn masked_cross_entropy(&mut self, x: Var, targets: &[(usize, usize)], eps: T) -> Result<Var> {
        let xv = self.value(x);
        if !xv.is_matrix() {
            return Err(Error::Shape(format!("cross-entropy expects a matrix, got {:?}", xv.shape())));
        }
        let mut loss = T::zero();
        for &(r, c) in targets {
            if r >= xv.rows() || c >= xv.cols() {
                return Err(Error::Shape(format!("target ({r}, {c}) outside {:?}", xv.shape())));
            }
            loss = loss - xv.get(r, c).max(eps).ln();
        }
        let op = Op::MaskedCrossEntropy {
            x,
            targets: targets.to_vec(),
            eps,
        };
        Ok(self.push(Tensor::scalar(loss), op, &[x]))
    }

    /// Divide each row by `eps + Σ row`.
    pub fn row_normalize(&mut self, x: Var, eps: T) -> Result<Var> {
        let xv = self.value(x);
        if !xv.is_matrix() {
            return Err(Error::Shape(format!("row_normalize expects a matrix, got {:?}", xv.shape())));
        }
        let mut value = xv.clone();
        let c = xv.cols();
        for i in 0..xv.rows() {
            let denom = xv.row(i).iter().fold(T::zero(), |a, &b| a + b) + eps;
            for v in &mut value.data_mut()[i * c..(i + 1) * c] {
                *v = *v / denom;
            }
        }
        Ok(self.push(value, Op::RowNormalize { x, eps }, &[x]))
    }

    /// Reverse-mode sweep from a scalar node.
    pub fn backward(&mut self, loss: Var) -> Result<Gradients<T>> {
        if self.backward_done {
            return Err(Error::Contract(
                "backward called twice on one recording; call zero_grad or reset first".into(),
            ));
        }
        if self.value(loss).len() != 1 {
            return Err(Error::Contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.value(loss).shape()
            )));
        }
        self.grads = (0..self.nodes.len()).map(|_| None).collect();
        self.grads[loss.0] = Some(Tensor::scalar(T::one()));

        for k in (0..=loss.0).rev() {
            if !self.nodes[k].requires_grad {
                continue;
            }
            let Some(g) = self.grads[k].take() else { continue };
            self.propagate(k, &g)?;
            self.grads[k] = Some(g);
        }
        self.backward_done = true;

        let entries = self
            .trainable_leaves()
            .into_iter()
            .map(|v| {
                let g = self.grads[v.0]
                    .clone()
                    .unwrap_or_else(|| Tensor::zeros(self.value(v).shape().to_vec()));
                (v, g)
            })
            .collect();
        Ok(Gradients { entries })
    }

    fn accumulate(&mut self, v: Var, g: Tensor<T>) {
        if !self.nodes[v.0].requires_grad {
            return;
        }
        match &mut self.grads[v.0] {
            Some(existing) => existing.add_assign(&g),
            slot @ None => *slot = Some(g),
        }
    }

    fn propagate(&mut self, k: usize, g: &Tensor<T>) -> Result<()> {
        let out = &self.nodes[k].value;
        let mut pending: Vec<(Var, Tensor<T>)> = Vec::with_capacity(2);
        match &self.nodes[k].op {
            Op::Param | Op::Constant | Op::Detach => {}
            Op::MatMul(x, w) => {
                let (xv, wv) = (self.value(*x), self.value(*w));
                if self.nodes[x.0].requires_grad {
                    pending.push((*x, g.matmul(&wv.transpose()?)?));
                }
                if self.nodes[w.0].requires_grad {
                    pending.push((*w, xv.transpose()?.matmul(g)?));
                }
            }
            Op::Aggregate(adj, x) => {
                let d = g.cols();
                let mut dx = Tensor::zeros(self.value(*x).shape().to_vec());
                let buf = dx.data_mut();
                for i in 0..adj.n() {
                    let grow = g.row(i);
                    for (&j, &c) in adj.row(i).iter().zip(adj.row_coeffs(i)) {
                        let c = T::of(c);
                        for (o, &gv) in buf[j * d..(j + 1) * d].iter_mut().zip(grow) {
                            *o = *o + c * gv;
                        }
                    }
                }
                pending.push((*x, dx));
            }
            Op::Add(a, b) => {
                pending.push((*a, g.clone()));
                pending.push((*b, g.clone()));
            }
            Op::Sub(a, b) => {
                pending.push((*a, g.clone()));
                pending.push((*b, g.map(|v| -v)));
            }
            Op::Mul(a, b) => {
                pending.push((*a, g.zip_map(self.value(*b), |gv, bv| gv * bv)?));
                pending.push((*b, g.zip_map(self.value(*a), |gv, av| gv * av)?));
            }
            Op::AddRow(x, b) => {
                let c = g.cols();
                let mut db = vec![T::zero(); c];
                for (idx, &gv) in g.data().iter().enumerate() {
                    db[idx % c] = db[idx % c] + gv;
                }
                pending.push((*x, g.clone()));
                pending.push((*b, Tensor::new(self.value(*b).shape().to_vec(), db)?));
            }
            Op::Scale(x, c) => {
                let c = *c;
                pending.push((*x, g.map(|v| c * v)));
            }
            Op::SubScalar(x, _) | Op::AddScalar(x, _) => pending.push((*x, g.clone())),
            Op::RSubScalar(_, x) => pending.push((*x, g.map(|v| -v))),
            Op::DivScalar(x, c) => {
                let c = *c;
                pending.push((*x, g.map(|v| v / c)));
            }
            Op::ScaleBy(x, s) => {
                let sv = self.value(*s).item();
                let xv = self.value(*x);
                let ds = g.data().iter().zip(xv.data()).fold(T::zero(), |a, (&gv, &v)| a + gv * v);
                pending.push((*x, g.map(|v| sv * v)));
                pending.push((*s, Tensor::new(self.value(*s).shape().to_vec(), vec![ds])?));
            }
            Op::Recip(x) => {
                let dx = g.zip_map(self.value(*x), |gv, v| -gv / (v * v))?;
                pending.push((*x, dx));
            }
            Op::Softplus(x) => {
                let dx = g.zip_map(self.value(*x), |gv, v| gv * v.sigmoid())?;
                pending.push((*x, dx));
            }
            Op::Tanh(x) => {
                let dx = g.zip_map(out, |gv, y| gv * (T::one() - y * y))?;
                pending.push((*x, dx));
            }
            Op::Relu(x) => {
                let dx = g.zip_map(self.value(*x), |gv, v| if v > T::zero() { gv } else { T::zero() })?;
                pending.push((*x, dx));
            }
            Op::Elu(x) => {
                let dx = g.zip_map(self.value(*x), |gv, v| if v > T::zero() { gv } else { gv * v.exp() })?;
                pending.push((*x, dx));
            }
            Op::Softmax(x) => {
                let dot = g.data().iter().zip(out.data()).fold(T::zero(), |a, (&gv, &y)| a + gv * y);
                let dx = g.zip_map(out, |gv, y| y * (gv - dot))?;
                pending.push((*x, dx));
            }
            Op::MatVec(x, v) => {
                let (xv, vv) = (self.value(*x), self.value(*v));
                let (n, d) = (xv.rows(), xv.cols());
                let mut dx = vec![T::zero(); n * d];
                let mut dv = vec![T::zero(); d];
                for i in 0..n {
                    let gi = g.data()[i];
                    for j in 0..d {
                        dx[i * d + j] = gi * vv.data()[j];
                        dv[j] = dv[j] + gi * xv.get(i, j);
                    }
                }
                pending.push((*x, Tensor::new(xv.shape().to_vec(), dx)?));
                pending.push((*v, Tensor::new(vv.shape().to_vec(), dv)?));
            }
            Op::Mean(x) => {
                let xv = self.value(*x);
                let gv = g.item() / T::of(xv.len() as f64);
                pending.push((*x, Tensor::full(xv.shape().to_vec(), gv)));
            }
            Op::Sum(x) => {
                let xv = self.value(*x);
                pending.push((*x, Tensor::full(xv.shape().to_vec(), g.item())));
            }
            Op::Stack(items) => {
                for (p, &v) in items.iter().enumerate() {
                    pending.push((v, Tensor::new(self.value(v).shape().to_vec(), vec![g.data()[p]])?));
                }
            }
            Op::WeightedSum(items, w) => {
                let wv = self.value(*w);
                let mut dw = Vec::with_capacity(items.len());
                for (p, &h) in items.iter().enumerate() {
                    let hv = self.value(h);
                    dw.push(g.data().iter().zip(hv.data()).fold(T::zero(), |a, (&gv, &v)| a + gv * v));
                    let wp = wv.data()[p];
                    pending.push((h, g.map(|v| wp * v)));
                }
                pending.push((*w, Tensor::new(wv.shape().to_vec(), dw)?));
            }
            Op::Dropout(x, mask) => {
                let dx = Tensor::new(
                    g.shape().to_vec(),
                    g.data().iter().zip(mask).map(|(&gv, &m)| gv * m).collect(),
                )?;
                pending.push((*x, dx));
            }
            Op::Heaviside { x, alpha, chain_alpha } => {
                let (alpha, chain) = (*alpha, *chain_alpha);
                let scale_alpha = chain || self.mode == TapeMode::SmoothSurrogate;
                let dx = g.zip_map(self.value(*x), |gv, v| {
                    let s = (alpha * v).sigmoid();
                    let d = s * (T::one() - s);
                    if scale_alpha {
                        gv * alpha * d
                    } else {
                        gv * d
                    }
                })?;
                pending.push((*x, dx));
            }
            Op::MaskedCrossEntropy { x, targets, eps } => {
                let xv = self.value(*x);
                let mut dx = Tensor::zeros(xv.shape().to_vec());
                let c = xv.cols();
                let gv = g.item();
                for &(r, cls) in targets {
                    let slot = &mut dx.data_mut()[r * c + cls];
                    *slot = *slot - gv / xv.get(r, cls).max(*eps);
                }
                pending.push((*x, dx));
            }
            Op::RowNormalize { x, eps } => {
                let xv = self.value(*x);
                let c = xv.cols();
                let mut dx = Tensor::zeros(xv.shape().to_vec());
                for i in 0..xv.rows() {
                    let denom = xv.row(i).iter().fold(T::zero(), |a, &b| a + b) + *eps;
                    let grow = g.row(i);
                    let cross = grow
                        .iter()
                        .zip(xv.row(i))
                        .fold(T::zero(), |a, (&gv, &v)| a + gv * v)
                        / (denom * denom);
                    for (j, o) in dx.data_mut()[i * c..(i + 1) * c].iter_mut().enumerate() {
                        *o = grow[j] / denom - cross;
                    }
                }
                pending.push((*x, dx));
            }
        }
        for (v, gv) in pending {
            self.accumulate(v, gv);
        }
        Ok(())
    }
}

pub(crate) fn softplus<T: Scalar>(v: T) -> T {
    v.max(T::zero()) + (-v.abs()).exp().ln_1p()
}
