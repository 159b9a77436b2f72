use std::cell::RefCell;
use std::f64::consts::PI;

use super::Tensor;
use crate::error::{Error, Result};

/// Smooth relaxation of the unit step used by conditional swaps.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Sigmoid {
    /// `1 / (1 + exp(-beta x))`
    Logistic { beta: f64 },
    /// `atan(beta x) / pi + 1/2`
    Cauchy { beta: f64 },
}

impl Sigmoid {
    pub fn beta(&self) -> f64 {
        match *self {
            Sigmoid::Logistic { beta } | Sigmoid::Cauchy { beta } => beta,
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            Sigmoid::Logistic { beta } => logistic(beta * x),
            Sigmoid::Cauchy { beta } => (beta * x).atan() / PI + 0.5,
        }
    }

    pub fn derivative(&self, x: f64) -> f64 {
        match *self {
            Sigmoid::Logistic { beta } => {
                let s = logistic(beta * x);
                beta * s * (1.0 - s)
            }
            Sigmoid::Cauchy { beta } => {
                let bx = beta * x;
                beta / (PI * (1.0 + bx * bx))
            }
        }
    }

    fn validate(&self) -> Result<()> {
        let beta = self.beta();
        if beta > 0.0 && beta.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "inverse temperature must be positive and finite, got {beta}"
            )))
        }
    }
}

pub(crate) fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

#[derive(Debug)]
enum Op {
    Leaf,
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Neg(usize),
    Scale(usize, f64),
    Offset(usize),
    Log(usize),
    Exp(usize),
    Relu(usize),
    Clamp(usize, f64, f64),
    Softplus(usize),
    Sigmoid(usize, Sigmoid),
    Matmul(usize, usize),
    Transpose(usize),
    Reshape(usize),
    Sum(usize, usize),
    Mean(usize, usize),
    SumAll(usize),
    MeanAll(usize),
    LogSumExp(usize),
    SwapMatrix {
        input: usize,
        pairs: Vec<(usize, usize)>,
        sigmoid: Sigmoid,
    },
}

struct Node {
    value: Tensor,
    op: Op,
}

/// Append-only record of operations; gradients flow back through it in
/// reverse creation order.
#[derive(Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
    grads: RefCell<Vec<Option<Tensor>>>,
}

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: &'t Tape,
    id: usize,
}

impl std::fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Var")
            .field("id", &self.id)
            .field("shape", &self.shape())
            .finish()
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Records an input. Constants are leaves whose gradient nobody reads.
    pub fn leaf(&self, value: Tensor) -> Var<'_> {
        self.push(value, Op::Leaf)
    }

    pub fn constant(&self, value: Tensor) -> Var<'_> {
        self.leaf(value)
    }

    fn push(&self, value: Tensor, op: Op) -> Var<'_> {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node { value, op });
        Var {
            tape: self,
            id: nodes.len() - 1,
        }
    }

    fn value_of(&self, id: usize) -> std::cell::Ref<'_, Tensor> {
        std::cell::Ref::map(self.nodes.borrow(), |n| &n[id].value)
    }

    /// Block matrix of relaxed conditional swaps for one comparator layer.
    ///
    /// `input` has shape `[..., n]`; the result has shape `[..., n, n]`. For a
    /// pair `(i, j)` the diagonal entries `(i,i)` and `(j,j)` are
    /// `sigmoid(a_j - a_i)` and the off-diagonal entries `(i,j)`, `(j,i)` are
    /// one minus that. Wires not touched by the layer keep an identity row.
    pub fn swap_matrix<'t>(
        &'t self,
        input: Var<'t>,
        pairs: &[(usize, usize)],
        sigmoid: Sigmoid,
    ) -> Result<Var<'t>> {
        sigmoid.validate()?;
        let value = {
            let a = self.value_of(input.id);
            let n = *a
                .shape()
                .last()
                .ok_or_else(|| Error::Shape("swap matrix needs a vector input".into()))?;
            let mut seen = vec![false; n];
            for &(i, j) in pairs {
                if i >= j || j >= n {
                    return Err(Error::InvalidArgument(format!(
                        "comparator ({i},{j}) invalid for {n} wires"
                    )));
                }
                if seen[i] || seen[j] {
                    return Err(Error::InvalidArgument(format!(
                        "wire reused within one layer at ({i},{j})"
                    )));
                }
                seen[i] = true;
                seen[j] = true;
            }
            let rows = a.len() / n;
            let mut out = vec![0.0; rows * n * n];
            for r in 0..rows {
                let av = &a.data()[r * n..(r + 1) * n];
                let block = &mut out[r * n * n..(r + 1) * n * n];
                for k in 0..n {
                    block[k * n + k] = 1.0;
                }
                for &(i, j) in pairs {
                    let s = sigmoid.eval(av[j] - av[i]);
                    block[i * n + i] = s;
                    block[j * n + j] = s;
                    block[i * n + j] = 1.0 - s;
                    block[j * n + i] = 1.0 - s;
                }
            }
            let mut shape = a.shape().to_vec();
            shape.push(n);
            Tensor::from_parts(shape, out)
        };
        Ok(self.push(
            value,
            Op::SwapMatrix {
                input: input.id,
                pairs: pairs.to_vec(),
                sigmoid,
            },
        ))
    }

    /// Reverse pass from a scalar `loss`. Gradients are added to whatever is
    /// already stored, so two calls without [`Tape::reset_grads`] double them.
    pub fn backward(&self, loss: Var<'_>) -> Result<()> {
        let nodes = self.nodes.borrow();
        let root = &nodes[loss.id].value;
        if !root.is_scalar() {
            return Err(Error::NonScalarLoss(root.shape().to_vec()));
        }
        let mut adj: Vec<Option<Tensor>> = vec![None; loss.id + 1];
        adj[loss.id] = Some(Tensor::full(root.shape(), 1.0));
        for id in (0..=loss.id).rev() {
            let Some(g) = adj[id].take() else { continue };
            propagate(&nodes, id, &g, &mut adj);
            adj[id] = Some(g);
        }
        let mut grads = self.grads.borrow_mut();
        if grads.len() < nodes.len() {
            grads.resize(nodes.len(), None);
        }
        for (id, g) in adj.into_iter().enumerate() {
            if let Some(g) = g {
                match &mut grads[id] {
                    Some(acc) => acc.add_assign(&g),
                    slot @ None => *slot = Some(g),
                }
            }
        }
        Ok(())
    }

    pub fn reset_grads(&self) {
        self.grads.borrow_mut().clear();
    }
}

fn accumulate(adj: &mut [Option<Tensor>], id: usize, g: Tensor) {
    match &mut adj[id] {
        Some(acc) => acc.add_assign(&g),
        slot @ None => *slot = Some(g),
    }
}

/// Sums a gradient of `a`'s shape down to `b`'s (possibly broadcast) shape.
fn reduce_broadcast(g: &[f64], b_shape: &[usize], b_len: usize) -> Tensor {
    let mut out = vec![0.0; b_len];
    for (k, &v) in g.iter().enumerate() {
        out[k % b_len] += v;
    }
    Tensor::from_parts(b_shape.to_vec(), out)
}

fn propagate(nodes: &[Node], id: usize, g: &Tensor, adj: &mut [Option<Tensor>]) {
    let out = &nodes[id].value;
    let gd = g.data();
    let val = |i: usize| &nodes[i].value;
    match &nodes[id].op {
        Op::Leaf => {}
        Op::Add(a, b) | Op::Sub(a, b) => {
            let sign = if matches!(nodes[id].op, Op::Sub(..)) { -1.0 } else { 1.0 };
            accumulate(adj, *a, g.clone());
            let bv = val(*b);
            let mut gb = reduce_broadcast(gd, bv.shape(), bv.len());
            if sign < 0.0 {
                gb.data_mut().iter_mut().for_each(|x| *x = -*x);
            }
            accumulate(adj, *b, gb);
        }
        Op::Mul(a, b) => {
            let (av, bv) = (val(*a), val(*b));
            let lb = bv.len();
            let ga: Vec<f64> = gd
                .iter()
                .enumerate()
                .map(|(k, &gk)| gk * bv.data()[k % lb])
                .collect();
            let prod: Vec<f64> = gd.iter().zip(av.data()).map(|(&gk, &x)| gk * x).collect();
            let gb = reduce_broadcast(&prod, bv.shape(), lb);
            accumulate(adj, *a, Tensor::from_parts(av.shape().to_vec(), ga));
            accumulate(adj, *b, gb);
        }
        Op::Neg(a) => accumulate(adj, *a, g.map(|x| -x)),
        Op::Scale(a, c) => accumulate(adj, *a, g.map(|x| x * c)),
        Op::Offset(a) => accumulate(adj, *a, g.clone()),
        Op::Log(a) => {
            let av = val(*a);
            let d = gd.iter().zip(av.data()).map(|(&gk, &x)| gk / x).collect();
            accumulate(adj, *a, Tensor::from_parts(av.shape().to_vec(), d));
        }
        Op::Exp(a) => {
            let d = gd.iter().zip(out.data()).map(|(&gk, &y)| gk * y).collect();
            accumulate(adj, *a, Tensor::from_parts(out.shape().to_vec(), d));
        }
        Op::Relu(a) => {
            let av = val(*a);
            let d = gd
                .iter()
                .zip(av.data())
                .map(|(&gk, &x)| if x > 0.0 { gk } else { 0.0 })
                .collect();
            accumulate(adj, *a, Tensor::from_parts(av.shape().to_vec(), d));
        }
        Op::Clamp(a, lo, hi) => {
            let av = val(*a);
            let d = gd
                .iter()
                .zip(av.data())
                .map(|(&gk, &x)| if x >= *lo && x <= *hi { gk } else { 0.0 })
                .collect();
            accumulate(adj, *a, Tensor::from_parts(av.shape().to_vec(), d));
        }
        Op::Softplus(a) => {
            let av = val(*a);
            let d = gd
                .iter()
                .zip(av.data())
                .map(|(&gk, &x)| gk * logistic(x))
                .collect();
            accumulate(adj, *a, Tensor::from_parts(av.shape().to_vec(), d));
        }
        Op::Sigmoid(a, s) => {
            let av = val(*a);
            let d = gd
                .iter()
                .zip(av.data())
                .map(|(&gk, &x)| gk * s.derivative(x))
                .collect();
            accumulate(adj, *a, Tensor::from_parts(av.shape().to_vec(), d));
        }
        Op::Matmul(a, b) => {
            let (av, bv) = (val(*a), val(*b));
            let (ga, gb) = matmul_backward(av, bv, g);
            accumulate(adj, *a, ga);
            accumulate(adj, *b, gb);
        }
        Op::Transpose(a) => {
            let t = transpose_last2(g);
            accumulate(adj, *a, t);
        }
        Op::Reshape(a) => {
            let av = val(*a);
            accumulate(adj, *a, Tensor::from_parts(av.shape().to_vec(), gd.to_vec()));
        }
        Op::Sum(a, axis) | Op::Mean(a, axis) => {
            let av = val(*a);
            let (outer, len, inner) = split_axis(av.shape(), *axis);
            let scale = if matches!(nodes[id].op, Op::Mean(..)) {
                1.0 / len as f64
            } else {
                1.0
            };
            let mut d = vec![0.0; av.len()];
            for o in 0..outer {
                for l in 0..len {
                    for i in 0..inner {
                        d[(o * len + l) * inner + i] = gd[o * inner + i] * scale;
                    }
                }
            }
            accumulate(adj, *a, Tensor::from_parts(av.shape().to_vec(), d));
        }
        Op::SumAll(a) | Op::MeanAll(a) => {
            let av = val(*a);
            let scale = if matches!(nodes[id].op, Op::MeanAll(..)) {
                1.0 / av.len() as f64
            } else {
                1.0
            };
            accumulate(adj, *a, Tensor::full(av.shape(), gd[0] * scale));
        }
        Op::LogSumExp(a) => {
            let av = val(*a);
            let n = *av.shape().last().unwrap();
            let mut d = vec![0.0; av.len()];
            for r in 0..av.len() / n {
                let lse = out.data()[r];
                for c in 0..n {
                    d[r * n + c] = gd[r] * (av.data()[r * n + c] - lse).exp();
                }
            }
            accumulate(adj, *a, Tensor::from_parts(av.shape().to_vec(), d));
        }
        Op::SwapMatrix {
            input,
            pairs,
            sigmoid,
        } => {
            let av = val(*input);
            let n = *av.shape().last().unwrap();
            let mut d = vec![0.0; av.len()];
            for r in 0..av.len() / n {
                let a = &av.data()[r * n..(r + 1) * n];
                let gb = &gd[r * n * n..(r + 1) * n * n];
                let da = &mut d[r * n..(r + 1) * n];
                for &(i, j) in pairs {
                    let gs = gb[i * n + i] + gb[j * n + j] - gb[i * n + j] - gb[j * n + i];
                    let t = gs * sigmoid.derivative(a[j] - a[i]);
                    da[j] += t;
                    da[i] -= t;
                }
            }
            accumulate(adj, *input, Tensor::from_parts(av.shape().to_vec(), d));
        }
    }
}

fn split_axis(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    let outer = shape[..axis].iter().product();
    let inner = shape[axis + 1..].iter().product();
    (outer, shape[axis], inner)
}

fn check_broadcast(a: &[usize], b: &[usize], b_len: usize) -> Result<()> {
    if a == b || b_len == 1 || (b.len() <= a.len() && a.ends_with(b)) {
        Ok(())
    } else {
        Err(Error::Shape(format!(
            "cannot broadcast {b:?} onto {a:?}"
        )))
    }
}

struct MatmulDims {
    batch: usize,
    m: usize,
    k: usize,
    n: usize,
    shared_rhs: bool,
}

fn matmul_dims(a: &[usize], b: &[usize]) -> Result<MatmulDims> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::Shape(format!(
            "matmul needs rank >= 2 operands, got {a:?} and {b:?}"
        )));
    }
    let (m, k) = (a[a.len() - 2], a[a.len() - 1]);
    let (k2, n) = (b[b.len() - 2], b[b.len() - 1]);
    if k != k2 {
        return Err(Error::Shape(format!(
            "matmul inner dimensions differ: {a:?} x {b:?}"
        )));
    }
    let a_batch = &a[..a.len() - 2];
    let b_batch = &b[..b.len() - 2];
    let shared_rhs = b_batch.is_empty();
    if !shared_rhs && a_batch != b_batch {
        return Err(Error::Shape(format!(
            "matmul batch dimensions differ: {a:?} x {b:?}"
        )));
    }
    Ok(MatmulDims {
        batch: a_batch.iter().product(),
        m,
        k,
        n,
        shared_rhs,
    })
}

fn matmul_forward(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let MatmulDims {
        batch,
        m,
        k,
        n,
        shared_rhs,
    } = matmul_dims(a.shape(), b.shape())?;
    let mut out = vec![0.0; batch * m * n];
    for bi in 0..batch {
        let ab = &a.data()[bi * m * k..(bi + 1) * m * k];
        let bb = if shared_rhs {
            b.data()
        } else {
            &b.data()[bi * k * n..(bi + 1) * k * n]
        };
        let cb = &mut out[bi * m * n..(bi + 1) * m * n];
        for i in 0..m {
            let crow = &mut cb[i * n..(i + 1) * n];
            for p in 0..k {
                let aip = ab[i * k + p];
                let brow = &bb[p * n..(p + 1) * n];
                for (c, &bv) in crow.iter_mut().zip(brow) {
                    *c += aip * bv;
                }
            }
        }
    }
    let mut shape = a.shape()[..a.rank() - 2].to_vec();
    shape.extend([m, n]);
    Ok(Tensor::from_parts(shape, out))
}

fn matmul_backward(a: &Tensor, b: &Tensor, g: &Tensor) -> (Tensor, Tensor) {
    let MatmulDims {
        batch,
        m,
        k,
        n,
        shared_rhs,
    } = matmul_dims(a.shape(), b.shape()).expect("validated in forward");
    let mut ga = vec![0.0; a.len()];
    let mut gb = vec![0.0; b.len()];
    for bi in 0..batch {
        let ab = &a.data()[bi * m * k..(bi + 1) * m * k];
        let b_off = if shared_rhs { 0 } else { bi * k * n };
        let bb = &b.data()[b_off..b_off + k * n];
        let gbatch = &g.data()[bi * m * n..(bi + 1) * m * n];
        let gab = &mut ga[bi * m * k..(bi + 1) * m * k];
        for i in 0..m {
            let grow = &gbatch[i * n..(i + 1) * n];
            for p in 0..k {
                let brow = &bb[p * n..(p + 1) * n];
                gab[i * k + p] = grow.iter().zip(brow).map(|(x, y)| x * y).sum();
            }
        }
        let gbb = &mut gb[b_off..b_off + k * n];
        for i in 0..m {
            let grow = &gbatch[i * n..(i + 1) * n];
            for p in 0..k {
                let aip = ab[i * k + p];
                for (acc, &gv) in gbb[p * n..(p + 1) * n].iter_mut().zip(grow) {
                    *acc += aip * gv;
                }
            }
        }
    }
    (
        Tensor::from_parts(a.shape().to_vec(), ga),
        Tensor::from_parts(b.shape().to_vec(), gb),
    )
}

fn transpose_last2(t: &Tensor) -> Tensor {
    let r = t.rank();
    let (m, n) = (t.shape()[r - 2], t.shape()[r - 1]);
    let batch = t.len() / (m * n);
    let mut out = vec![0.0; t.len()];
    for bi in 0..batch {
        let src = &t.data()[bi * m * n..(bi + 1) * m * n];
        let dst = &mut out[bi * m * n..(bi + 1) * m * n];
        for i in 0..m {
            for j in 0..n {
                dst[j * m + i] = src[i * n + j];
            }
        }
    }
    let mut shape = t.shape().to_vec();
    shape.swap(r - 2, r - 1);
    Tensor::from_parts(shape, out)
}

impl<'t> Var<'t> {
    pub fn id(&self) -> usize {
        self.id
    }

    pub fn tape(&self) -> &'t Tape {
        self.tape
    }

    pub fn value(&self) -> Tensor {
        self.tape.value_of(self.id).clone()
    }

    pub fn shape(&self) -> Vec<usize> {
        self.tape.value_of(self.id).shape().to_vec()
    }

    /// Value of a one-element variable.
    pub fn item(&self) -> f64 {
        self.tape.value_of(self.id).item()
    }

    /// Accumulated gradient; zeros if no backward pass has reached this node.
    pub fn grad(&self) -> Tensor {
        let grads = self.tape.grads.borrow();
        match grads.get(self.id) {
            Some(Some(g)) => g.clone(),
            _ => Tensor::full(self.tape.value_of(self.id).shape(), 0.0),
        }
    }

    fn unary(&self, op: Op, f: impl Fn(f64) -> f64) -> Var<'t> {
        let value = self.tape.value_of(self.id).map(f);
        self.tape.push(value, op)
    }

    fn binary(&self, other: Var<'t>, op: Op, f: impl Fn(f64, f64) -> f64) -> Result<Var<'t>> {
        let value = {
            let a = self.tape.value_of(self.id);
            let b = self.tape.value_of(other.id);
            check_broadcast(a.shape(), b.shape(), b.len())?;
            let lb = b.len();
            let data = a
                .data()
                .iter()
                .enumerate()
                .map(|(k, &x)| f(x, b.data()[k % lb]))
                .collect();
            Tensor::from_parts(a.shape().to_vec(), data)
        };
        Ok(self.tape.push(value, op))
    }

    /// Elementwise sum; `other` may be a scalar or broadcast along leading
    /// dimensions of `self`.
    pub fn add(&self, other: Var<'t>) -> Result<Var<'t>> {
        self.binary(other, Op::Add(self.id, other.id), |a, b| a + b)
    }

    pub fn sub(&self, other: Var<'t>) -> Result<Var<'t>> {
        self.binary(other, Op::Sub(self.id, other.id), |a, b| a - b)
    }

    pub fn mul(&self, other: Var<'t>) -> Result<Var<'t>> {
        self.binary(other, Op::Mul(self.id, other.id), |a, b| a * b)
    }

    pub fn neg(&self) -> Var<'t> {
        self.unary(Op::Neg(self.id), |x| -x)
    }

    pub fn scale(&self, c: f64) -> Var<'t> {
        self.unary(Op::Scale(self.id, c), |x| x * c)
    }

    /// Adds a constant to every element.
    pub fn offset(&self, c: f64) -> Var<'t> {
        self.unary(Op::Offset(self.id), |x| x + c)
    }

    /// Natural log; every input must be strictly positive.
    pub fn log(&self) -> Result<Var<'t>> {
        {
            let v = self.tape.value_of(self.id);
            if let Some(bad) = v.data().iter().find(|&&x| x.is_nan() || x <= 0.0) {
                return Err(Error::Domain(format!("log of non-positive value {bad}")));
            }
        }
        Ok(self.unary(Op::Log(self.id), f64::ln))
    }

    pub fn exp(&self) -> Var<'t> {
        self.unary(Op::Exp(self.id), f64::exp)
    }

    /// `max(x, 0)`; the derivative at zero is taken as zero.
    pub fn relu(&self) -> Var<'t> {
        self.unary(Op::Relu(self.id), |x| x.max(0.0))
    }

    pub fn clamp(&self, lo: f64, hi: f64) -> Result<Var<'t>> {
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(Error::InvalidArgument(format!("clamp bounds [{lo}, {hi}]")));
        }
        Ok(self.unary(Op::Clamp(self.id, lo, hi), |x| x.clamp(lo, hi)))
    }

    /// `log(1 + exp(x))`, evaluated without overflow.
    pub fn softplus(&self) -> Var<'t> {
        self.unary(Op::Softplus(self.id), softplus)
    }

    pub fn sigmoid(&self, s: Sigmoid) -> Result<Var<'t>> {
        s.validate()?;
        Ok(self.unary(Op::Sigmoid(self.id, s), |x| s.eval(x)))
    }

    pub fn sigma_logistic(&self, beta: f64) -> Result<Var<'t>> {
        self.sigmoid(Sigmoid::Logistic { beta })
    }

    pub fn sigma_cauchy(&self, beta: f64) -> Result<Var<'t>> {
        self.sigmoid(Sigmoid::Cauchy { beta })
    }

    /// Matrix product over the last two axes. `other` is either a plain
    /// matrix shared across `self`'s batch axes or carries the same batch axes.
    pub fn matmul(&self, other: Var<'t>) -> Result<Var<'t>> {
        let value = {
            let a = self.tape.value_of(self.id);
            let b = self.tape.value_of(other.id);
            matmul_forward(&a, &b)?
        };
        Ok(self.tape.push(value, Op::Matmul(self.id, other.id)))
    }

    /// Swaps the last two axes.
    pub fn transpose(&self) -> Result<Var<'t>> {
        let value = {
            let a = self.tape.value_of(self.id);
            if a.rank() < 2 {
                return Err(Error::Shape(format!("transpose of rank-{} tensor", a.rank())));
            }
            transpose_last2(&a)
        };
        Ok(self.tape.push(value, Op::Transpose(self.id)))
    }

    pub fn reshape(&self, shape: &[usize]) -> Result<Var<'t>> {
        let value = self.tape.value_of(self.id).reshape(shape)?;
        Ok(self.tape.push(value, Op::Reshape(self.id)))
    }

    fn reduce_axis(&self, axis: usize, mean: bool) -> Result<Var<'t>> {
        let value = {
            let a = self.tape.value_of(self.id);
            if axis >= a.rank() {
                return Err(Error::Axis {
                    axis,
                    rank: a.rank(),
                });
            }
            let (outer, len, inner) = split_axis(a.shape(), axis);
            let mut out = vec![0.0; outer * inner];
            for o in 0..outer {
                for l in 0..len {
                    for i in 0..inner {
                        out[o * inner + i] += a.data()[(o * len + l) * inner + i];
                    }
                }
            }
            if mean {
                out.iter_mut().for_each(|x| *x /= len as f64);
            }
            let mut shape = a.shape().to_vec();
            shape.remove(axis);
            Tensor::from_parts(shape, out)
        };
        let op = if mean {
            Op::Mean(self.id, axis)
        } else {
            Op::Sum(self.id, axis)
        };
        Ok(self.tape.push(value, op))
    }

    pub fn sum(&self, axis: usize) -> Result<Var<'t>> {
        self.reduce_axis(axis, false)
    }

    pub fn mean(&self, axis: usize) -> Result<Var<'t>> {
        self.reduce_axis(axis, true)
    }

    pub fn sum_all(&self) -> Var<'t> {
        let s = self.tape.value_of(self.id).data().iter().sum();
        self.tape.push(Tensor::scalar(s), Op::SumAll(self.id))
    }

    pub fn mean_all(&self) -> Var<'t> {
        let value = {
            let v = self.tape.value_of(self.id);
            v.data().iter().sum::<f64>() / v.len() as f64
        };
        self.tape.push(Tensor::scalar(value), Op::MeanAll(self.id))
    }

    /// `log(sum(exp(x)))` over the last axis with the usual max shift.
    pub fn log_sum_exp(&self) -> Result<Var<'t>> {
        let value = {
            let a = self.tape.value_of(self.id);
            let n = *a
                .shape()
                .last()
                .ok_or_else(|| Error::Shape("log_sum_exp of a scalar".into()))?;
            let out = a
                .data()
                .chunks(n)
                .map(|row| {
                    let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    m + row.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
                })
                .collect();
            let mut shape = a.shape().to_vec();
            shape.pop();
            Tensor::from_parts(shape, out)
        };
        Ok(self.tape.push(value, Op::LogSumExp(self.id)))
    }
}
