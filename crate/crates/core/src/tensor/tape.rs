//! Reverse-mode differentiation over an append-only tape.
//!
//! Every primitive applied through a [`Tape`] appends a node holding its
//! forward value and what the backward pass needs. Inputs always precede
//! the nodes that use them, so a single reverse sweep visits each node once.

use super::kernels::{self, ConvGeom, Padding, PoolGeom, PoolKind};
use super::{check_shape, Result, Tensor, TensorError};
use serde::{Deserialize, Serialize};

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UnaryFn {
    Identity,
    Relu,
    LeakyRelu,
    Sigmoid,
    Tanh,
}

pub const LEAKY_SLOPE: f64 = 0.01;

impl UnaryFn {
    pub const ALL: [UnaryFn; 5] = [
        UnaryFn::Identity,
        UnaryFn::Relu,
        UnaryFn::LeakyRelu,
        UnaryFn::Sigmoid,
        UnaryFn::Tanh,
    ];

    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            UnaryFn::Identity => x,
            UnaryFn::Relu => x.max(0.0),
            UnaryFn::LeakyRelu => {
                if x > 0.0 {
                    x
                } else {
                    LEAKY_SLOPE * x
                }
            }
            UnaryFn::Sigmoid => sigmoid(x),
            UnaryFn::Tanh => x.tanh(),
        }
    }

    /// Derivative expressed through the forward output `y`.
    #[inline]
    fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            UnaryFn::Identity => 1.0,
            UnaryFn::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            UnaryFn::LeakyRelu => {
                if y > 0.0 {
                    1.0
                } else {
                    LEAKY_SLOPE
                }
            }
            UnaryFn::Sigmoid => y * (1.0 - y),
            UnaryFn::Tanh => 1.0 - y * y,
        }
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Bmm(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Unary(Var, UnaryFn),
    Reshape(Var),
    Permute(Var, Vec<usize>),
    Broadcast(Var, Vec<usize>),
    SumAxis(Var, usize),
    SumAll(Var),
    Softmax(Var, usize),
    Conv {
        x: Var,
        k: Var,
        geom: ConvGeom,
    },
    Pool {
        x: Var,
        geom: PoolGeom,
        kind: PoolKind,
    },
    Pad(Var, Vec<usize>),
    ConcatLast(Vec<Var>),
    RelGather {
        table: Var,
        planes: usize,
        len: usize,
        width: usize,
    },
    Standardize {
        x: Var,
        inv: Vec<f64>,
        width: usize,
    },
    ConstMul(Var, Vec<f64>),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    needs_grad: bool,
}

/// One differentiation session. Consumed by [`Tape::backward`].
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients produced by a backward sweep, indexed by [`Var`].
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
    lens: Vec<usize>,
}

impl Gradients {
    /// Gradient buffer for `v`; zeros when the loss does not depend on it.
    pub fn wrt(&self, v: Var) -> Vec<f64> {
        match &self.grads[v.0] {
            Some(g) => g.clone(),
            None => vec![0.0; self.lens[v.0]],
        }
    }

    pub fn get(&self, v: Var) -> Option<&[f64]> {
        self.grads[v.0].as_deref()
    }

    pub fn all_finite(&self) -> bool {
        self.grads.iter().flatten().all(|g| g.iter().all(|x| x.is_finite()))
    }
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

    fn push(&mut self, value: Tensor, op: Op, needs_grad: bool) -> Var {
        self.nodes.push(Node { value, op, needs_grad });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    /// A value that receives no gradient.
    pub fn constant(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf, false)
    }

    /// A trainable leaf.
    pub fn param(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf, true)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = kernels::matmul(self.value(a), self.value(b))?;
        let ng = self.needs(a) || self.needs(b);
        Ok(self.push(out, Op::MatMul(a, b), ng))
    }

    pub fn bmm(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = kernels::bmm(self.value(a), self.value(b))?;
        let ng = self.needs(a) || self.needs(b);
        Ok(self.push(out, Op::Bmm(a, b), ng))
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        if self.shape(a) != self.shape(b) {
            return Err(TensorError::Shape {
                op,
                lhs: self.shape(a).to_vec(),
                rhs: self.shape(b).to_vec(),
            });
        }
        Ok(())
    }

    fn zip(&mut self, op: &'static str, a: Var, b: Var, f: impl Fn(f64, f64) -> f64, node: Op) -> Result<Var> {
        self.same_shape(op, a, b)?;
        let (va, vb) = (self.value(a), self.value(b));
        let data = va.data().iter().zip(vb.data()).map(|(&x, &y)| f(x, y)).collect();
        let out = Tensor::new(va.shape().to_vec(), data)?;
        let ng = self.needs(a) || self.needs(b);
        Ok(self.push(out, node, ng))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip("add", a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip("sub", a, b, |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip("mul", a, b, |x, y| x * y, Op::Mul(a, b))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let out = self.value(a).map(|x| x * c);
        let ng = self.needs(a);
        self.push(out, Op::Scale(a, c), ng)
    }

    pub fn unary(&mut self, a: Var, f: UnaryFn) -> Var {
        if f == UnaryFn::Identity {
            return a;
        }
        let out = self.value(a).map(|x| f.apply(x));
        let ng = self.needs(a);
        self.push(out, Op::Unary(a, f), ng)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.unary(a, UnaryFn::Sigmoid)
    }

    /// Elementwise product with a constant buffer of the same length.
    pub fn const_mul(&mut self, a: Var, mask: Vec<f64>) -> Result<Var> {
        let va = self.value(a);
        if mask.len() != va.len() {
            return Err(TensorError::Shape {
                op: "const_mul",
                lhs: va.shape().to_vec(),
                rhs: vec![mask.len()],
            });
        }
        let data = va.data().iter().zip(&mask).map(|(x, m)| x * m).collect();
        let out = Tensor::new(va.shape().to_vec(), data)?;
        let ng = self.needs(a);
        Ok(self.push(out, Op::ConstMul(a, mask), ng))
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var> {
        if self.shape(a) == shape {
            return Ok(a);
        }
        let out = self.value(a).clone().reshape(shape)?;
        let ng = self.needs(a);
        Ok(self.push(out, Op::Reshape(a), ng))
    }

    pub fn permute(&mut self, a: Var, perm: &[usize]) -> Result<Var> {
        let shape = self.shape(a).to_vec();
        kernels::check_perm(&shape, perm)?;
        if perm.iter().enumerate().all(|(i, &p)| i == p) {
            return Ok(a);
        }
        let map = kernels::permute_index_map(&shape, perm);
        let src = self.value(a).data();
        let data = map.iter().map(|&i| src[i]).collect();
        let out = Tensor::new(perm.iter().map(|&p| shape[p]).collect(), data)?;
        let ng = self.needs(a);
        Ok(self.push(out, Op::Permute(a, map), ng))
    }

    /// Broadcast to `shape`; same rank, each source extent equal or 1.
    pub fn broadcast_to(&mut self, a: Var, shape: &[usize]) -> Result<Var> {
        if self.shape(a) == shape {
            return Ok(a);
        }
        let map = kernels::broadcast_index_map(self.shape(a), shape)?;
        let src = self.value(a).data();
        let data = map.iter().map(|&i| src[i]).collect();
        let out = Tensor::new(shape.to_vec(), data)?;
        let ng = self.needs(a);
        Ok(self.push(out, Op::Broadcast(a, map), ng))
    }

    /// Sum over `axis`, keeping it with extent 1.
    pub fn sum_axis(&mut self, a: Var, axis: usize) -> Result<Var> {
        let shape = self.shape(a).to_vec();
        if axis >= shape.len() {
            return Err(TensorError::Axis {
                op: "sum_axis",
                axis,
                rank: shape.len(),
            });
        }
        let data = kernels::sum_axis(self.value(a).data(), &shape, axis);
        let mut out_shape = shape;
        out_shape[axis] = 1;
        let out = Tensor::new(out_shape, data)?;
        let ng = self.needs(a);
        Ok(self.push(out, Op::SumAxis(a, axis), ng))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).data().iter().sum();
        let ng = self.needs(a);
        self.push(Tensor::scalar(s), Op::SumAll(a), ng)
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let n = self.value(a).len() as f64;
        let s = self.sum(a);
        self.scale(s, 1.0 / n)
    }

    /// Mean squared difference between two same-shape values.
    pub fn mse(&mut self, pred: Var, target: Var) -> Result<Var> {
        let d = self.sub(pred, target)?;
        let sq = self.mul(d, d)?;
        Ok(self.mean(sq))
    }

    pub fn softmax(&mut self, a: Var, axis: usize) -> Result<Var> {
        let out = kernels::softmax(self.value(a), axis)?;
        let ng = self.needs(a);
        Ok(self.push(out, Op::Softmax(a, axis), ng))
    }

    pub fn convolution(&mut self, x: Var, k: Var, spatial_rank: usize, padding: Padding) -> Result<Var> {
        let geom = kernels::conv_geom(self.shape(x), self.shape(k), spatial_rank, padding)?;
        let out = kernels::convolution(self.value(x), self.value(k), spatial_rank, padding)?;
        let ng = self.needs(x) || self.needs(k);
        Ok(self.push(out, Op::Conv { x, k, geom }, ng))
    }

    pub fn pooling(&mut self, x: Var, window: &[usize], kind: PoolKind) -> Result<Var> {
        let geom = kernels::pool_geom(self.shape(x), window)?;
        let out = kernels::pooling(self.value(x), window, kind)?;
        let ng = self.needs(x);
        Ok(self.push(out, Op::Pool { x, geom, kind }, ng))
    }

    /// Zero-pads `a` at the end of each axis up to `shape`.
    pub fn pad_to(&mut self, a: Var, shape: &[usize]) -> Result<Var> {
        if self.shape(a) == shape {
            return Ok(a);
        }
        check_shape(shape)?;
        let map = kernels::pad_index_map(self.shape(a), shape)?;
        let mut data = vec![0.0; shape.iter().product()];
        for (&dst, &v) in map.iter().zip(self.value(a).data()) {
            data[dst] = v;
        }
        let out = Tensor::new(shape.to_vec(), data)?;
        let ng = self.needs(a);
        Ok(self.push(out, Op::Pad(a, map), ng))
    }

    /// Concatenation along the last axis; all other extents must agree.
    pub fn concat_last(&mut self, parts: &[Var]) -> Result<Var> {
        let first = self.shape(parts[0]).to_vec();
        let rank = first.len();
        let mut last = 0;
        for &p in parts {
            let s = self.shape(p);
            if s.len() != rank || s[..rank - 1] != first[..rank - 1] {
                return Err(TensorError::Shape {
                    op: "concat",
                    lhs: first.clone(),
                    rhs: s.to_vec(),
                });
            }
            last += s[rank - 1];
        }
        if parts.len() == 1 {
            return Ok(parts[0]);
        }
        let rows: usize = first[..rank - 1].iter().product();
        let mut data = Vec::with_capacity(rows * last);
        for r in 0..rows {
            for &p in parts {
                let w = self.shape(p)[rank - 1];
                data.extend_from_slice(&self.value(p).data()[r * w..(r + 1) * w]);
            }
        }
        let mut shape = first;
        shape[rank - 1] = last;
        let out = Tensor::new(shape, data)?;
        let ng = parts.iter().any(|&p| self.needs(p));
        Ok(self.push(out, Op::ConcatLast(parts.to_vec()), ng))
    }

    /// `table (P, 2L-1, C)` to `(P, L, L, C)` with `out[p, q, k] = table[p, k - q + L - 1]`.
    pub fn relative_gather(&mut self, table: Var, len: usize) -> Result<Var> {
        let s = self.shape(table).to_vec();
        if s.len() != 3 || len == 0 || s[1] != 2 * len - 1 {
            return Err(TensorError::Shape {
                op: "relative_gather",
                lhs: s,
                rhs: vec![len],
            });
        }
        let (planes, width) = (s[0], s[2]);
        let data = kernels::relative_gather(self.value(table).data(), planes, len, width);
        let out = Tensor::new(vec![planes, len, len, width], data)?;
        let ng = self.needs(table);
        Ok(self.push(
            out,
            Op::RelGather {
                table,
                planes,
                len,
                width,
            },
            ng,
        ))
    }

    /// Zero-mean, unit-variance rows of a rank-2 value.
    pub fn standardize_rows(&mut self, a: Var, eps: f64) -> Result<Var> {
        let s = self.shape(a).to_vec();
        if s.len() != 2 {
            return Err(TensorError::InvalidShape {
                shape: s,
                reason: "standardize_rows expects rank 2".into(),
            });
        }
        let (y, inv) = kernels::standardize_rows(self.value(a).data(), s[0], s[1], eps);
        let out = Tensor::new(s.clone(), y)?;
        let ng = self.needs(a);
        Ok(self.push(out, Op::Standardize { x: a, inv, width: s[1] }, ng))
    }

    /// Back-propagates from a single-element `loss`, consuming the tape.
    pub fn backward(self, loss: Var) -> Result<Gradients> {
        let lv = self.value(loss);
        if lv.len() != 1 {
            return Err(TensorError::NonScalarLoss(lv.shape().to_vec()));
        }
        let lens: Vec<usize> = self.nodes.iter().map(|n| n.value.len()).collect();
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        if self.nodes[loss.0].needs_grad {
            grads[loss.0] = Some(vec![1.0]);
        }
        let nodes = &self.nodes;
        let acc = |grads: &mut Vec<Option<Vec<f64>>>, v: Var, buf: Vec<f64>| {
            if !nodes[v.0].needs_grad {
                return;
            }
            match &mut grads[v.0] {
                Some(g) => g.iter_mut().zip(&buf).for_each(|(a, b)| *a += b),
                slot @ None => *slot = Some(buf),
            }
        };
        for i in (0..=loss.0).rev() {
            let node = &nodes[i];
            if !node.needs_grad || matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            let val = |v: Var| nodes[v.0].value.data();
            let needs = |v: Var| nodes[v.0].needs_grad;
            match &node.op {
                Op::Leaf => unreachable!(),
                Op::MatMul(a, b) => {
                    let (sa, sb) = (nodes[a.0].value.shape(), nodes[b.0].value.shape());
                    let dims = (sa[0], sa[1], sb[1]);
                    if needs(*a) {
                        let mut ga = vec![0.0; sa[0] * sa[1]];
                        kernels::matmul_backward(val(*a), val(*b), &g, dims, Some(&mut ga), None);
                        acc(&mut grads, *a, ga);
                    }
                    if needs(*b) {
                        let mut gb = vec![0.0; sb[0] * sb[1]];
                        kernels::matmul_backward(val(*a), val(*b), &g, dims, None, Some(&mut gb));
                        acc(&mut grads, *b, gb);
                    }
                }
                Op::Bmm(a, b) => {
                    let (sa, sb) = (nodes[a.0].value.shape(), nodes[b.0].value.shape());
                    let dims = (sa[0], sa[1], sa[2], sb[2]);
                    if needs(*a) {
                        let mut ga = vec![0.0; lens[a.0]];
                        kernels::bmm_backward(val(*a), val(*b), &g, dims, Some(&mut ga), None);
                        acc(&mut grads, *a, ga);
                    }
                    if needs(*b) {
                        let mut gb = vec![0.0; lens[b.0]];
                        kernels::bmm_backward(val(*a), val(*b), &g, dims, None, Some(&mut gb));
                        acc(&mut grads, *b, gb);
                    }
                }
                Op::Add(a, b) => {
                    acc(&mut grads, *a, g.clone());
                    acc(&mut grads, *b, g);
                }
                Op::Sub(a, b) => {
                    acc(&mut grads, *b, g.iter().map(|x| -x).collect());
                    acc(&mut grads, *a, g);
                }
                Op::Mul(a, b) => {
                    if needs(*a) {
                        acc(&mut grads, *a, g.iter().zip(val(*b)).map(|(x, y)| x * y).collect());
                    }
                    if needs(*b) {
                        acc(&mut grads, *b, g.iter().zip(val(*a)).map(|(x, y)| x * y).collect());
                    }
                }
                Op::Scale(a, c) => acc(&mut grads, *a, g.iter().map(|x| x * c).collect()),
                Op::ConstMul(a, m) => acc(&mut grads, *a, g.iter().zip(m).map(|(x, y)| x * y).collect()),
                Op::Unary(a, f) => {
                    let y = node.value.data();
                    acc(
                        &mut grads,
                        *a,
                        g.iter()
                            .zip(y)
                            .map(|(gv, &yv)| gv * f.derivative_from_output(yv))
                            .collect(),
                    )
                }
                Op::Reshape(a) => acc(&mut grads, *a, g),
                Op::Permute(a, map) => {
                    let mut ga = vec![0.0; lens[a.0]];
                    for (&src, gv) in map.iter().zip(&g) {
                        ga[src] = *gv;
                    }
                    acc(&mut grads, *a, ga);
                }
                Op::Broadcast(a, map) => {
                    let mut ga = vec![0.0; lens[a.0]];
                    for (&src, gv) in map.iter().zip(&g) {
                        ga[src] += gv;
                    }
                    acc(&mut grads, *a, ga);
                }
                Op::SumAxis(a, axis) => {
                    let shape = nodes[a.0].value.shape();
                    let (outer, len, inner) = kernels::axis_split(shape, *axis);
                    let mut ga = vec![0.0; lens[a.0]];
                    for o in 0..outer {
                        for j in 0..len {
                            ga[(o * len + j) * inner..(o * len + j + 1) * inner]
                                .copy_from_slice(&g[o * inner..(o + 1) * inner]);
                        }
                    }
                    acc(&mut grads, *a, ga);
                }
                Op::SumAll(a) => acc(&mut grads, *a, vec![g[0]; lens[a.0]]),
                Op::Softmax(a, axis) => {
                    let mut ga = vec![0.0; lens[a.0]];
                    kernels::softmax_backward(node.value.data(), &g, node.value.shape(), *axis, &mut ga);
                    acc(&mut grads, *a, ga);
                }
                Op::Conv { x, k, geom } => {
                    if needs(*x) {
                        let mut gx = vec![0.0; lens[x.0]];
                        kernels::conv_backward(val(*x), val(*k), &g, geom, Some(&mut gx), None);
                        acc(&mut grads, *x, gx);
                    }
                    if needs(*k) {
                        let mut gk = vec![0.0; lens[k.0]];
                        kernels::conv_backward(val(*x), val(*k), &g, geom, None, Some(&mut gk));
                        acc(&mut grads, *k, gk);
                    }
                }
                Op::Pool { x, geom, kind } => {
                    let mut gx = vec![0.0; lens[x.0]];
                    kernels::pool_backward(val(*x), &g, geom, *kind, &mut gx);
                    acc(&mut grads, *x, gx);
                }
                Op::Pad(a, map) => acc(&mut grads, *a, map.iter().map(|&i| g[i]).collect()),
                Op::ConcatLast(parts) => {
                    let shape = node.value.shape();
                    let last = shape[shape.len() - 1];
                    let rows = node.value.len() / last;
                    let mut offset = 0;
                    for p in parts {
                        let ps = nodes[p.0].value.shape();
                        let w = ps[ps.len() - 1];
                        if needs(*p) {
                            let mut gp = Vec::with_capacity(rows * w);
                            for r in 0..rows {
                                gp.extend_from_slice(&g[r * last + offset..r * last + offset + w]);
                            }
                            acc(&mut grads, *p, gp);
                        }
                        offset += w;
                    }
                }
                Op::RelGather {
                    table,
                    planes,
                    len,
                    width,
                } => {
                    let mut gt = vec![0.0; lens[table.0]];
                    kernels::relative_scatter(&g, *planes, *len, *width, &mut gt);
                    acc(&mut grads, *table, gt);
                }
                Op::Standardize { x, inv, width } => {
                    let mut gx = vec![0.0; lens[x.0]];
                    kernels::standardize_rows_backward(node.value.data(), inv, &g, *width, &mut gx);
                    acc(&mut grads, *x, gx);
                }
            }
        }
        Ok(Gradients { grads, lens })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_gradient() {
        let mut t = Tape::new();
        let x = t.param(Tensor::scalar(3.0));
        let y = t.mul(x, x).unwrap();
        let g = t.backward(y).unwrap();
        assert_eq!(g.wrt(x), vec![6.0]);
    }

    #[test]
    fn unreachable_param_gets_zero() {
        let mut t = Tape::new();
        let x = t.param(Tensor::scalar(3.0));
        let z = t.param(Tensor::from_vec(vec![1.0, 2.0]));
        let y = t.scale(x, 2.0);
        let g = t.backward(y).unwrap();
        assert_eq!(g.wrt(z), vec![0.0, 0.0]);
        assert!(g.get(z).is_none());
    }

    #[test]
    fn non_scalar_loss_is_rejected() {
        let mut t = Tape::new();
        let x = t.param(Tensor::from_vec(vec![1.0, 2.0]));
        assert!(matches!(t.backward(x), Err(TensorError::NonScalarLoss(_))));
    }

    #[test]
    fn elementwise_definitions() {
        assert_eq!(UnaryFn::Relu.apply(-1.0), 0.0);
        assert_eq!(UnaryFn::Sigmoid.apply(0.0), 0.5);
        assert_eq!(UnaryFn::LeakyRelu.apply(-2.0), -0.02);
        for x in [0.1, 0.7, 2.5, 11.0] {
            assert_eq!(UnaryFn::Tanh.apply(-x), -UnaryFn::Tanh.apply(x));
        }
        assert!((sigmoid(-800.0)).is_finite() && sigmoid(800.0) == 1.0);
    }

    #[test]
    fn shared_input_accumulates() {
        // f = sum(x * x + x), df/dx = 2x + 1
        let mut t = Tape::new();
        let x = t.param(Tensor::from_vec(vec![1.0, -2.0]));
        let sq = t.mul(x, x).unwrap();
        let s = t.add(sq, x).unwrap();
        let l = t.sum(s);
        let g = t.backward(l).unwrap();
        assert_eq!(g.wrt(x), vec![3.0, -3.0]);
    }
}
