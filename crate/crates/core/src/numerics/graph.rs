//! Record-and-replay reverse-mode differentiation.
//!
//! A [`Graph`] is built fresh for every forward pass. Each primitive computes
//! its output eagerly, appends a node holding the value, and counts the FLOPs
//! it performed. Because inputs always precede their consumers, walking the
//! node list backwards is a reverse topological order.

use super::kernels::{self, ConvGeometry};
use super::tensor::{numel, Element, Tensor};
use crate::error::{Error, Result};

/// Handle to a node in a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// The closed set of differentiable primitives.
#[derive(Debug, Clone, PartialEq)]
pub enum Op {
    Leaf,
    MatMul,
    Add,
    Sub,
    Mul,
    Scale(f64),
    AddBias,
    Conv2d {
        groups: usize,
        stride: usize,
        padding: usize,
    },
    Softmax {
        axis: usize,
    },
    LayerNorm {
        eps: f64,
    },
    Gelu,
    Relu,
    Reshape(Vec<usize>),
    Permute(Vec<usize>),
    Narrow {
        axis: usize,
        start: usize,
        len: usize,
    },
    Concat {
        axis: usize,
    },
    Sum,
    Mean,
    Huber {
        delta: f64,
    },
}

impl Op {
    pub fn name(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::MatMul => "matmul",
            Op::Add => "add",
            Op::Sub => "sub",
            Op::Mul => "mul",
            Op::Scale(_) => "scale",
            Op::AddBias => "add_bias",
            Op::Conv2d { .. } => "conv2d",
            Op::Softmax { .. } => "softmax",
            Op::LayerNorm { .. } => "layer_norm",
            Op::Gelu => "gelu",
            Op::Relu => "relu",
            Op::Reshape(_) => "reshape",
            Op::Permute(_) => "permute",
            Op::Narrow { .. } => "narrow",
            Op::Concat { .. } => "concat",
            Op::Sum => "sum",
            Op::Mean => "mean",
            Op::Huber { .. } => "huber_loss",
        }
    }
}

#[derive(Debug, Clone)]
struct Node<T> {
    op: Op,
    inputs: Vec<Var>,
    value: Tensor<T>,
    requires_grad: bool,
}

/// Computation record for one forward pass.
#[derive(Debug, Clone)]
pub struct Graph<T> {
    nodes: Vec<Node<T>>,
    flops: u64,
}

impl<T: Element> Default for Graph<T> {
    fn default() -> Self {
        Self::new()
    }
}

/// Gradients produced by [`Graph::backward`].
#[derive(Debug, Clone)]
pub struct Gradients<T> {
    grads: Vec<Option<Tensor<T>>>,
    visited: Vec<Var>,
}

impl<T: Element> Gradients<T> {
    pub fn get(&self, v: Var) -> Option<&Tensor<T>> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    /// Nodes in the order their backward rules ran.
    pub fn visit_order(&self) -> &[Var] {
        &self.visited
    }
}

fn same_shape(op: &'static str, a: &[usize], b: &[usize]) -> Result<()> {
    if a != b {
        return Err(Error::dim(op, format!("shapes {a:?} and {b:?} differ")));
    }
    Ok(())
}

/// `[outer, len, inner]` decomposition around `axis`.
fn split_axis(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    (
        shape[..axis].iter().product(),
        shape[axis],
        shape[axis + 1..].iter().product(),
    )
}

fn zip_map<T: Element>(a: &Tensor<T>, b: &Tensor<T>, f: impl Fn(T, T) -> T) -> Tensor<T> {
    let (a, b) = (a.contiguous(), b.contiguous());
    Tensor::from_parts(
        a.shape().to_vec(),
        a.data()
            .iter()
            .zip(b.data())
            .map(|(&x, &y)| f(x, y))
            .collect(),
    )
}

fn add_into<T: Element>(slot: &mut Option<Tensor<T>>, g: Tensor<T>) {
    *slot = Some(match slot.take() {
        None => g,
        Some(prev) => zip_map(&prev, &g, |x, y| x + y),
    });
}

/// Evaluate one primitive. Returns the output and the FLOPs it cost.
fn evaluate<T: Element>(op: &Op, inputs: &[&Tensor<T>]) -> Result<(Tensor<T>, u64)> {
    let elementwise = |t: &Tensor<T>| t.numel() as u64;
    match op {
        Op::Leaf => Err(Error::Config("leaf nodes are not evaluated".into())),
        Op::MatMul => {
            let (a, b) = (inputs[0].contiguous(), inputs[1].contiguous());
            let (sa, sb) = (a.shape(), b.shape());
            match (sa.len(), sb.len()) {
                (2, 2) if sa[1] == sb[0] => {
                    let (m, k, n) = (sa[0], sa[1], sb[1]);
                    let c = kernels::matmul(a.data(), b.data(), m, k, n);
                    Ok((Tensor::from_parts(vec![m, n], c), 2 * (m * n * k) as u64))
                }
                (3, 3) if sa[0] == sb[0] && sa[2] == sb[1] => {
                    let (bt, m, k, n) = (sa[0], sa[1], sa[2], sb[2]);
                    let mut c = Vec::with_capacity(bt * m * n);
                    for i in 0..bt {
                        c.extend(kernels::matmul(
                            &a.data()[i * m * k..(i + 1) * m * k],
                            &b.data()[i * k * n..(i + 1) * k * n],
                            m,
                            k,
                            n,
                        ));
                    }
                    Ok((
                        Tensor::from_parts(vec![bt, m, n], c),
                        2 * (bt * m * n * k) as u64,
                    ))
                }
                _ => Err(Error::dim(
                    "matmul",
                    format!("cannot multiply {sa:?} by {sb:?}"),
                )),
            }
        }
        Op::Add | Op::Sub | Op::Mul => {
            let name = op.name();
            same_shape(name, inputs[0].shape(), inputs[1].shape())?;
            let out = match op {
                Op::Add => zip_map(inputs[0], inputs[1], |x, y| x + y),
                Op::Sub => zip_map(inputs[0], inputs[1], |x, y| x - y),
                _ => zip_map(inputs[0], inputs[1], |x, y| x * y),
            };
            let f = elementwise(&out);
            Ok((out, f))
        }
        Op::Scale(s) => {
            let s = T::from_f64(*s);
            let out = inputs[0].map(|v| v * s);
            let f = elementwise(&out);
            Ok((out, f))
        }
        Op::AddBias => {
            let (x, bias) = (inputs[0].contiguous(), inputs[1].contiguous());
            let c = *x.shape().last().unwrap_or(&1);
            if bias.shape() != [c] {
                return Err(Error::dim(
                    "add_bias",
                    format!(
                        "bias {:?} does not match last axis of {:?}",
                        bias.shape(),
                        x.shape()
                    ),
                ));
            }
            let mut out = x.data().to_vec();
            for row in out.chunks_exact_mut(c) {
                for (v, &b) in row.iter_mut().zip(bias.data()) {
                    *v += b;
                }
            }
            Ok((
                Tensor::from_parts(x.shape().to_vec(), out),
                x.numel() as u64,
            ))
        }
        Op::Conv2d {
            groups,
            stride,
            padding,
        } => {
            let x = inputs[0].contiguous();
            let w = inputs[1].contiguous();
            let geom = conv_geometry(x.shape(), w.shape(), *groups, *stride, *padding)?;
            let bias = match inputs.get(2) {
                Some(b) if b.shape() != [geom.out_c] => {
                    return Err(Error::dim(
                        "conv2d",
                        format!("bias {:?} for {} output channels", b.shape(), geom.out_c),
                    ))
                }
                Some(b) => Some(b.contiguous()),
                None => None,
            };
            let out = kernels::conv2d(x.data(), w.data(), bias.as_ref().map(|b| b.data()), &geom);
            let out_elems = geom.out_len() as u64;
            let mut flops = 2 * out_elems * (geom.in_c / geom.groups * geom.k_h * geom.k_w) as u64;
            if bias.is_some() {
                flops += out_elems;
            }
            let shape = vec![geom.batch, geom.out_c, geom.out_h(), geom.out_w()];
            Ok((Tensor::from_parts(shape, out), flops))
        }
        Op::Softmax { axis } => {
            let x = inputs[0].contiguous();
            if *axis >= x.ndim() {
                return Err(Error::dim(
                    "softmax",
                    format!("axis {axis} for shape {:?}", x.shape()),
                ));
            }
            if !x.all_finite() {
                return Err(Error::NumericDomain {
                    op: "softmax",
                    detail: "non-finite input".into(),
                });
            }
            let (o, l, i) = split_axis(x.shape(), *axis);
            let y = kernels::softmax(x.data(), o, l, i);
            Ok((Tensor::from_parts(x.shape().to_vec(), y), x.numel() as u64))
        }
        Op::LayerNorm { eps } => {
            let x = inputs[0].contiguous();
            let c = *x.shape().last().unwrap_or(&1);
            for p in &inputs[1..3] {
                if p.shape() != [c] {
                    return Err(Error::dim(
                        "layer_norm",
                        format!(
                            "affine {:?} does not match last axis of {:?}",
                            p.shape(),
                            x.shape()
                        ),
                    ));
                }
            }
            let y = kernels::layer_norm(
                x.data(),
                inputs[1].contiguous().data(),
                inputs[2].contiguous().data(),
                c,
                *eps,
            );
            Ok((Tensor::from_parts(x.shape().to_vec(), y), x.numel() as u64))
        }
        Op::Gelu => {
            let out = inputs[0].map(kernels::gelu);
            let f = elementwise(&out);
            Ok((out, f))
        }
        Op::Relu => {
            let out = inputs[0].map(|v| v.max(T::zero()));
            let f = elementwise(&out);
            Ok((out, f))
        }
        Op::Reshape(shape) => Ok((inputs[0].reshape(shape)?, 0)),
        Op::Permute(axes) => Ok((inputs[0].permute(axes)?, 0)),
        Op::Narrow { axis, start, len } => {
            let x = inputs[0].contiguous();
            if *axis >= x.ndim() || *len == 0 || start + len > x.shape()[*axis] {
                return Err(Error::dim(
                    "narrow",
                    format!(
                        "range {start}..{} on axis {axis} of {:?}",
                        start + len,
                        x.shape()
                    ),
                ));
            }
            let (o, l, i) = split_axis(x.shape(), *axis);
            let mut out = Vec::with_capacity(o * len * i);
            for outer in 0..o {
                let base = (outer * l + start) * i;
                out.extend_from_slice(&x.data()[base..base + len * i]);
            }
            let mut shape = x.shape().to_vec();
            shape[*axis] = *len;
            Ok((Tensor::from_parts(shape, out), 0))
        }
        Op::Concat { axis } => {
            let first = inputs
                .first()
                .ok_or_else(|| Error::dim("concat", "no inputs"))?
                .shape()
                .to_vec();
            if *axis >= first.len() {
                return Err(Error::dim(
                    "concat",
                    format!("axis {axis} for shape {first:?}"),
                ));
            }
            let mut total = 0;
            for t in inputs {
                let s = t.shape();
                let compatible = s.len() == first.len()
                    && s.iter()
                        .zip(&first)
                        .enumerate()
                        .all(|(d, (a, b))| d == *axis || a == b);
                if !compatible {
                    return Err(Error::dim(
                        "concat",
                        format!("{s:?} incompatible with {first:?}"),
                    ));
                }
                total += s[*axis];
            }
            let (o, _, i) = split_axis(&first, *axis);
            let parts: Vec<Tensor<T>> = inputs.iter().map(|t| t.contiguous()).collect();
            let mut out = Vec::with_capacity(o * total * i);
            for outer in 0..o {
                for p in &parts {
                    let l = p.shape()[*axis];
                    out.extend_from_slice(&p.data()[outer * l * i..(outer + 1) * l * i]);
                }
            }
            let mut shape = first;
            shape[*axis] = total;
            Ok((Tensor::from_parts(shape, out), 0))
        }
        Op::Sum | Op::Mean => {
            let x = inputs[0].contiguous();
            let mut acc = x.data().iter().map(|v| v.as_f64()).sum::<f64>();
            if *op == Op::Mean {
                acc /= x.numel() as f64;
            }
            Ok((Tensor::scalar(T::from_f64(acc)), x.numel() as u64))
        }
        Op::Huber { delta } => {
            same_shape("huber_loss", inputs[0].shape(), inputs[1].shape())?;
            if delta.is_nan() || *delta <= 0.0 {
                return Err(Error::Config(format!(
                    "huber delta must be positive, got {delta}"
                )));
            }
            let (p, t) = (inputs[0].contiguous(), inputs[1].contiguous());
            let sum: f64 = p
                .data()
                .iter()
                .zip(t.data())
                .map(|(&a, &b)| huber_term(a.as_f64() - b.as_f64(), *delta))
                .sum();
            let n = p.numel();
            Ok((Tensor::scalar(T::from_f64(sum / n as f64)), 3 * n as u64))
        }
    }
}

/// One element of the Huber loss.
pub fn huber_term(r: f64, delta: f64) -> f64 {
    let a = r.abs();
    if a <= delta {
        0.5 * r * r
    } else {
        delta * (a - 0.5 * delta)
    }
}

pub(crate) fn conv_geometry(
    x: &[usize],
    w: &[usize],
    groups: usize,
    stride: usize,
    padding: usize,
) -> Result<ConvGeometry> {
    if x.len() != 4 || w.len() != 4 {
        return Err(Error::dim(
            "conv2d",
            format!("input {x:?} and kernel {w:?} must both be rank 4"),
        ));
    }
    if groups == 0 || stride == 0 {
        return Err(Error::Config(
            "conv2d groups and stride must be positive".into(),
        ));
    }
    if !x[1].is_multiple_of(groups) || !w[0].is_multiple_of(groups) {
        return Err(Error::Config(format!(
            "conv2d channels in={} out={} not divisible by groups={groups}",
            x[1], w[0]
        )));
    }
    if w[1] != x[1] / groups {
        return Err(Error::dim(
            "conv2d",
            format!(
                "kernel {w:?} expects {} input channels per group, input is {x:?}",
                w[1]
            ),
        ));
    }
    if x[2] + 2 * padding < w[2] || x[3] + 2 * padding < w[3] {
        return Err(Error::dim(
            "conv2d",
            format!("kernel {w:?} larger than padded input {x:?}"),
        ));
    }
    Ok(ConvGeometry {
        batch: x[0],
        in_c: x[1],
        in_h: x[2],
        in_w: x[3],
        out_c: w[0],
        k_h: w[2],
        k_w: w[3],
        groups,
        stride,
        padding,
    })
}

impl<T: Element> Graph<T> {
    pub fn new() -> Self {
        Graph {
            nodes: Vec::new(),
            flops: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// FLOPs performed by every primitive recorded so far.
    pub fn flops(&self) -> u64 {
        self.flops
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    pub fn op(&self, v: Var) -> &Op {
        &self.nodes[v.0].op
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    /// Leaf that receives a gradient.
    pub fn param(&mut self, t: Tensor<T>) -> Var {
        self.leaf(t, true)
    }

    /// Leaf that does not receive a gradient.
    pub fn constant(&mut self, t: Tensor<T>) -> Var {
        self.leaf(t, false)
    }

    fn leaf(&mut self, value: Tensor<T>, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            op: Op::Leaf,
            inputs: vec![],
            value,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn push(&mut self, op: Op, inputs: Vec<Var>) -> Result<Var> {
        let (value, flops) = {
            let vals: Vec<&Tensor<T>> = inputs.iter().map(|v| &self.nodes[v.0].value).collect();
            evaluate(&op, &vals)?
        };
        self.flops += flops;
        let requires_grad = inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        self.nodes.push(Node {
            op,
            inputs,
            value,
            requires_grad,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    // ── Primitives ───────────────────────────────────────────────────

    /// 2-D `[m,k]·[k,n]` or batched 3-D `[b,m,k]·[b,k,n]`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.push(Op::MatMul, vec![a, b])
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.push(Op::Add, vec![a, b])
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.push(Op::Sub, vec![a, b])
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.push(Op::Mul, vec![a, b])
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Result<Var> {
        self.push(Op::Scale(s), vec![a])
    }

    /// Adds a `[c]` vector along the last axis.
    pub fn add_bias(&mut self, x: Var, bias: Var) -> Result<Var> {
        self.push(Op::AddBias, vec![x, bias])
    }

    pub fn conv2d(
        &mut self,
        x: Var,
        kernel: Var,
        bias: Option<Var>,
        groups: usize,
        stride: usize,
        padding: usize,
    ) -> Result<Var> {
        let mut inputs = vec![x, kernel];
        inputs.extend(bias);
        self.push(
            Op::Conv2d {
                groups,
                stride,
                padding,
            },
            inputs,
        )
    }

    pub fn softmax(&mut self, x: Var, axis: usize) -> Result<Var> {
        self.push(Op::Softmax { axis }, vec![x])
    }

    /// Normalizes over the last axis, then applies `gamma`/`beta`.
    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var, eps: f64) -> Result<Var> {
        self.push(Op::LayerNorm { eps }, vec![x, gamma, beta])
    }

    pub fn gelu(&mut self, x: Var) -> Result<Var> {
        self.push(Op::Gelu, vec![x])
    }

    pub fn relu(&mut self, x: Var) -> Result<Var> {
        self.push(Op::Relu, vec![x])
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        self.push(Op::Reshape(shape.to_vec()), vec![x])
    }

    pub fn permute(&mut self, x: Var, axes: &[usize]) -> Result<Var> {
        self.push(Op::Permute(axes.to_vec()), vec![x])
    }

    pub fn narrow(&mut self, x: Var, axis: usize, start: usize, len: usize) -> Result<Var> {
        self.push(Op::Narrow { axis, start, len }, vec![x])
    }

    pub fn concat(&mut self, xs: &[Var], axis: usize) -> Result<Var> {
        self.push(Op::Concat { axis }, xs.to_vec())
    }

    pub fn sum(&mut self, x: Var) -> Result<Var> {
        self.push(Op::Sum, vec![x])
    }

    pub fn mean(&mut self, x: Var) -> Result<Var> {
        self.push(Op::Mean, vec![x])
    }

    /// Mean Huber loss; differentiable w.r.t. `pred` (and `target`).
    pub fn huber_loss(&mut self, pred: Var, target: Var, delta: f64) -> Result<Var> {
        self.push(Op::Huber { delta }, vec![pred, target])
    }

    // ── Replay and backward ──────────────────────────────────────────

    /// Recompute every non-leaf node from the recorded leaves.
    pub fn replay(&self) -> Result<Vec<Tensor<T>>> {
        let mut values: Vec<Tensor<T>> = Vec::with_capacity(self.nodes.len());
        for node in &self.nodes {
            let v = match node.op {
                Op::Leaf => node.value.clone(),
                _ => {
                    let ins: Vec<&Tensor<T>> = node.inputs.iter().map(|v| &values[v.0]).collect();
                    evaluate(&node.op, &ins)?.0
                }
            };
            values.push(v);
        }
        Ok(values)
    }

    /// Reverse-mode gradients of the scalar `output` w.r.t. every node that
    /// requires one.
    pub fn backward(&self, output: Var) -> Result<Gradients<T>> {
        let out = &self.nodes[output.0];
        if out.value.numel() != 1 {
            return Err(Error::dim(
                "backward",
                format!("output must be a scalar, got {:?}", out.value.shape()),
            ));
        }
        let mut grads: Vec<Option<Tensor<T>>> = vec![None; self.nodes.len()];
        grads[output.0] = Some(Tensor::full(out.value.shape(), T::one()));
        let mut visited = Vec::new();
        for id in (0..=output.0).rev() {
            let node = &self.nodes[id];
            if !node.requires_grad || node.op == Op::Leaf {
                continue;
            }
            let Some(dy) = grads[id].clone() else {
                continue;
            };
            visited.push(Var(id));
            let input_grads = self.backward_rule(node, &dy)?;
            for (inp, g) in node.inputs.iter().zip(input_grads) {
                if let Some(g) = g {
                    if self.nodes[inp.0].requires_grad {
                        add_into(&mut grads[inp.0], g);
                    }
                }
            }
        }
        Ok(Gradients { grads, visited })
    }

    fn backward_rule(&self, node: &Node<T>, dy: &Tensor<T>) -> Result<Vec<Option<Tensor<T>>>> {
        let x = |i: usize| &self.nodes[node.inputs[i].0].value;
        let dy = dy.contiguous();
        let grads = match &node.op {
            Op::Leaf => vec![],
            Op::MatMul => {
                let (a, b) = (x(0).contiguous(), x(1).contiguous());
                let (sa, sb) = (a.shape().to_vec(), b.shape().to_vec());
                if sa.len() == 2 {
                    let (m, k, n) = (sa[0], sa[1], sb[1]);
                    let da = kernels::matmul_nt(dy.data(), b.data(), m, n, k);
                    let db = kernels::matmul_tn(a.data(), dy.data(), m, k, n);
                    vec![
                        Some(Tensor::from_parts(sa, da)),
                        Some(Tensor::from_parts(sb, db)),
                    ]
                } else {
                    let (bt, m, k, n) = (sa[0], sa[1], sa[2], sb[2]);
                    let mut da = Vec::with_capacity(bt * m * k);
                    let mut db = Vec::with_capacity(bt * k * n);
                    for i in 0..bt {
                        let dyi = &dy.data()[i * m * n..(i + 1) * m * n];
                        let ai = &a.data()[i * m * k..(i + 1) * m * k];
                        let bi = &b.data()[i * k * n..(i + 1) * k * n];
                        da.extend(kernels::matmul_nt(dyi, bi, m, n, k));
                        db.extend(kernels::matmul_tn(ai, dyi, m, k, n));
                    }
                    vec![
                        Some(Tensor::from_parts(sa, da)),
                        Some(Tensor::from_parts(sb, db)),
                    ]
                }
            }
            Op::Add => vec![Some(dy.clone()), Some(dy)],
            Op::Sub => vec![Some(dy.clone()), Some(dy.map(|v| -v))],
            Op::Mul => vec![
                Some(zip_map(&dy, x(1), |g, b| g * b)),
                Some(zip_map(&dy, x(0), |g, a| g * a)),
            ],
            Op::Scale(s) => {
                let s = T::from_f64(*s);
                vec![Some(dy.map(|v| v * s))]
            }
            Op::AddBias => {
                let c = x(1).numel();
                let mut db = vec![T::zero(); c];
                for row in dy.data().chunks_exact(c) {
                    for (acc, &g) in db.iter_mut().zip(row) {
                        *acc += g;
                    }
                }
                vec![Some(dy.clone()), Some(Tensor::from_parts(vec![c], db))]
            }
            Op::Conv2d {
                groups,
                stride,
                padding,
            } => {
                let (xi, w) = (x(0).contiguous(), x(1).contiguous());
                let geom = conv_geometry(xi.shape(), w.shape(), *groups, *stride, *padding)?;
                let (dx, dw, db) = kernels::conv2d_backward(xi.data(), w.data(), dy.data(), &geom);
                let mut out = vec![
                    Some(Tensor::from_parts(xi.shape().to_vec(), dx)),
                    Some(Tensor::from_parts(w.shape().to_vec(), dw)),
                ];
                if node.inputs.len() == 3 {
                    out.push(Some(Tensor::from_parts(vec![geom.out_c], db)));
                }
                out
            }
            Op::Softmax { axis } => {
                let y = node.value.contiguous();
                let (o, l, i) = split_axis(y.shape(), *axis);
                let dx = kernels::softmax_backward(y.data(), dy.data(), o, l, i);
                vec![Some(Tensor::from_parts(y.shape().to_vec(), dx))]
            }
            Op::LayerNorm { eps } => {
                let xi = x(0).contiguous();
                let c = *xi.shape().last().unwrap_or(&1);
                let (dx, dg, db) = kernels::layer_norm_backward(
                    xi.data(),
                    x(1).contiguous().data(),
                    dy.data(),
                    c,
                    *eps,
                );
                vec![
                    Some(Tensor::from_parts(xi.shape().to_vec(), dx)),
                    Some(Tensor::from_parts(vec![c], dg)),
                    Some(Tensor::from_parts(vec![c], db)),
                ]
            }
            Op::Gelu => vec![Some(zip_map(&dy, x(0), |g, v| g * kernels::gelu_grad(v)))],
            Op::Relu => vec![Some(zip_map(&dy, x(0), |g, v| {
                if v > T::zero() {
                    g
                } else {
                    T::zero()
                }
            }))],
            Op::Reshape(_) => vec![Some(dy.reshape(x(0).shape())?)],
            Op::Permute(axes) => {
                let mut inverse = vec![0; axes.len()];
                for (i, &a) in axes.iter().enumerate() {
                    inverse[a] = i;
                }
                vec![Some(dy.permute(&inverse)?.contiguous())]
            }
            Op::Narrow { axis, start, len } => {
                let shape = x(0).shape().to_vec();
                let (o, l, i) = split_axis(&shape, *axis);
                let mut dx = vec![T::zero(); numel(&shape)];
                for outer in 0..o {
                    let dst = (outer * l + start) * i;
                    let src = outer * len * i;
                    dx[dst..dst + len * i].copy_from_slice(&dy.data()[src..src + len * i]);
                }
                vec![Some(Tensor::from_parts(shape, dx))]
            }
            Op::Concat { axis } => {
                let out_shape = node.value.shape();
                let (o, total, i) = split_axis(out_shape, *axis);
                let mut parts = Vec::with_capacity(node.inputs.len());
                let mut offset = 0;
                for k in 0..node.inputs.len() {
                    let shape = x(k).shape().to_vec();
                    let l = shape[*axis];
                    let mut g = Vec::with_capacity(numel(&shape));
                    for outer in 0..o {
                        let src = (outer * total + offset) * i;
                        g.extend_from_slice(&dy.data()[src..src + l * i]);
                    }
                    offset += l;
                    parts.push(Some(Tensor::from_parts(shape, g)));
                }
                parts
            }
            Op::Sum => vec![Some(Tensor::full(x(0).shape(), dy.item()))],
            Op::Mean => {
                let n = T::from_f64(x(0).numel() as f64);
                vec![Some(Tensor::full(x(0).shape(), dy.item() / n))]
            }
            Op::Huber { delta } => {
                let (p, t) = (x(0).contiguous(), x(1).contiguous());
                let scale = dy.item().as_f64() / p.numel() as f64;
                let dp: Vec<T> = p
                    .data()
                    .iter()
                    .zip(t.data())
                    .map(|(&a, &b)| {
                        T::from_f64((a.as_f64() - b.as_f64()).clamp(-delta, *delta) * scale)
                    })
                    .collect();
                let dt: Vec<T> = dp.iter().map(|&v| -v).collect();
                vec![
                    Some(Tensor::from_parts(p.shape().to_vec(), dp)),
                    Some(Tensor::from_parts(p.shape().to_vec(), dt)),
                ]
            }
        };
        Ok(grads)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(shape: &[usize], data: &[f64]) -> Tensor<f64> {
        Tensor::from_f64(shape, data).unwrap()
    }

    #[test]
    fn matmul_identity_and_hand_values() {
        let mut g = Graph::<f64>::new();
        let i2 = g.constant(t(&[2, 2], &[1., 0., 0., 1.]));
        let m = g.constant(t(&[2, 2], &[1., 2., 3., 4.]));
        let p = g.matmul(i2, m).unwrap();
        assert_eq!(g.value(p).to_f64_vec(), vec![1., 2., 3., 4.]);

        let a = g.constant(t(&[1, 2], &[1., 2.]));
        let b = g.constant(t(&[2, 1], &[3., 4.]));
        let c = g.matmul(a, b).unwrap();
        assert_eq!(g.value(c).to_f64_vec(), vec![11.]);
    }

    #[test]
    fn matmul_shape_error_names_both_shapes() {
        let mut g = Graph::<f64>::new();
        let a = g.constant(Tensor::zeros(&[2, 3]));
        let b = g.constant(Tensor::zeros(&[4, 5]));
        let msg = g.matmul(a, b).unwrap_err().to_string();
        assert!(msg.contains("[2, 3]") && msg.contains("[4, 5]"), "{msg}");
    }

    #[test]
    fn conv_all_ones_and_errors() {
        let mut g = Graph::<f64>::new();
        let x = g.constant(Tensor::ones(&[1, 1, 3, 3]));
        let w = g.constant(Tensor::ones(&[1, 1, 3, 3]));
        let y = g.conv2d(x, w, None, 1, 1, 0).unwrap();
        assert_eq!(g.shape(y), &[1, 1, 1, 1]);
        assert_eq!(g.value(y).item(), 9.0);

        let x3 = g.constant(Tensor::ones(&[1, 3, 4, 4]));
        let w3 = g.constant(Tensor::ones(&[2, 1, 1, 1]));
        assert!(matches!(
            g.conv2d(x3, w3, None, 2, 1, 0),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn depthwise_identity_kernel_preserves_input() {
        let data: Vec<f64> = (0..2 * 5 * 5).map(|v| (v as f64 * 0.37).cos()).collect();
        let mut kernel = vec![0.0; 2 * 9];
        kernel[4] = 1.0;
        kernel[9 + 4] = 1.0;
        let mut g = Graph::<f64>::new();
        let x = g.constant(t(&[1, 2, 5, 5], &data));
        let w = g.constant(t(&[2, 1, 3, 3], &kernel));
        let y = g.conv2d(x, w, None, 2, 1, 1).unwrap();
        assert_eq!(g.value(y).to_f64_vec(), data);
    }

    #[test]
    fn softmax_reference_cases() {
        let mut g = Graph::<f64>::new();
        let a = g.constant(t(&[2], &[0., 0.]));
        let b = g.constant(t(&[2], &[1000., 1000.]));
        let sa = g.softmax(a, 0).unwrap();
        let sb = g.softmax(b, 0).unwrap();
        assert_eq!(g.value(sa).to_f64_vec(), vec![0.5, 0.5]);
        assert_eq!(g.value(sb).to_f64_vec(), vec![0.5, 0.5]);

        let c = g.constant(t(&[3], &[1., 2., 3.]));
        let sc = g.softmax(c, 0).unwrap();
        let z: f64 = [1f64, 2., 3.].iter().map(|v| v.exp()).sum();
        for (got, v) in g.value(sc).to_f64_vec().iter().zip([1f64, 2., 3.]) {
            assert!((got - v.exp() / z).abs() < 1e-15);
        }

        let bad = g.constant(t(&[2], &[f64::NAN, 0.]));
        assert!(matches!(
            g.softmax(bad, 0),
            Err(Error::NumericDomain { .. })
        ));
    }

    #[test]
    fn huber_branches() {
        let mut g = Graph::<f64>::new();
        let z = g.constant(Tensor::zeros(&[1]));
        let half = g.constant(t(&[1], &[0.5]));
        let two = g.constant(t(&[1], &[2.0]));
        let l0 = g.huber_loss(z, z, 1.0).unwrap();
        let l1 = g.huber_loss(half, z, 1.0).unwrap();
        let l2 = g.huber_loss(two, z, 1.0).unwrap();
        assert_eq!(g.value(l0).item(), 0.0);
        assert_eq!(g.value(l1).item(), 0.125);
        assert_eq!(g.value(l2).item(), 1.5);
        let wrong = g.constant(Tensor::zeros(&[2]));
        assert!(matches!(
            g.huber_loss(z, wrong, 1.0),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn huber_is_c1_at_the_transition() {
        let delta = 1.0;
        let quadratic = |r: f64| 0.5 * r * r;
        let linear = |r: f64| delta * (r.abs() - 0.5 * delta);
        for r in [delta - 1e-9, delta + 1e-9] {
            assert!((quadratic(r) - linear(r)).abs() < 1e-12);
        }
        assert_eq!(huber_term(delta, delta), 0.5 * delta * delta);
        // one-sided slopes both approach delta
        let h = 1e-7;
        let left = (huber_term(delta, delta) - huber_term(delta - h, delta)) / h;
        let right = (huber_term(delta + h, delta) - huber_term(delta, delta)) / h;
        assert!((left - delta).abs() < 1e-6 && (right - delta).abs() < 1e-6);
    }

    #[test]
    fn backward_runs_in_reverse_topological_order() {
        let mut g = Graph::<f64>::new();
        let a = g.param(t(&[2], &[1., 2.]));
        let b = g.mul(a, a).unwrap();
        let c = g.scale(b, 3.0).unwrap();
        let s = g.sum(c).unwrap();
        let grads = g.backward(s).unwrap();
        assert_eq!(grads.visit_order(), &[s, c, b]);
        assert_eq!(grads.get(a).unwrap().to_f64_vec(), vec![6., 12.]);
    }

    #[test]
    fn replay_is_bit_identical() {
        let mut g = Graph::<f32>::new();
        let x = g.param(Tensor::from_f64(&[2, 3], &[0.1, -0.2, 0.3, 0.4, 0.5, -0.6]).unwrap());
        let w = g.param(Tensor::from_f64(&[3, 2], &[1., 2., 3., -1., 0.5, 0.25]).unwrap());
        let y = g.matmul(x, w).unwrap();
        let z = g.gelu(y).unwrap();
        let s = g.softmax(z, 1).unwrap();
        let m = g.mean(s).unwrap();
        let values = g.replay().unwrap();
        for id in [y, z, s, m] {
            assert!(values[id.index()].bit_eq(g.value(id)));
        }
    }

    #[test]
    fn constants_get_no_gradient() {
        let mut g = Graph::<f64>::new();
        let a = g.param(t(&[2], &[1., 2.]));
        let k = g.constant(t(&[2], &[3., 4.]));
        let p = g.mul(a, k).unwrap();
        let s = g.sum(p).unwrap();
        let grads = g.backward(s).unwrap();
        assert!(grads.get(k).is_none());
        assert_eq!(grads.get(a).unwrap().to_f64_vec(), vec![3., 4.]);
    }
}
