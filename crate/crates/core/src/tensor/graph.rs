use super::backend::{Activation, Backend, Combine, Padding};
use super::kernels::{self, MulLayout};
use super::{Element, Shape, Tensor};
use crate::error::{Error, Result};

/// Handle to a node of a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Copy, Debug)]
enum Op {
    Leaf,
    Conv2d { x: Var, w: Var, b: Var, stride: usize, padding: Padding },
    PixelShuffle { x: Var, r: usize },
    PixelUnshuffle { x: Var, r: usize },
    Activation { x: Var, act: Activation },
    GlobalAvgPool { x: Var },
    Linear { x: Var, w: Var, b: Var },
    Add { a: Var, b: Var },
    /// `scale` marks `other` as an N×C×1×1 channel multiplier.
    Mul { full: Var, other: Var, scale: bool },
    Concat { a: Var, b: Var },
    Sum { x: Var },
    MeanAbsDiff { a: Var, b: Var },
}

impl Op {
    fn inputs(&self) -> Vec<Var> {
        match *self {
            Op::Leaf => vec![],
            Op::Conv2d { x, w, b, .. } | Op::Linear { x, w, b } => vec![x, w, b],
            Op::PixelShuffle { x, .. }
            | Op::PixelUnshuffle { x, .. }
            | Op::Activation { x, .. }
            | Op::GlobalAvgPool { x }
            | Op::Sum { x } => vec![x],
            Op::Add { a, b } | Op::Concat { a, b } | Op::MeanAbsDiff { a, b } => vec![a, b],
            Op::Mul { full, other, .. } => vec![full, other],
        }
    }
}

#[derive(Debug)]
struct Node<E> {
    value: Tensor<E>,
    op: Op,
    requires_grad: bool,
}

/// Define-by-run computation record. Nodes are appended in evaluation order,
/// so every node's inputs precede it.
#[derive(Debug, Default)]
pub struct Graph<E> {
    nodes: Vec<Node<E>>,
}

/// Result of [`Graph::backward`]: ∂loss/∂leaf for every leaf that requires it.
#[derive(Debug)]
pub struct Gradients<E> {
    grads: Vec<Option<Tensor<E>>>,
}

impl<E: Element> Gradients<E> {
    pub fn get(&self, v: Var) -> Option<&Tensor<E>> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    pub fn take(&mut self, v: Var) -> Option<Tensor<E>> {
        self.grads.get_mut(v.0).and_then(Option::take)
    }
}

fn accumulate<E: Element>(slot: &mut Option<Tensor<E>>, g: Tensor<E>) {
    match slot {
        Some(acc) => {
            for (a, &b) in acc.data_mut().iter_mut().zip(g.data()) {
                *a = *a + b;
            }
        }
        None => *slot = Some(g),
    }
}

impl<E: Element> Graph<E> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn leaf(&mut self, value: Tensor<E>, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    /// Leaf that receives a gradient.
    pub fn param(&mut self, value: Tensor<E>) -> Var {
        self.leaf(value, true)
    }

    /// Leaf treated as a constant.
    pub fn constant(&mut self, value: Tensor<E>) -> Var {
        self.leaf(value, false)
    }

    pub fn value(&self, v: Var) -> &Tensor<E> {
        &self.nodes[v.0].value
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn push(&mut self, value: Tensor<E>, op: Op) -> Var {
        let requires_grad = op.inputs().iter().any(|v| self.nodes[v.0].requires_grad);
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    /// Sum of all elements as a 1×1×1×1 tensor.
    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).sum();
        self.push(Tensor::scalar(s), Op::Sum { x })
    }

    /// Mean of `|a - b|` over all elements as a 1×1×1×1 tensor.
    pub fn mean_abs_diff(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(Error::shape(format!(
                "mean absolute difference of {} and {}",
                ta.shape(),
                tb.shape()
            )));
        }
        let total = ta
            .data()
            .iter()
            .zip(tb.data())
            .fold(E::zero(), |acc, (&p, &q)| acc + (p - q).abs());
        let mean = total / E::of(ta.data().len() as f64);
        Ok(self.push(Tensor::scalar(mean), Op::MeanAbsDiff { a, b }))
    }

    /// Which side of its kink every piecewise-linear op input lies on.
    ///
    /// Two evaluations with equal patterns lie on the same linear piece of
    /// every LeakyReLU and absolute difference in the graph.
    pub fn kink_pattern(&self) -> Vec<bool> {
        let mut out = Vec::new();
        for node in &self.nodes {
            match node.op {
                Op::Activation {
                    x,
                    act: Activation::LeakyRelu(_),
                } => out.extend(self.value(x).data().iter().map(|&v| v >= E::zero())),
                Op::MeanAbsDiff { a, b } => {
                    for (&p, &q) in self.value(a).data().iter().zip(self.value(b).data()) {
                        out.push(p > q);
                        out.push(p < q);
                    }
                }
                _ => {}
            }
        }
        out
    }

    /// Reverse sweep from a scalar `loss`. Fan-out contributions accumulate.
    pub fn backward(&self, loss: Var) -> Result<Gradients<E>> {
        let shape = self.value(loss).shape();
        if shape != Shape::scalar() {
            return Err(Error::shape(format!("backward needs a scalar loss, got {shape}")));
        }
        let mut grads: Vec<Option<Tensor<E>>> = (0..self.nodes.len()).map(|_| None).collect();
        if !self.nodes[loss.0].requires_grad {
            return Ok(Gradients { grads });
        }
        grads[loss.0] = Some(Tensor::scalar(E::one()));

        for i in (0..=loss.0).rev() {
            let node = &self.nodes[i];
            if !node.requires_grad || matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            let rg = |v: Var| self.nodes[v.0].requires_grad;
            match node.op {
                Op::Leaf => unreachable!(),
                Op::Conv2d { x, w, b, stride, padding } => {
                    let cg = kernels::conv2d_backward(
                        self.value(x),
                        self.value(w),
                        self.value(b).shape(),
                        stride,
                        padding,
                        &g,
                        [rg(x), rg(w), rg(b)],
                    )?;
                    for (v, t) in [(x, cg.dx), (w, cg.dweight), (b, cg.dbias)] {
                        if let Some(t) = t {
                            accumulate(&mut grads[v.0], t);
                        }
                    }
                }
                Op::PixelShuffle { x, r } => {
                    accumulate(&mut grads[x.0], kernels::pixel_unshuffle(&g, r)?);
                }
                Op::PixelUnshuffle { x, r } => {
                    accumulate(&mut grads[x.0], kernels::pixel_shuffle(&g, r)?);
                }
                Op::Activation { x, act } => {
                    let dx = kernels::activation_backward(self.value(x), &node.value, act, &g);
                    accumulate(&mut grads[x.0], dx);
                }
                Op::GlobalAvgPool { x } => {
                    let dx = kernels::global_avg_pool_backward(self.value(x).shape(), &g);
                    accumulate(&mut grads[x.0], dx);
                }
                Op::Linear { x, w, b } => {
                    let (dx, dw, db) =
                        kernels::linear_backward(self.value(x), self.value(w), self.value(b).shape(), &g)?;
                    for (v, t) in [(x, dx), (w, dw), (b, db)] {
                        if rg(v) {
                            accumulate(&mut grads[v.0], t);
                        }
                    }
                }
                Op::Add { a, b } => {
                    if rg(b) {
                        accumulate(&mut grads[b.0], g.clone());
                    }
                    if rg(a) {
                        accumulate(&mut grads[a.0], g);
                    }
                }
                Op::Mul { full, other, scale } => {
                    let (tf, to) = (self.value(full), self.value(other));
                    if rg(full) {
                        let d = if scale { kernels::channel_scale(&g, to) } else { kernels::mul(&g, to)? };
                        accumulate(&mut grads[full.0], d);
                    }
                    if rg(other) {
                        let d = if scale { kernels::channel_dot(tf, &g) } else { kernels::mul(&g, tf)? };
                        accumulate(&mut grads[other.0], d);
                    }
                }
                Op::Concat { a, b } => {
                    let (da, db) = kernels::split_channels(&g, self.value(a).shape().c);
                    if rg(a) {
                        accumulate(&mut grads[a.0], da);
                    }
                    if rg(b) {
                        accumulate(&mut grads[b.0], db);
                    }
                }
                Op::Sum { x } => {
                    let s = self.value(x).shape();
                    accumulate(&mut grads[x.0], Tensor::full(s, g.data()[0]));
                }
                Op::MeanAbsDiff { a, b } => {
                    let (ta, tb) = (self.value(a), self.value(b));
                    let k = g.data()[0] / E::of(ta.data().len() as f64);
                    // Subgradient of |·| at zero is taken as zero.
                    let da: Vec<E> = ta
                        .data()
                        .iter()
                        .zip(tb.data())
                        .map(|(&p, &q)| {
                            let d = p - q;
                            if d > E::zero() {
                                k
                            } else if d < E::zero() {
                                -k
                            } else {
                                E::zero()
                            }
                        })
                        .collect();
                    if rg(b) {
                        let db = da.iter().map(|&v| -v).collect();
                        accumulate(&mut grads[b.0], Tensor::new(tb.shape(), db)?);
                    }
                    if rg(a) {
                        accumulate(&mut grads[a.0], Tensor::new(ta.shape(), da)?);
                    }
                }
            }
        }
        Ok(Gradients { grads })
    }
}

impl<E: Element> Backend<E> for Graph<E> {
    type Value = Var;

    fn shape_of(&self, v: &Var) -> Shape {
        self.value(*v).shape()
    }

    fn conv2d(&mut self, x: &Var, w: &Var, b: &Var, stride: usize, padding: Padding) -> Result<Var> {
        let out = kernels::conv2d(self.value(*x), self.value(*w), self.value(*b), stride, padding)?;
        Ok(self.push(
            out,
            Op::Conv2d {
                x: *x,
                w: *w,
                b: *b,
                stride,
                padding,
            },
        ))
    }

    fn pixel_shuffle(&mut self, x: &Var, r: usize) -> Result<Var> {
        let out = kernels::pixel_shuffle(self.value(*x), r)?;
        Ok(self.push(out, Op::PixelShuffle { x: *x, r }))
    }

    fn pixel_unshuffle(&mut self, x: &Var, r: usize) -> Result<Var> {
        let out = kernels::pixel_unshuffle(self.value(*x), r)?;
        Ok(self.push(out, Op::PixelUnshuffle { x: *x, r }))
    }

    fn activation(&mut self, x: &Var, act: Activation) -> Var {
        let out = kernels::activation(self.value(*x), act);
        self.push(out, Op::Activation { x: *x, act })
    }

    fn global_avg_pool(&mut self, x: &Var) -> Var {
        let out = kernels::global_avg_pool(self.value(*x));
        self.push(out, Op::GlobalAvgPool { x: *x })
    }

    fn linear(&mut self, x: &Var, w: &Var, b: &Var) -> Result<Var> {
        let out = kernels::linear(self.value(*x), self.value(*w), self.value(*b))?;
        Ok(self.push(out, Op::Linear { x: *x, w: *w, b: *b }))
    }

    fn combine(&mut self, a: &Var, b: &Var, kind: Combine) -> Result<Var> {
        let (a, b) = (*a, *b);
        match kind {
            Combine::Add => {
                let out = kernels::add(self.value(a), self.value(b))?;
                Ok(self.push(out, Op::Add { a, b }))
            }
            Combine::Mul => {
                let (sa, sb) = (self.value(a).shape(), self.value(b).shape());
                let (full, other, scale) = match kernels::mul_layout(sa, sb) {
                    Ok(layout) => (a, b, layout == MulLayout::ChannelScale),
                    Err(e) => match kernels::mul_layout(sb, sa) {
                        Ok(MulLayout::ChannelScale) => (b, a, true),
                        _ => return Err(e),
                    },
                };
                let out = kernels::mul(self.value(full), self.value(other))?;
                Ok(self.push(out, Op::Mul { full, other, scale }))
            }
            Combine::ConcatChannels => {
                let out = kernels::concat_channels(self.value(a), self.value(b))?;
                Ok(self.push(out, Op::Concat { a, b }))
            }
        }
    }
}
