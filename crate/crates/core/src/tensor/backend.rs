use std::marker::PhantomData;
use std::sync::Arc;

use super::{kernels, Element, Shape, Tensor};
use crate::error::Result;

/// Border handling for "same" convolutions (⌊k/2⌋ per side).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Padding {
    #[default]
    Reflect,
    Zero,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Activation {
    LeakyRelu(f64),
    Sigmoid,
    Identity,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Combine {
    Add,
    /// Elementwise product; an N×C×1×1 operand scales the channels of an N×C×H×W one.
    Mul,
    ConcatChannels,
}

/// The operations a network forward pass is written against.
pub trait Backend<E: Element> {
    type Value: Clone;

    fn shape_of(&self, v: &Self::Value) -> Shape;

    fn conv2d(
        &mut self,
        x: &Self::Value,
        weight: &Self::Value,
        bias: &Self::Value,
        stride: usize,
        padding: Padding,
    ) -> Result<Self::Value>;

    fn pixel_shuffle(&mut self, x: &Self::Value, r: usize) -> Result<Self::Value>;

    fn pixel_unshuffle(&mut self, x: &Self::Value, r: usize) -> Result<Self::Value>;

    fn activation(&mut self, x: &Self::Value, act: Activation) -> Self::Value;

    fn global_avg_pool(&mut self, x: &Self::Value) -> Self::Value;

    fn linear(&mut self, x: &Self::Value, weight: &Self::Value, bias: &Self::Value) -> Result<Self::Value>;

    fn combine(&mut self, a: &Self::Value, b: &Self::Value, kind: Combine) -> Result<Self::Value>;
}

/// Direct evaluation with no recording. Intermediates are freed as soon as
/// the forward pass drops them.
#[derive(Debug)]
pub struct Eager<E>(PhantomData<E>);

impl<E> Default for Eager<E> {
    fn default() -> Self {
        Self(PhantomData)
    }
}

impl<E: Element> Eager<E> {
    pub fn new() -> Self {
        Self::default()
    }
}

impl<E: Element> Backend<E> for Eager<E> {
    type Value = Arc<Tensor<E>>;

    fn shape_of(&self, v: &Self::Value) -> Shape {
        v.shape()
    }

    fn conv2d(
        &mut self,
        x: &Self::Value,
        weight: &Self::Value,
        bias: &Self::Value,
        stride: usize,
        padding: Padding,
    ) -> Result<Self::Value> {
        kernels::conv2d(x, weight, bias, stride, padding).map(Arc::new)
    }

    fn pixel_shuffle(&mut self, x: &Self::Value, r: usize) -> Result<Self::Value> {
        kernels::pixel_shuffle(x, r).map(Arc::new)
    }

    fn pixel_unshuffle(&mut self, x: &Self::Value, r: usize) -> Result<Self::Value> {
        kernels::pixel_unshuffle(x, r).map(Arc::new)
    }

    fn activation(&mut self, x: &Self::Value, act: Activation) -> Self::Value {
        Arc::new(kernels::activation(x, act))
    }

    fn global_avg_pool(&mut self, x: &Self::Value) -> Self::Value {
        Arc::new(kernels::global_avg_pool(x))
    }

    fn linear(&mut self, x: &Self::Value, weight: &Self::Value, bias: &Self::Value) -> Result<Self::Value> {
        kernels::linear(x, weight, bias).map(Arc::new)
    }

    fn combine(&mut self, a: &Self::Value, b: &Self::Value, kind: Combine) -> Result<Self::Value> {
        let out = match kind {
            Combine::Add => kernels::add(a, b),
            Combine::Mul => kernels::mul(a, b),
            Combine::ConcatChannels => kernels::concat_channels(a, b),
        }?;
        Ok(Arc::new(out))
    }
}
