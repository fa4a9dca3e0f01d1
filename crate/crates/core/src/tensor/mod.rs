//! Dense N×C×H×W tensors, the handful of operations the network needs, and
//! reverse-mode differentiation over a define-by-run graph.
//!
//! Operations are written once against the [`Backend`] trait. [`Eager`]
//! evaluates them directly on owned tensors (inference), [`Graph`] records
//! them so [`Graph::backward`] can produce gradients (training, checks).

mod backend;
mod graph;
pub mod gradcheck;
pub(crate) mod kernels;

use std::fmt;

use num_traits::{Float, FromPrimitive};
use rand::Rng;

use crate::error::{Error, Result};

pub use backend::{Activation, Backend, Combine, Eager, Padding};
pub use gradcheck::{grad_check, CheckReport, GradCheck};
pub use graph::{Gradients, Graph, Var};

/// Scalar type a [`Tensor`] can hold. Implemented for `f32` (training and
/// inference) and `f64` (gradient checks).
pub trait Element:
    Float + FromPrimitive + Default + fmt::Debug + fmt::Display + Send + Sync + 'static
{
    /// Lossy conversion from an `f64` constant.
    fn of(v: f64) -> Self;

    /// `c = alpha * a·b + beta * c` on strided row/column layouts.
    #[allow(clippy::too_many_arguments)]
    fn gemm(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: &[Self],
        a_strides: (isize, isize),
        b: &[Self],
        b_strides: (isize, isize),
        beta: Self,
        c: &mut [Self],
        c_strides: (isize, isize),
    );
}

fn check_span(len: usize, rows: usize, cols: usize, (rs, cs): (isize, isize)) {
    if rows == 0 || cols == 0 {
        return;
    }
    let last = (rows as isize - 1) * rs + (cols as isize - 1) * cs;
    assert!(
        rs >= 0 && cs >= 0 && (last as usize) < len,
        "gemm operand out of bounds"
    );
}

macro_rules! impl_element {
    ($t:ty, $gemm:path) => {
        impl Element for $t {
            #[inline]
            fn of(v: f64) -> Self {
                v as $t
            }

            fn gemm(
                m: usize,
                k: usize,
                n: usize,
                alpha: Self,
                a: &[Self],
                a_strides: (isize, isize),
                b: &[Self],
                b_strides: (isize, isize),
                beta: Self,
                c: &mut [Self],
                c_strides: (isize, isize),
            ) {
                check_span(a.len(), m, k, a_strides);
                check_span(b.len(), k, n, b_strides);
                check_span(c.len(), m, n, c_strides);
                if m == 0 || n == 0 {
                    return;
                }
                // SAFETY: every operand span was bounds-checked above.
                unsafe {
                    $gemm(
                        m,
                        k,
                        n,
                        alpha,
                        a.as_ptr(),
                        a_strides.0,
                        a_strides.1,
                        b.as_ptr(),
                        b_strides.0,
                        b_strides.1,
                        beta,
                        c.as_mut_ptr(),
                        c_strides.0,
                        c_strides.1,
                    );
                }
            }
        }
    };
}

impl_element!(f32, matrixmultiply::sgemm);
impl_element!(f64, matrixmultiply::dgemm);

/// Tensor extent in N, C, H, W order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Shape {
    pub n: usize,
    pub c: usize,
    pub h: usize,
    pub w: usize,
}

impl Shape {
    pub const fn new(n: usize, c: usize, h: usize, w: usize) -> Self {
        Self { n, c, h, w }
    }

    pub const fn scalar() -> Self {
        Self::new(1, 1, 1, 1)
    }

    pub const fn len(&self) -> usize {
        self.n * self.c * self.h * self.w
    }

    pub const fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Elements in one H×W plane.
    pub const fn plane(&self) -> usize {
        self.h * self.w
    }

    pub const fn dims(&self) -> [usize; 4] {
        [self.n, self.c, self.h, self.w]
    }

    #[inline]
    pub fn index(&self, n: usize, c: usize, h: usize, w: usize) -> usize {
        ((n * self.c + c) * self.h + h) * self.w + w
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}×{}×{}×{}", self.n, self.c, self.h, self.w)
    }
}

impl From<[usize; 4]> for Shape {
    fn from(d: [usize; 4]) -> Self {
        Self::new(d[0], d[1], d[2], d[3])
    }
}

/// Row-major N,C,H,W array of values.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<E> {
    shape: Shape,
    data: Vec<E>,
}

impl<E: Element> Tensor<E> {
    pub fn new(shape: impl Into<Shape>, data: Vec<E>) -> Result<Self> {
        let shape = shape.into();
        if data.len() != shape.len() {
            return Err(Error::shape(format!(
                "{} values supplied for shape {shape}",
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: impl Into<Shape>) -> Self {
        Self::full(shape, E::zero())
    }

    pub fn ones(shape: impl Into<Shape>) -> Self {
        Self::full(shape, E::one())
    }

    pub fn full(shape: impl Into<Shape>, value: E) -> Self {
        let shape = shape.into();
        Self {
            shape,
            data: vec![value; shape.len()],
        }
    }

    pub fn scalar(value: E) -> Self {
        Self::full(Shape::scalar(), value)
    }

    /// Values drawn uniformly from `[lo, hi)`.
    pub fn uniform(shape: impl Into<Shape>, lo: f64, hi: f64, rng: &mut impl Rng) -> Self {
        let shape = shape.into();
        let data = (0..shape.len())
            .map(|_| E::of(rng.random_range(lo..hi)))
            .collect();
        Self { shape, data }
    }

    pub fn from_fn(shape: impl Into<Shape>, mut f: impl FnMut(usize, usize, usize, usize) -> E) -> Self {
        let shape = shape.into();
        let mut data = Vec::with_capacity(shape.len());
        for n in 0..shape.n {
            for c in 0..shape.c {
                for h in 0..shape.h {
                    for w in 0..shape.w {
                        data.push(f(n, c, h, w));
                    }
                }
            }
        }
        Self { shape, data }
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn data(&self) -> &[E] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [E] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<E> {
        self.data
    }

    #[inline]
    pub fn at(&self, n: usize, c: usize, h: usize, w: usize) -> E {
        self.data[self.shape.index(n, c, h, w)]
    }

    /// Same values viewed under another shape with the same element count.
    pub fn reshape(self, shape: impl Into<Shape>) -> Result<Self> {
        Self::new(shape, self.data)
    }

    pub fn map(&self, f: impl Fn(E) -> E) -> Self {
        Self {
            shape: self.shape,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn scale(&self, alpha: E) -> Self {
        self.map(|v| v * alpha)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn sum(&self) -> E {
        self.data.iter().fold(E::zero(), |acc, &v| acc + v)
    }

    pub fn l2_norm(&self) -> E {
        self.data.iter().fold(E::zero(), |acc, &v| acc + v * v).sqrt()
    }

    pub fn cast<F: Element>(&self) -> Tensor<F> {
        Tensor {
            shape: self.shape,
            data: self.data.iter().map(|v| F::of(v.to_f64().unwrap_or(f64::NAN))).collect(),
        }
    }

    /// Copy of batch element `n` as a 1×C×H×W tensor.
    pub fn batch_item(&self, n: usize) -> Tensor<E> {
        let s = self.shape;
        let span = s.c * s.plane();
        Tensor {
            shape: Shape::new(1, s.c, s.h, s.w),
            data: self.data[n * span..(n + 1) * span].to_vec(),
        }
    }

    /// Stacks 1×C×H×W (or N×C×H×W) tensors along the batch axis.
    pub fn stack(items: &[Tensor<E>]) -> Result<Tensor<E>> {
        let first = items
            .first()
            .ok_or_else(|| Error::shape("cannot stack an empty list"))?
            .shape;
        let mut data = Vec::new();
        let mut n = 0;
        for t in items {
            let s = t.shape;
            if (s.c, s.h, s.w) != (first.c, first.h, first.w) {
                return Err(Error::shape(format!("cannot stack {s} with {first}")));
            }
            n += s.n;
            data.extend_from_slice(&t.data);
        }
        Tensor::new(Shape::new(n, first.c, first.h, first.w), data)
    }

    /// Pads H and W by reflection (edge not repeated) on the bottom and right.
    pub fn reflect_pad_to(&self, h: usize, w: usize) -> Result<Tensor<E>> {
        let s = self.shape;
        if h < s.h || w < s.w || h - s.h >= s.h || w - s.w >= s.w {
            return Err(Error::Padding(format!(
                "cannot reflect-pad {s} to {h}×{w}"
            )));
        }
        Ok(Tensor::from_fn(Shape::new(s.n, s.c, h, w), |n, c, y, x| {
            self.at(n, c, kernels::reflect(y as isize, s.h), kernels::reflect(x as isize, s.w))
        }))
    }

    /// Top-left `h`×`w` window.
    pub fn crop(&self, h: usize, w: usize) -> Result<Tensor<E>> {
        let s = self.shape;
        if h > s.h || w > s.w {
            return Err(Error::shape(format!("cannot crop {s} to {h}×{w}")));
        }
        Ok(Tensor::from_fn(Shape::new(s.n, s.c, h, w), |n, c, y, x| {
            self.at(n, c, y, x)
        }))
    }
}
