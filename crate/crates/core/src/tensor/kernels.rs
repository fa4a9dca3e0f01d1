//! Forward and backward kernels on plain tensors. Shape validation lives
//! here so both backends reject the same inputs.

use super::{Activation, Element, Padding, Shape, Tensor};
use crate::error::{Error, Result};

/// Reflects an out-of-range index back into `0..n` without repeating the
/// edge sample (`-1 → 1`, `n → n-2`).
#[inline]
pub(crate) fn reflect(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let mut j = i.rem_euclid(period);
    if j >= n as isize {
        j = period - j;
    }
    j as usize
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct ConvGeometry {
    pub in_c: usize,
    pub h: usize,
    pub w: usize,
    pub out_c: usize,
    pub kh: usize,
    pub kw: usize,
    pub stride: usize,
    pub padding: Padding,
    pub out_h: usize,
    pub out_w: usize,
}

impl ConvGeometry {
    pub fn new(x: Shape, weight: Shape, bias: Shape, stride: usize, padding: Padding) -> Result<Self> {
        if stride == 0 {
            return Err(Error::shape("conv2d stride must be positive"));
        }
        if x.c != weight.c {
            return Err(Error::shape(format!(
                "conv2d input has {} channels but weight {weight} expects {}",
                x.c, weight.c
            )));
        }
        if bias.len() != weight.n {
            return Err(Error::shape(format!(
                "conv2d bias has {} values for {} output channels",
                bias.len(),
                weight.n
            )));
        }
        if weight.h % 2 == 0 || weight.w % 2 == 0 {
            return Err(Error::shape(format!(
                "conv2d kernel {}×{} must have odd extent",
                weight.h, weight.w
            )));
        }
        let (ph, pw) = (weight.h / 2, weight.w / 2);
        if padding == Padding::Reflect && (ph >= x.h || pw >= x.w) {
            return Err(Error::Padding(format!(
                "reflect padding of {ph}×{pw} is too wide for a {}×{} input",
                x.h, x.w
            )));
        }
        if x.h == 0 || x.w == 0 {
            return Err(Error::shape("conv2d input has empty spatial extent"));
        }
        Ok(Self {
            in_c: x.c,
            h: x.h,
            w: x.w,
            out_c: weight.n,
            kh: weight.h,
            kw: weight.w,
            stride,
            padding,
            out_h: (x.h - 1) / stride + 1,
            out_w: (x.w - 1) / stride + 1,
        })
    }

    pub fn out_shape(&self, n: usize) -> Shape {
        Shape::new(n, self.out_c, self.out_h, self.out_w)
    }

    fn patch_len(&self) -> usize {
        self.in_c * self.kh * self.kw
    }

    fn positions(&self) -> usize {
        self.out_h * self.out_w
    }

    /// Source index along one axis for every (output, kernel tap) pair.
    fn taps(&self, out: usize, k: usize, size: usize) -> Vec<Option<usize>> {
        let pad = (k / 2) as isize;
        let mut v = Vec::with_capacity(out * k);
        for o in 0..out {
            for t in 0..k {
                let i = (o * self.stride) as isize + t as isize - pad;
                v.push(if (0..size as isize).contains(&i) {
                    Some(i as usize)
                } else {
                    match self.padding {
                        Padding::Reflect => Some(reflect(i, size)),
                        Padding::Zero => None,
                    }
                });
            }
        }
        v
    }

    fn im2col<E: Element>(&self, x: &[E], cols: &mut [E]) {
        let rows = self.taps(self.out_h, self.kh, self.h);
        let colmap = self.taps(self.out_w, self.kw, self.w);
        let p = self.positions();
        for ci in 0..self.in_c {
            let plane = &x[ci * self.h * self.w..(ci + 1) * self.h * self.w];
            for ky in 0..self.kh {
                for kx in 0..self.kw {
                    let row = (ci * self.kh + ky) * self.kw + kx;
                    let dst = &mut cols[row * p..(row + 1) * p];
                    for oy in 0..self.out_h {
                        let line = &mut dst[oy * self.out_w..(oy + 1) * self.out_w];
                        match rows[oy * self.kh + ky] {
                            None => line.fill(E::zero()),
                            Some(iy) => {
                                let src = &plane[iy * self.w..(iy + 1) * self.w];
                                for (ox, d) in line.iter_mut().enumerate() {
                                    *d = match colmap[ox * self.kw + kx] {
                                        Some(ix) => src[ix],
                                        None => E::zero(),
                                    };
                                }
                            }
                        }
                    }
                }
            }
        }
    }

    fn col2im<E: Element>(&self, cols: &[E], dx: &mut [E]) {
        let rows = self.taps(self.out_h, self.kh, self.h);
        let colmap = self.taps(self.out_w, self.kw, self.w);
        let p = self.positions();
        for ci in 0..self.in_c {
            let plane = &mut dx[ci * self.h * self.w..(ci + 1) * self.h * self.w];
            for ky in 0..self.kh {
                for kx in 0..self.kw {
                    let row = (ci * self.kh + ky) * self.kw + kx;
                    let src = &cols[row * p..(row + 1) * p];
                    for oy in 0..self.out_h {
                        let Some(iy) = rows[oy * self.kh + ky] else {
                            continue;
                        };
                        let line = &src[oy * self.out_w..(oy + 1) * self.out_w];
                        for (ox, &g) in line.iter().enumerate() {
                            if let Some(ix) = colmap[ox * self.kw + kx] {
                                plane[iy * self.w + ix] = plane[iy * self.w + ix] + g;
                            }
                        }
                    }
                }
            }
        }
    }
}

pub(crate) fn conv2d<E: Element>(
    x: &Tensor<E>,
    weight: &Tensor<E>,
    bias: &Tensor<E>,
    stride: usize,
    padding: Padding,
) -> Result<Tensor<E>> {
    let g = ConvGeometry::new(x.shape(), weight.shape(), bias.shape(), stride, padding)?;
    let n = x.shape().n;
    let (k, p) = (g.patch_len(), g.positions());
    let in_span = g.in_c * g.h * g.w;
    let out_span = g.out_c * p;
    let mut out = vec![E::zero(); n * out_span];
    let mut cols = vec![E::zero(); k * p];
    for b in 0..n {
        g.im2col(&x.data()[b * in_span..(b + 1) * in_span], &mut cols);
        let dst = &mut out[b * out_span..(b + 1) * out_span];
        for (oc, chunk) in dst.chunks_mut(p).enumerate() {
            chunk.fill(bias.data()[oc]);
        }
        E::gemm(
            g.out_c,
            k,
            p,
            E::one(),
            weight.data(),
            (k as isize, 1),
            &cols,
            (p as isize, 1),
            E::one(),
            dst,
            (p as isize, 1),
        );
    }
    Tensor::new(g.out_shape(n), out)
}

/// Gradients of conv2d. Each output is computed only when requested.
pub(crate) struct ConvGrads<E> {
    pub dx: Option<Tensor<E>>,
    pub dweight: Option<Tensor<E>>,
    pub dbias: Option<Tensor<E>>,
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn conv2d_backward<E: Element>(
    x: &Tensor<E>,
    weight: &Tensor<E>,
    bias_shape: Shape,
    stride: usize,
    padding: Padding,
    grad_out: &Tensor<E>,
    want: [bool; 3],
) -> Result<ConvGrads<E>> {
    let g = ConvGeometry::new(x.shape(), weight.shape(), bias_shape, stride, padding)?;
    let n = x.shape().n;
    let (k, p) = (g.patch_len(), g.positions());
    let in_span = g.in_c * g.h * g.w;
    let out_span = g.out_c * p;
    let [want_x, want_w, want_b] = want;

    let mut dx = want_x.then(|| vec![E::zero(); n * in_span]);
    let mut dw = want_w.then(|| vec![E::zero(); weight.shape().len()]);
    let mut db = want_b.then(|| vec![E::zero(); g.out_c]);
    let mut cols = vec![E::zero(); k * p];

    for b in 0..n {
        let gout = &grad_out.data()[b * out_span..(b + 1) * out_span];
        if let Some(db) = db.as_mut() {
            for (oc, chunk) in gout.chunks(p).enumerate() {
                db[oc] = db[oc] + chunk.iter().fold(E::zero(), |a, &v| a + v);
            }
        }
        if let Some(dw) = dw.as_mut() {
            g.im2col(&x.data()[b * in_span..(b + 1) * in_span], &mut cols);
            // dW (outC×K) += dOut (outC×P) · colsᵀ (P×K)
            E::gemm(
                g.out_c,
                p,
                k,
                E::one(),
                gout,
                (p as isize, 1),
                &cols,
                (1, p as isize),
                E::one(),
                dw,
                (k as isize, 1),
            );
        }
        if let Some(dx) = dx.as_mut() {
            // dCols (K×P) = Wᵀ (K×outC) · dOut (outC×P)
            E::gemm(
                k,
                g.out_c,
                p,
                E::one(),
                weight.data(),
                (1, k as isize),
                gout,
                (p as isize, 1),
                E::zero(),
                &mut cols,
                (p as isize, 1),
            );
            g.col2im(&cols, &mut dx[b * in_span..(b + 1) * in_span]);
        }
    }
    Ok(ConvGrads {
        dx: dx.map(|d| Tensor::new(x.shape(), d)).transpose()?,
        dweight: dw.map(|d| Tensor::new(weight.shape(), d)).transpose()?,
        dbias: db.map(|d| Tensor::new(bias_shape, d)).transpose()?,
    })
}

pub(crate) fn pixel_shuffle<E: Element>(x: &Tensor<E>, r: usize) -> Result<Tensor<E>> {
    let s = x.shape();
    if r == 0 || s.c % (r * r) != 0 {
        return Err(Error::shape(format!(
            "pixel_shuffle needs channels divisible by {}², got {s}",
            r
        )));
    }
    let out = Shape::new(s.n, s.c / (r * r), s.h * r, s.w * r);
    Ok(Tensor::from_fn(out, |n, c, y, xx| {
        let (h, dy) = (y / r, y % r);
        let (w, dx) = (xx / r, xx % r);
        x.at(n, c * r * r + dy * r + dx, h, w)
    }))
}

pub(crate) fn pixel_unshuffle<E: Element>(x: &Tensor<E>, r: usize) -> Result<Tensor<E>> {
    let s = x.shape();
    if r == 0 || s.h % r != 0 || s.w % r != 0 {
        return Err(Error::shape(format!(
            "pixel_unshuffle needs H and W divisible by {r}, got {s}"
        )));
    }
    let out = Shape::new(s.n, s.c * r * r, s.h / r, s.w / r);
    Ok(Tensor::from_fn(out, |n, c, h, w| {
        let (src_c, sub) = (c / (r * r), c % (r * r));
        let (dy, dx) = (sub / r, sub % r);
        x.at(n, src_c, h * r + dy, w * r + dx)
    }))
}

pub(crate) fn activation<E: Element>(x: &Tensor<E>, act: Activation) -> Tensor<E> {
    match act {
        Activation::Identity => x.clone(),
        Activation::LeakyRelu(slope) => {
            let slope = E::of(slope);
            x.map(|v| if v >= E::zero() { v } else { v * slope })
        }
        Activation::Sigmoid => x.map(|v| E::one() / (E::one() + (-v).exp())),
    }
}

/// `input` is the activation's argument, `output` its result.
pub(crate) fn activation_backward<E: Element>(
    input: &Tensor<E>,
    output: &Tensor<E>,
    act: Activation,
    grad: &Tensor<E>,
) -> Tensor<E> {
    let data = match act {
        Activation::Identity => grad.data().to_vec(),
        Activation::LeakyRelu(slope) => {
            let slope = E::of(slope);
            input
                .data()
                .iter()
                .zip(grad.data())
                .map(|(&v, &g)| if v >= E::zero() { g } else { g * slope })
                .collect()
        }
        Activation::Sigmoid => output
            .data()
            .iter()
            .zip(grad.data())
            .map(|(&s, &g)| g * s * (E::one() - s))
            .collect(),
    };
    Tensor::new(input.shape(), data).expect("shape preserved")
}

pub(crate) fn global_avg_pool<E: Element>(x: &Tensor<E>) -> Tensor<E> {
    let s = x.shape();
    let plane = s.plane();
    let inv = E::one() / E::of(plane as f64);
    let data = x
        .data()
        .chunks(plane)
        .map(|ch| ch.iter().fold(E::zero(), |a, &v| a + v) * inv)
        .collect();
    Tensor::new(Shape::new(s.n, s.c, 1, 1), data).expect("pooled shape")
}

pub(crate) fn global_avg_pool_backward<E: Element>(input: Shape, grad: &Tensor<E>) -> Tensor<E> {
    let plane = input.plane();
    let inv = E::one() / E::of(plane as f64);
    let mut data = Vec::with_capacity(input.len());
    for &g in grad.data() {
        data.extend(std::iter::repeat_n(g * inv, plane));
    }
    Tensor::new(input, data).expect("pool gradient shape")
}

fn linear_dims(x: Shape, weight: Shape, bias: Shape) -> Result<(usize, usize, usize)> {
    if x.h != 1 || x.w != 1 {
        return Err(Error::shape(format!("linear expects N×C×1×1 input, got {x}")));
    }
    let in_c = weight.len() / weight.n.max(1);
    if in_c != x.c {
        return Err(Error::shape(format!(
            "linear weight {weight} does not accept {} input features",
            x.c
        )));
    }
    if bias.len() != weight.n {
        return Err(Error::shape(format!(
            "linear bias has {} values for {} outputs",
            bias.len(),
            weight.n
        )));
    }
    Ok((x.n, x.c, weight.n))
}

pub(crate) fn linear<E: Element>(x: &Tensor<E>, weight: &Tensor<E>, bias: &Tensor<E>) -> Result<Tensor<E>> {
    let (n, c, o) = linear_dims(x.shape(), weight.shape(), bias.shape())?;
    let mut out = Vec::with_capacity(n * o);
    for _ in 0..n {
        out.extend_from_slice(bias.data());
    }
    // Y (N×O) += X (N×C) · Wᵀ (C×O)
    E::gemm(
        n,
        c,
        o,
        E::one(),
        x.data(),
        (c as isize, 1),
        weight.data(),
        (1, c as isize),
        E::one(),
        &mut out,
        (o as isize, 1),
    );
    Tensor::new(Shape::new(n, o, 1, 1), out)
}

pub(crate) fn linear_backward<E: Element>(
    x: &Tensor<E>,
    weight: &Tensor<E>,
    bias_shape: Shape,
    grad: &Tensor<E>,
) -> Result<(Tensor<E>, Tensor<E>, Tensor<E>)> {
    let (n, c, o) = linear_dims(x.shape(), weight.shape(), bias_shape)?;
    let mut dx = vec![E::zero(); n * c];
    E::gemm(
        n,
        o,
        c,
        E::one(),
        grad.data(),
        (o as isize, 1),
        weight.data(),
        (c as isize, 1),
        E::zero(),
        &mut dx,
        (c as isize, 1),
    );
    let mut dw = vec![E::zero(); o * c];
    E::gemm(
        o,
        n,
        c,
        E::one(),
        grad.data(),
        (1, o as isize),
        x.data(),
        (c as isize, 1),
        E::zero(),
        &mut dw,
        (c as isize, 1),
    );
    let mut db = vec![E::zero(); o];
    for row in grad.data().chunks(o) {
        for (d, &g) in db.iter_mut().zip(row) {
            *d = *d + g;
        }
    }
    Ok((
        Tensor::new(x.shape(), dx)?,
        Tensor::new(weight.shape(), dw)?,
        Tensor::new(bias_shape, db)?,
    ))
}

pub(crate) fn add<E: Element>(a: &Tensor<E>, b: &Tensor<E>) -> Result<Tensor<E>> {
    if a.shape() != b.shape() {
        return Err(Error::shape(format!("cannot add {} and {}", a.shape(), b.shape())));
    }
    let data = a.data().iter().zip(b.data()).map(|(&x, &y)| x + y).collect();
    Tensor::new(a.shape(), data)
}

/// How the operands of a product line up.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum MulLayout {
    Same,
    /// Second operand is N×C×1×1 against a full first operand.
    ChannelScale,
}

pub(crate) fn mul_layout(a: Shape, b: Shape) -> Result<MulLayout> {
    if a == b {
        Ok(MulLayout::Same)
    } else if b.n == a.n && b.c == a.c && b.h == 1 && b.w == 1 {
        Ok(MulLayout::ChannelScale)
    } else {
        Err(Error::shape(format!("cannot multiply {a} by {b}")))
    }
}

/// `full ⊙ scale`, where `scale` is N×C×1×1.
pub(crate) fn channel_scale<E: Element>(full: &Tensor<E>, scale: &Tensor<E>) -> Tensor<E> {
    let plane = full.shape().plane();
    let data = full
        .data()
        .chunks(plane)
        .zip(scale.data())
        .flat_map(|(ch, &s)| ch.iter().map(move |&v| v * s))
        .collect();
    Tensor::new(full.shape(), data).expect("shape preserved")
}

pub(crate) fn mul<E: Element>(a: &Tensor<E>, b: &Tensor<E>) -> Result<Tensor<E>> {
    match mul_layout(a.shape(), b.shape()) {
        Ok(MulLayout::Same) => {
            let data = a.data().iter().zip(b.data()).map(|(&x, &y)| x * y).collect();
            Tensor::new(a.shape(), data)
        }
        Ok(MulLayout::ChannelScale) => Ok(channel_scale(a, b)),
        Err(e) => match mul_layout(b.shape(), a.shape()) {
            Ok(MulLayout::ChannelScale) => Ok(channel_scale(b, a)),
            _ => Err(e),
        },
    }
}

/// Per-channel sums of `a ⊙ g`, shaped N×C×1×1.
pub(crate) fn channel_dot<E: Element>(a: &Tensor<E>, g: &Tensor<E>) -> Tensor<E> {
    let s = a.shape();
    let plane = s.plane();
    let data = a
        .data()
        .chunks(plane)
        .zip(g.data().chunks(plane))
        .map(|(x, y)| x.iter().zip(y).fold(E::zero(), |acc, (&p, &q)| acc + p * q))
        .collect();
    Tensor::new(Shape::new(s.n, s.c, 1, 1), data).expect("channel dot shape")
}

pub(crate) fn concat_channels<E: Element>(a: &Tensor<E>, b: &Tensor<E>) -> Result<Tensor<E>> {
    let (sa, sb) = (a.shape(), b.shape());
    if sa.n != sb.n || sa.h != sb.h || sa.w != sb.w {
        return Err(Error::shape(format!("cannot concatenate {sa} with {sb}")));
    }
    let (span_a, span_b) = (sa.c * sa.plane(), sb.c * sb.plane());
    let mut data = Vec::with_capacity(a.data().len() + b.data().len());
    for n in 0..sa.n {
        data.extend_from_slice(&a.data()[n * span_a..(n + 1) * span_a]);
        data.extend_from_slice(&b.data()[n * span_b..(n + 1) * span_b]);
    }
    Tensor::new(Shape::new(sa.n, sa.c + sb.c, sa.h, sa.w), data)
}

/// Splits a channel-concatenated gradient back into its two parts.
pub(crate) fn split_channels<E: Element>(g: &Tensor<E>, ca: usize) -> (Tensor<E>, Tensor<E>) {
    let s = g.shape();
    let cb = s.c - ca;
    let plane = s.plane();
    let mut da = Vec::with_capacity(s.n * ca * plane);
    let mut db = Vec::with_capacity(s.n * cb * plane);
    for item in g.data().chunks(s.c * plane) {
        da.extend_from_slice(&item[..ca * plane]);
        db.extend_from_slice(&item[ca * plane..]);
    }
    (
        Tensor::new(Shape::new(s.n, ca, s.h, s.w), da).expect("split shape"),
        Tensor::new(Shape::new(s.n, cb, s.h, s.w), db).expect("split shape"),
    )
}
