use std::collections::HashMap;

use super::arch::{ArchConfig, LEVELS};
use super::params::ModelParams;
use crate::error::{Error, Result};
use crate::spectral::{RgbImage, SpectralCube};
use crate::tensor::{Activation, Backend, Combine, Eager, Element, Padding, Tensor};

/// Parameter values bound to a backend, keyed by parameter path.
pub type ParamMap<V> = HashMap<String, V>;

fn param<'a, V>(params: &'a ParamMap<V>, name: &str) -> Result<&'a V> {
    params
        .get(name)
        .ok_or_else(|| Error::config(format!("missing parameter {name}")))
}

fn conv_layer<E: Element, B: Backend<E>>(
    b: &mut B,
    params: &ParamMap<B::Value>,
    name: &str,
    x: &B::Value,
    act: Activation,
) -> Result<B::Value> {
    let w = param(params, &format!("{name}.weight"))?;
    let bias = param(params, &format!("{name}.bias"))?;
    let y = b.conv2d(x, w, bias, 1, Padding::Reflect)?;
    Ok(b.activation(&y, act))
}

/// Five densely connected 3×3 convolutions plus an identity shortcut.
///
/// Conv `i` sees the channel concatenation of the block input and every
/// earlier conv output. The last conv maps back to the input width with no
/// activation and is added to the input.
pub fn res_dense_block<E: Element, B: Backend<E>>(
    b: &mut B,
    params: &ParamMap<B::Value>,
    prefix: &str,
    x: &B::Value,
    slope: f64,
) -> Result<B::Value> {
    let mut features = x.clone();
    for i in 0..4 {
        let y = conv_layer(b, params, &format!("{prefix}.conv{i}"), &features, Activation::LeakyRelu(slope))?;
        features = b.combine(&features, &y, Combine::ConcatChannels)?;
    }
    let y = conv_layer(b, params, &format!("{prefix}.conv4"), &features, Activation::Identity)?;
    b.combine(x, &y, Combine::Add)
}

/// Two-conv trunk rescaled per channel by attention computed from its global
/// average, plus an identity shortcut.
pub fn res_global_block<E: Element, B: Backend<E>>(
    b: &mut B,
    params: &ParamMap<B::Value>,
    prefix: &str,
    x: &B::Value,
    slope: f64,
) -> Result<B::Value> {
    let act = Activation::LeakyRelu(slope);
    let t = conv_layer(b, params, &format!("{prefix}.conv0"), x, act)?;
    let trunk = conv_layer(b, params, &format!("{prefix}.conv1"), &t, act)?;
    let pooled = b.global_avg_pool(&trunk);
    let h = b.linear(
        &pooled,
        param(params, &format!("{prefix}.fc0.weight"))?,
        param(params, &format!("{prefix}.fc0.bias"))?,
    )?;
    let h = b.activation(&h, act);
    let a = b.linear(
        &h,
        param(params, &format!("{prefix}.fc1.weight"))?,
        param(params, &format!("{prefix}.fc1.bias"))?,
    )?;
    let attention = b.activation(&a, Activation::Sigmoid);
    let scaled = b.combine(&trunk, &attention, Combine::Mul)?;
    b.combine(x, &scaled, Combine::Add)
}

/// Full network: RGB N×3×H×W to spectra N×31×H×W. H and W must be divisible by 8.
pub fn forward<E: Element, B: Backend<E>>(
    b: &mut B,
    arch: &ArchConfig,
    params: &ParamMap<B::Value>,
    rgb: &B::Value,
) -> Result<B::Value> {
    let s = b.shape_of(rgb);
    let factor = 1 << (LEVELS - 1);
    if s.h % factor != 0 || s.w % factor != 0 {
        return Err(Error::shape(format!(
            "input {s} must have height and width divisible by {factor}"
        )));
    }
    if s.c != arch.in_channels {
        return Err(Error::shape(format!(
            "input {s} must have {} channels",
            arch.in_channels
        )));
    }
    let slope = arch.leaky_slope;
    let act = Activation::LeakyRelu(slope);
    let mut below: Option<B::Value> = None;
    for level in (0..LEVELS).rev() {
        let p = format!("level{level}");
        let input = if level == 0 {
            rgb.clone()
        } else {
            b.pixel_unshuffle(rgb, 1 << level)?
        };
        let mut x = conv_layer(b, params, &format!("{p}.head"), &input, act)?;
        if let Some(deeper) = below.take() {
            let up = b.pixel_shuffle(&deeper, 2)?;
            let cat = b.combine(&x, &up, Combine::ConcatChannels)?;
            x = conv_layer(b, params, &format!("{p}.fuse"), &cat, act)?;
        }
        let blocks = arch.blocks_per_level[level];
        for i in 0..blocks.resdb.max(blocks.resgb) {
            if i < blocks.resdb {
                x = res_dense_block(b, params, &format!("{p}.resdb{i}"), &x, slope)?;
            }
            if i < blocks.resgb {
                x = res_global_block(b, params, &format!("{p}.resgb{i}"), &x, slope)?;
            }
        }
        if level == LEVELS - 1 {
            x = conv_layer(b, params, &format!("{p}.tone"), &x, act)?;
        }
        below = Some(x);
    }
    let top = below.expect("at least one level");
    conv_layer(b, params, "level0.tail", &top, Activation::Identity)
}

/// Inference without gradient recording.
pub fn hrnet_forward<E: Element>(rgb: &Tensor<E>, params: &ModelParams<E>) -> Result<Tensor<E>> {
    params.check_layout()?;
    let mut eager = Eager::new();
    let bound = params.bind_eager();
    let out = forward(&mut eager, &params.arch, &bound, &rgb.clone().into())?;
    drop(bound);
    Ok(std::sync::Arc::try_unwrap(out).unwrap_or_else(|shared| (*shared).clone()))
}

/// Cube for an RGB image of any size: the input is reflect-padded on the
/// bottom and right to a multiple of 8, and the output is cropped back and
/// clamped to `[0, 1]`.
pub fn reconstruct(params: &ModelParams<f32>, rgb: &RgbImage) -> Result<SpectralCube> {
    let factor = 1 << (LEVELS - 1);
    let (h, w) = (rgb.height(), rgb.width());
    let (ph, pw) = (h.div_ceil(factor) * factor, w.div_ceil(factor) * factor);
    let input = rgb.to_tensor::<f32>();
    let input = if (ph, pw) == (h, w) { input } else { input.reflect_pad_to(ph, pw)? };
    let out = hrnet_forward(&input, params)?;
    SpectralCube::from_tensor(&out.crop(h, w)?, 0)
}
