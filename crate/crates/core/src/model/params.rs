use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::arch::{ArchConfig, LEVELS};
use crate::error::{Error, Result};
use crate::tensor::{Element, Graph, Shape, Tensor, Var};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LayerKind {
    /// Square, odd kernel.
    Conv { kernel: usize },
    Linear,
}

/// One weighted layer of the network. Owns `<name>.weight` and `<name>.bias`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LayerSpec {
    pub name: String,
    pub kind: LayerKind,
    pub in_channels: usize,
    pub out_channels: usize,
    /// Resolution level the layer runs at.
    pub level: usize,
}

impl LayerSpec {
    pub fn weight_shape(&self) -> Shape {
        let k = match self.kind {
            LayerKind::Conv { kernel } => kernel,
            LayerKind::Linear => 1,
        };
        Shape::new(self.out_channels, self.in_channels, k, k)
    }

    pub fn bias_shape(&self) -> Shape {
        Shape::new(self.out_channels, 1, 1, 1)
    }

    pub fn param_count(&self) -> usize {
        self.weight_shape().len() + self.out_channels
    }

    fn fans(&self) -> (usize, usize) {
        let s = self.weight_shape();
        let taps = s.h * s.w;
        (s.c * taps, s.n * taps)
    }
}

fn conv(name: String, level: usize, kernel: usize, in_channels: usize, out_channels: usize) -> LayerSpec {
    LayerSpec {
        name,
        kind: LayerKind::Conv { kernel },
        in_channels,
        out_channels,
        level,
    }
}

/// Layers of a residual dense block of width `width`.
pub fn res_dense_layers(prefix: &str, level: usize, width: usize, growth: usize) -> Vec<LayerSpec> {
    (0..5)
        .map(|i| {
            let out = if i == 4 { width } else { growth };
            conv(format!("{prefix}.conv{i}"), level, 3, width + i * growth, out)
        })
        .collect()
}

/// Layers of a residual global block of width `width`.
pub fn res_global_layers(prefix: &str, level: usize, width: usize, hidden: usize) -> Vec<LayerSpec> {
    let linear = |i: usize, inc, outc| LayerSpec {
        name: format!("{prefix}.fc{i}"),
        kind: LayerKind::Linear,
        in_channels: inc,
        out_channels: outc,
        level,
    };
    vec![
        conv(format!("{prefix}.conv0"), level, 3, width, width),
        conv(format!("{prefix}.conv1"), level, 3, width, width),
        linear(0, width, hidden),
        linear(1, hidden, width),
    ]
}

/// Every weighted layer in evaluation order (bottom level first).
pub fn layers(arch: &ArchConfig) -> Vec<LayerSpec> {
    let mut out = Vec::new();
    for level in (0..LEVELS).rev() {
        let width = arch.level_width(level);
        let p = format!("level{level}");
        out.push(conv(format!("{p}.head"), level, 3, arch.in_channels << (2 * level), width));
        if level + 1 < LEVELS {
            let below = arch.level_width(level + 1) / 4;
            out.push(conv(format!("{p}.fuse"), level, 3, width + below, width));
        }
        let blocks = arch.blocks_per_level[level];
        for i in 0..blocks.resdb.max(blocks.resgb) {
            if i < blocks.resdb {
                out.extend(res_dense_layers(&format!("{p}.resdb{i}"), level, width, arch.growth_rate(width)));
            }
            if i < blocks.resgb {
                out.extend(res_global_layers(&format!("{p}.resgb{i}"), level, width, arch.attention_width(width)));
            }
        }
        if level == LEVELS - 1 {
            out.push(conv(format!("{p}.tone"), level, 1, width, width));
        }
        if level == 0 {
            out.push(conv(format!("{p}.tail"), level, 3, width, arch.out_channels));
        }
    }
    out
}

/// Named parameter tensors of one network instance.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams<E> {
    pub arch: ArchConfig,
    pub seed: u64,
    pub tensors: BTreeMap<String, Tensor<E>>,
}

impl<E: Element> ModelParams<E> {
    /// Xavier-uniform weights, zero biases.
    pub fn init(arch: &ArchConfig, seed: u64) -> Result<Self> {
        arch.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut tensors = BTreeMap::new();
        for layer in layers(arch) {
            let (fan_in, fan_out) = layer.fans();
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let w = Tensor::uniform(layer.weight_shape(), -bound, bound, &mut rng);
            tensors.insert(format!("{}.weight", layer.name), w);
            tensors.insert(format!("{}.bias", layer.name), Tensor::zeros(layer.bias_shape()));
        }
        Ok(Self {
            arch: arch.clone(),
            seed,
            tensors,
        })
    }

    /// Same layout with every value set to zero.
    pub fn zeros(arch: &ArchConfig) -> Result<Self> {
        let mut p = Self::init(arch, 0)?;
        for t in p.tensors.values_mut() {
            t.data_mut().fill(E::zero());
        }
        Ok(p)
    }

    pub fn get(&self, name: &str) -> Result<&Tensor<E>> {
        self.tensors
            .get(name)
            .ok_or_else(|| Error::config(format!("missing parameter {name}")))
    }

    pub fn get_mut(&mut self, name: &str) -> Result<&mut Tensor<E>> {
        self.tensors
            .get_mut(name)
            .ok_or_else(|| Error::config(format!("missing parameter {name}")))
    }

    pub fn param_count(&self) -> usize {
        self.tensors.values().map(|t| t.data().len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.values().all(Tensor::is_finite)
    }

    /// Checks that names and shapes are exactly those implied by `arch`.
    pub fn check_layout(&self) -> Result<()> {
        let mut expected = 0;
        for layer in layers(&self.arch) {
            for (suffix, shape) in [("weight", layer.weight_shape()), ("bias", layer.bias_shape())] {
                let name = format!("{}.{suffix}", layer.name);
                let t = self.get(&name)?;
                if t.shape() != shape {
                    return Err(Error::config(format!(
                        "parameter {name} has shape {} but the architecture needs {shape}",
                        t.shape()
                    )));
                }
                expected += 1;
            }
        }
        if expected != self.tensors.len() {
            return Err(Error::config(format!(
                "{} parameters present but the architecture defines {expected}",
                self.tensors.len()
            )));
        }
        Ok(())
    }

    pub fn cast<F: Element>(&self) -> ModelParams<F> {
        ModelParams {
            arch: self.arch.clone(),
            seed: self.seed,
            tensors: self.tensors.iter().map(|(k, v)| (k.clone(), v.cast())).collect(),
        }
    }

    /// Parameter values for an [`Eager`](crate::tensor::Eager) forward pass.
    pub fn bind_eager(&self) -> HashMap<String, Arc<Tensor<E>>> {
        self.tensors
            .iter()
            .map(|(k, v)| (k.clone(), Arc::new(v.clone())))
            .collect()
    }

    /// Inserts every parameter as a leaf of `graph`.
    pub fn bind_graph(&self, graph: &mut Graph<E>, requires_grad: bool) -> HashMap<String, Var> {
        self.tensors
            .iter()
            .map(|(k, v)| (k.clone(), graph.leaf(v.clone(), requires_grad)))
            .collect()
    }
}
