//! "HRCK" checkpoint container. All integers and floats are little-endian.
//!
//! ```text
//! offset  size  field
//! 0       4     magic "HRCK"
//! 4       4     u32 format version (1)
//! 8       4     u32 base_width
//! 12      4     u32 width divisor (1, 2, 4 or 8)
//! 16      4     u32 level count (4)
//! 20      32    4 × (u32 resdb, u32 resgb), top level first
//! 52      4     u32 growth_divisor
//! 56      4     u32 attention_reduction
//! 60      8     f64 leaky_slope
//! 68      4     u32 in_channels
//! 72      4     u32 out_channels
//! 76      8     u64 init seed
//! 84      4     u32 parameter record count
//! 88      ...   records, sorted by path:
//!                 u32 path length, UTF-8 path,
//!                 4 × u32 shape (N, C, H, W),
//!                 N·C·H·W × f32 values
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use super::arch::{ArchConfig, BlockCount, WidthScale, LEVELS};
use super::params::{layers, ModelParams};
use crate::binio::{self, put_f32s, put_u32, ByteReader};
use crate::error::{Error, Result};
use crate::tensor::{Element, Shape, Tensor};

pub const MAGIC: &[u8; 4] = b"HRCK";
pub const VERSION: u32 = 1;

/// Bytes before the first parameter record.
pub const HEADER_LEN: usize = 88;

fn put_arch(out: &mut Vec<u8>, arch: &ArchConfig) {
    put_u32(out, arch.base_width as u32);
    put_u32(out, arch.width_scale.divisor());
    put_u32(out, LEVELS as u32);
    for b in arch.blocks_per_level {
        put_u32(out, b.resdb as u32);
        put_u32(out, b.resgb as u32);
    }
    put_u32(out, arch.growth_divisor as u32);
    put_u32(out, arch.attention_reduction as u32);
    out.extend_from_slice(&arch.leaky_slope.to_le_bytes());
    put_u32(out, arch.in_channels as u32);
    put_u32(out, arch.out_channels as u32);
}

fn read_arch(r: &mut ByteReader<'_>) -> Result<ArchConfig> {
    let base_width = r.u32()? as usize;
    let at = r.offset();
    let width_scale = WidthScale::from_divisor(r.u32()?).map_err(|e| Error::format(at, e.to_string()))?;
    let at = r.offset();
    let levels = r.u32()?;
    if levels as usize != LEVELS {
        return Err(Error::format(at, format!("expected {LEVELS} levels, found {levels}")));
    }
    let mut blocks_per_level = [BlockCount::pairs(0); LEVELS];
    for b in &mut blocks_per_level {
        b.resdb = r.u32()? as usize;
        b.resgb = r.u32()? as usize;
    }
    Ok(ArchConfig {
        base_width,
        width_scale,
        blocks_per_level,
        growth_divisor: r.u32()? as usize,
        attention_reduction: r.u32()? as usize,
        leaky_slope: r.f64()?,
        in_channels: r.u32()? as usize,
        out_channels: r.u32()? as usize,
    })
}

/// Serializes parameters; values are stored as f32.
pub fn encode<E: Element>(params: &ModelParams<E>) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * params.param_count());
    out.extend_from_slice(MAGIC);
    put_u32(&mut out, VERSION);
    put_arch(&mut out, &params.arch);
    out.extend_from_slice(&params.seed.to_le_bytes());
    put_u32(&mut out, params.tensors.len() as u32);
    for (path, t) in &params.tensors {
        put_u32(&mut out, path.len() as u32);
        out.extend_from_slice(path.as_bytes());
        for d in t.shape().dims() {
            put_u32(&mut out, d as u32);
        }
        put_f32s(&mut out, t.data().iter().map(|v| v.to_f32().unwrap_or(f32::NAN)));
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<ModelParams<f32>> {
    let mut r = ByteReader::new(bytes);
    r.magic(MAGIC)?;
    let at = r.offset();
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::format(at, format!("unsupported checkpoint version {version}")));
    }
    let arch = read_arch(&mut r)?;
    let seed = r.u64()?;
    let count = r.u32()? as usize;
    let mut tensors = BTreeMap::new();
    for _ in 0..count {
        let len = r.u32()? as usize;
        let at = r.offset();
        let path = std::str::from_utf8(r.take(len)?)
            .map_err(|_| Error::format(at, "parameter path is not UTF-8"))?
            .to_owned();
        let dims = [r.u32()?, r.u32()?, r.u32()?, r.u32()?].map(|d| d as usize);
        let shape = Shape::from(dims);
        let values = r.f32s(shape.len())?;
        tensors.insert(path, Tensor::new(shape, values)?);
    }
    r.finish()?;
    let params = ModelParams { arch, seed, tensors };
    params.arch.validate()?;
    params.check_layout()?;
    Ok(params)
}

/// Exact size of the encoding of any parameter set for `arch`.
pub fn encoded_len(arch: &ArchConfig) -> usize {
    layers(arch)
        .iter()
        .map(|l| {
            let record = |suffix: &str, values: usize| 4 + l.name.len() + 1 + suffix.len() + 16 + 4 * values;
            record("weight", l.weight_shape().len()) + record("bias", l.out_channels)
        })
        .sum::<usize>()
        + HEADER_LEN
}

pub fn save<E: Element>(params: &ModelParams<E>, path: &Path) -> Result<()> {
    binio::write_file(path, &encode(params))
}

pub fn load(path: &Path) -> Result<ModelParams<f32>> {
    decode(&binio::read_file(path)?)
}
