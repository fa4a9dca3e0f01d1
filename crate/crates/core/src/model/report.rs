use super::arch::{ArchConfig, LEVELS};
use super::checkpoint;
use super::params::{layers, LayerKind};

/// Native frame size of the reference dataset.
pub const REPORT_HEIGHT: usize = 482;
pub const REPORT_WIDTH: usize = 512;

/// Analytic cost of one network instance.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ModelReport {
    /// Multiply-accumulates for one 482×512 frame, reflect-padded to the
    /// next multiple of 8 as inference does.
    pub macs: u64,
    pub params: u64,
    /// Size of the "HRCK" checkpoint: 4 bytes per parameter plus headers.
    pub weights_bytes: u64,
}

fn padded(v: usize) -> usize {
    let f = 1 << (LEVELS - 1);
    v.div_ceil(f) * f
}

pub fn model_report(arch: &ArchConfig) -> ModelReport {
    let (h, w) = (padded(REPORT_HEIGHT), padded(REPORT_WIDTH));
    let mut macs = 0u64;
    let mut params = 0u64;
    for layer in layers(arch) {
        params += layer.param_count() as u64;
        let per_position = (layer.weight_shape().len()) as u64;
        macs += match layer.kind {
            LayerKind::Conv { .. } => per_position * ((h >> layer.level) * (w >> layer.level)) as u64,
            LayerKind::Linear => per_position,
        };
    }
    ModelReport {
        macs,
        params,
        weights_bytes: checkpoint::encoded_len(arch) as u64,
    }
}
