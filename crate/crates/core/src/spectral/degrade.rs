use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::RgbImage;
use crate::error::{Error, Result};

/// Simulated camera pipeline for the real-world track.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DegradeConfig {
    /// Standard deviation of additive Gaussian noise, in normalised units.
    pub noise_sigma: f64,
    /// Bayer RGGB subsampling followed by bilinear demosaicking.
    pub mosaic: bool,
    pub quantize_bits: Option<u32>,
}

impl Default for DegradeConfig {
    fn default() -> Self {
        Self {
            noise_sigma: 0.01,
            mosaic: true,
            quantize_bits: Some(8),
        }
    }
}

impl DegradeConfig {
    /// Leaves images untouched.
    pub fn identity() -> Self {
        Self {
            noise_sigma: 0.0,
            mosaic: false,
            quantize_bits: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.noise_sigma.is_finite() || self.noise_sigma < 0.0 {
            return Err(Error::config(format!("noise_sigma {} must be finite and >= 0", self.noise_sigma)));
        }
        if let Some(b) = self.quantize_bits {
            if !(8..=16).contains(&b) {
                return Err(Error::config(format!("quantize_bits {b} must lie in 8..=16")));
            }
        }
        Ok(())
    }
}

/// Bayer RGGB colour of pixel (y, x): 0 = R, 1 = G, 2 = B.
fn bayer_channel(y: usize, x: usize) -> usize {
    match (y % 2, x % 2) {
        (0, 0) => 0,
        (1, 1) => 2,
        _ => 1,
    }
}

const GREEN_KERNEL: [[f64; 3]; 3] = [[0.0, 1.0, 0.0], [1.0, 4.0, 1.0], [0.0, 1.0, 0.0]];
const RED_BLUE_KERNEL: [[f64; 3]; 3] = [[1.0, 2.0, 1.0], [2.0, 4.0, 2.0], [1.0, 2.0, 1.0]];

/// Keeps one colour per pixel on an RGGB grid, then fills the gaps by
/// normalised convolution: each missing value is the kernel-weighted mean of
/// the same-colour samples in its 3×3 neighbourhood. Sampled values pass
/// through unchanged and a constant field is reproduced exactly.
fn mosaic_demosaic(h: usize, w: usize, data: &[f64]) -> Vec<f64> {
    let n = h * w;
    let mut out = vec![0.0; 3 * n];
    for c in 0..3 {
        let kernel = if c == 1 { &GREEN_KERNEL } else { &RED_BLUE_KERNEL };
        let plane = &data[c * n..(c + 1) * n];
        for y in 0..h {
            for x in 0..w {
                let (mut num, mut den) = (0.0, 0.0);
                for (dy, krow) in kernel.iter().enumerate() {
                    let Some(sy) = (y + dy).checked_sub(1).filter(|&v| v < h) else { continue };
                    for (dx, &k) in krow.iter().enumerate() {
                        let Some(sx) = (x + dx).checked_sub(1).filter(|&v| v < w) else { continue };
                        if k != 0.0 && bayer_channel(sy, sx) == c {
                            num += k * plane[sy * w + sx];
                            den += k;
                        }
                    }
                }
                out[c * n + y * w + x] = if den > 0.0 { num / den } else { 0.0 };
            }
        }
    }
    out
}

/// Mosaic/demosaic, additive noise, clamp to `[0, 1]`, then quantisation,
/// each stage as enabled by `cfg`. Deterministic per seed.
pub fn degrade_real_world(rgb: &RgbImage, cfg: &DegradeConfig, seed: u64) -> Result<RgbImage> {
    cfg.validate()?;
    let (h, w) = (rgb.height(), rgb.width());
    let mut data: Vec<f64> = rgb.data().iter().map(|&v| v as f64).collect();
    if cfg.mosaic {
        data = mosaic_demosaic(h, w, &data);
    }
    if cfg.noise_sigma > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, cfg.noise_sigma).map_err(|e| Error::config(e.to_string()))?;
        for v in &mut data {
            *v += normal.sample(&mut rng);
        }
    }
    for v in &mut data {
        *v = v.clamp(0.0, 1.0);
    }
    if let Some(bits) = cfg.quantize_bits {
        let levels = ((1u32 << bits) - 1) as f64;
        for v in &mut data {
            *v = (*v * levels).round() / levels;
        }
    }
    RgbImage::new(h, w, data.into_iter().map(|v| v as f32).collect())
}
