//! Spectral cubes, the camera response that renders them to RGB, simulated
//! acquisition degradations, a synthetic scene generator and file formats.

pub mod dataset;
mod degrade;
pub mod io;
mod synth;

#[cfg(test)]
mod tests;

use rand::Rng;

use crate::error::{Error, Result};
use crate::tensor::{Element, Shape, Tensor};

pub use dataset::{Dataset, Track};
pub use degrade::{degrade_real_world, DegradeConfig};
pub use synth::{gen_synthetic_scene, MIN_SCENE_SIZE};

/// Number of spectral bands.
pub const BANDS: usize = 31;
/// Centre of the first band in nanometres.
pub const FIRST_BAND_NM: f64 = 400.0;
/// Spacing between band centres in nanometres.
pub const BAND_STEP_NM: f64 = 10.0;

pub fn band_center(k: usize) -> f64 {
    FIRST_BAND_NM + BAND_STEP_NM * k as f64
}

pub fn band_centers() -> [f64; BANDS] {
    std::array::from_fn(band_center)
}

/// Planar image with a fixed channel count and values in `[0, 1]`, stored
/// channel-major (`data[c·H·W + y·W + x]`).
#[derive(Clone, Debug, PartialEq)]
pub struct Planar<const C: usize> {
    height: usize,
    width: usize,
    data: Vec<f32>,
}

/// H×W×31 radiance cube, band-major.
pub type SpectralCube = Planar<BANDS>;
/// H×W RGB image, channel-major.
pub type RgbImage = Planar<3>;

impl<const C: usize> Planar<C> {
    pub const CHANNELS: usize = C;

    /// Checks the length and that every value is finite and in `[0, 1]`.
    pub fn new(height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != C * height * width {
            return Err(Error::shape(format!(
                "{C}×{height}×{width} image needs {} values, got {}",
                C * height * width,
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::config(format!("value {} at index {i} is outside [0, 1]", data[i])));
        }
        Ok(Self { height, width, data })
    }

    /// Like [`Planar::new`] but clamps into `[0, 1]`; NaN becomes 0.
    pub fn clamped(height: usize, width: usize, mut data: Vec<f32>) -> Result<Self> {
        for v in &mut data {
            *v = if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
        }
        Self::new(height, width, data)
    }

    pub fn filled(height: usize, width: usize, value: f32) -> Result<Self> {
        Self::new(height, width, vec![value; C * height * width])
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        C
    }

    pub fn plane_len(&self) -> usize {
        self.height * self.width
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn plane(&self, c: usize) -> &[f32] {
        let n = self.plane_len();
        &self.data[c * n..(c + 1) * n]
    }

    pub fn at(&self, c: usize, y: usize, x: usize) -> f32 {
        self.data[(c * self.height + y) * self.width + x]
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.height == other.height && self.width == other.width
    }

    pub fn crop(&self, top: usize, left: usize, height: usize, width: usize) -> Result<Self> {
        if top + height > self.height || left + width > self.width {
            return Err(Error::shape(format!(
                "crop {height}×{width} at ({top}, {left}) exceeds {}×{}",
                self.height, self.width
            )));
        }
        let mut data = Vec::with_capacity(C * height * width);
        for c in 0..C {
            for y in top..top + height {
                let row = (c * self.height + y) * self.width;
                data.extend_from_slice(&self.data[row + left..row + left + width]);
            }
        }
        Ok(Self { height, width, data })
    }

    /// 1×C×H×W tensor.
    pub fn to_tensor<E: Element>(&self) -> Tensor<E> {
        let data = self.data.iter().map(|&v| E::of(v as f64)).collect();
        Tensor::new(Shape::new(1, C, self.height, self.width), data).expect("length checked on construction")
    }

    /// Batch item `n` of an N×C×H×W tensor, clamped into `[0, 1]`.
    pub fn from_tensor<E: Element>(t: &Tensor<E>, n: usize) -> Result<Self> {
        let s = t.shape();
        if s.c != C || n >= s.n {
            return Err(Error::shape(format!("cannot take a {C}-channel image at batch {n} from {s}")));
        }
        let item = t.batch_item(n);
        let data = item.data().iter().map(|v| v.to_f32().unwrap_or(f32::NAN)).collect();
        Self::clamped(s.h, s.w, data)
    }
}

/// Linear map from 31 bands to R, G, B: `matrix[band][channel]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ResponseFunction {
    matrix: [[f64; 3]; BANDS],
}

impl ResponseFunction {
    /// Any finite matrix. Use [`ResponseFunction::validate`] to additionally
    /// require positive column sums.
    pub fn new(matrix: [[f64; 3]; BANDS]) -> Result<Self> {
        if matrix.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::config("response function has non-finite entries"));
        }
        Ok(Self { matrix })
    }

    pub fn matrix(&self) -> &[[f64; 3]; BANDS] {
        &self.matrix
    }

    pub fn column_sums(&self) -> [f64; 3] {
        let mut s = [0.0; 3];
        for row in &self.matrix {
            for c in 0..3 {
                s[c] += row[c];
            }
        }
        s
    }

    /// Every channel must respond to some light.
    pub fn validate(&self) -> Result<()> {
        let sums = self.column_sums();
        if sums.iter().any(|&s| s <= 0.0) {
            return Err(Error::config(format!("response column sums must be positive, got {sums:?}")));
        }
        Ok(())
    }
}

/// Gaussian sensitivities peaking at 610, 540 and 470 nm, each column
/// normalised to sum to one.
pub fn default_response() -> ResponseFunction {
    const PEAKS: [f64; 3] = [610.0, 540.0, 470.0];
    const WIDTH_NM: f64 = 40.0;
    let mut matrix = [[0.0; 3]; BANDS];
    for (k, row) in matrix.iter_mut().enumerate() {
        for (c, &peak) in PEAKS.iter().enumerate() {
            let d = (band_center(k) - peak) / WIDTH_NM;
            row[c] = (-0.5 * d * d).exp();
        }
    }
    let sums = ResponseFunction { matrix }.column_sums();
    for row in &mut matrix {
        for c in 0..3 {
            row[c] /= sums[c];
        }
    }
    ResponseFunction { matrix }
}

/// Rendered RGB before clamping, channel-major, in 64-bit.
pub fn render_unclamped(cube: &SpectralCube, resp: &ResponseFunction) -> Vec<f64> {
    let n = cube.plane_len();
    let mut out = vec![0.0; 3 * n];
    for (k, row) in resp.matrix.iter().enumerate() {
        let band = cube.plane(k);
        for c in 0..3 {
            let weight = row[c];
            let dst = &mut out[c * n..(c + 1) * n];
            for (d, &v) in dst.iter_mut().zip(band) {
                *d += v as f64 * weight;
            }
        }
    }
    out
}

/// Per pixel `rgb[c] = Σ_k cube[k] · resp[k][c]`, clamped to `[0, 1]`.
pub fn render_rgb(cube: &SpectralCube, resp: &ResponseFunction) -> RgbImage {
    let data = render_unclamped(cube, resp).into_iter().map(|v| v as f32).collect();
    RgbImage::clamped(cube.height(), cube.width(), data).expect("render preserves the pixel count")
}

/// Random aligned crop of an RGB/cube pair. The corner is uniform over all
/// valid positions.
pub fn sample_patch(
    rgb: &RgbImage,
    cube: &SpectralCube,
    size: usize,
    rng: &mut impl Rng,
) -> Result<(RgbImage, SpectralCube)> {
    if rgb.height() != cube.height() || rgb.width() != cube.width() {
        return Err(Error::shape(format!(
            "RGB {}×{} does not match cube {}×{}",
            rgb.height(),
            rgb.width(),
            cube.height(),
            cube.width()
        )));
    }
    if size == 0 || size % 8 != 0 || size > rgb.height().min(rgb.width()) {
        return Err(Error::shape(format!(
            "patch size {size} must be a positive multiple of 8 no larger than {}×{}",
            rgb.height(),
            rgb.width()
        )));
    }
    let top = rng.random_range(0..=rgb.height() - size);
    let left = rng.random_range(0..=rgb.width() - size);
    Ok((rgb.crop(top, left, size, size)?, cube.crop(top, left, size, size)?))
}
