use crate::error::{Error, Result};
use crate::spectral::{RgbImage, SpectralCube, BANDS};

/// Fewest pixels a fit accepts.
pub const MIN_FIT_PIXELS: usize = 32;

/// Per-pixel affine map `band_k = w_k · (r, g, b) + c_k`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearBaseline {
    /// Rows are bands; columns are the R, G, B weights then the offset.
    pub coefficients: [[f64; 4]; BANDS],
}

impl LinearBaseline {
    pub fn predict(&self, rgb: &RgbImage) -> SpectralCube {
        let n = rgb.plane_len();
        let planes = [rgb.plane(0), rgb.plane(1), rgb.plane(2)];
        let mut data = Vec::with_capacity(BANDS * n);
        for row in &self.coefficients {
            data.extend((0..n).map(|p| {
                let v = row[0] * planes[0][p] as f64 + row[1] * planes[1][p] as f64 + row[2] * planes[2][p] as f64 + row[3];
                v as f32
            }));
        }
        SpectralCube::clamped(rgb.height(), rgb.width(), data).expect("one value per band and pixel")
    }

    /// Sum of squared errors before clamping, for least-squares checks.
    pub fn squared_residual(&self, rgb: &RgbImage, cube: &SpectralCube) -> f64 {
        let n = rgb.plane_len();
        let mut sse = 0.0;
        for (k, row) in self.coefficients.iter().enumerate() {
            for p in 0..n {
                let x = [rgb.plane(0)[p], rgb.plane(1)[p], rgb.plane(2)[p]].map(|v| v as f64);
                let v = row[0] * x[0] + row[1] * x[1] + row[2] * x[2] + row[3];
                sse += (v - cube.plane(k)[p] as f64).powi(2);
            }
        }
        sse
    }
}

/// Solves `a · x = b` for symmetric positive semi-definite `a` by Gaussian
/// elimination with partial pivoting. Returns None when a pivot falls below
/// `1e-12` of the largest diagonal entry.
fn solve4(mut a: [[f64; 4]; 4], mut b: [[f64; BANDS]; 4]) -> Option<[[f64; BANDS]; 4]> {
    let scale = (0..4).map(|i| a[i][i].abs()).fold(0.0, f64::max);
    if scale == 0.0 {
        return None;
    }
    for col in 0..4 {
        let pivot = (col..4).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() <= 1e-12 * scale {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..4 {
            let f = a[row][col] / a[col][col];
            for c in col..4 {
                a[row][c] -= f * a[col][c];
            }
            for k in 0..BANDS {
                b[row][k] -= f * b[col][k];
            }
        }
    }
    let mut x = [[0.0; BANDS]; 4];
    for row in (0..4).rev() {
        for k in 0..BANDS {
            let tail: f64 = (row + 1..4).map(|c| a[row][c] * x[c][k]).sum();
            x[row][k] = (b[row][k] - tail) / a[row][row];
        }
    }
    Some(x)
}

/// Least-squares affine regression from RGB to all bands via the normal
/// equations. `ridge` is added to the diagonal of the three colour weights.
pub fn linear_baseline_fit(pairs: &[(RgbImage, SpectralCube)], ridge: f64) -> Result<LinearBaseline> {
    let mut gram = [[0.0f64; 4]; 4];
    let mut cross = [[0.0f64; BANDS]; 4];
    let mut pixels = 0;
    for (rgb, cube) in pairs {
        if !(rgb.height() == cube.height() && rgb.width() == cube.width()) {
            return Err(Error::shape("baseline fit pairs must share height and width"));
        }
        let n = rgb.plane_len();
        pixels += n;
        for p in 0..n {
            let x = [rgb.plane(0)[p] as f64, rgb.plane(1)[p] as f64, rgb.plane(2)[p] as f64, 1.0];
            for i in 0..4 {
                for j in 0..4 {
                    gram[i][j] += x[i] * x[j];
                }
                for k in 0..BANDS {
                    cross[i][k] += x[i] * cube.plane(k)[p] as f64;
                }
            }
        }
    }
    if pixels < MIN_FIT_PIXELS {
        return Err(Error::config(format!(
            "linear baseline needs at least {MIN_FIT_PIXELS} pixels, got {pixels}"
        )));
    }
    for (i, row) in gram.iter_mut().enumerate().take(3) {
        row[i] += ridge;
    }
    let solution = solve4(gram, cross).ok_or_else(|| {
        Error::config("RGB design matrix is rank deficient; refit with ridge regularisation such as 1e-6")
    })?;
    let mut coefficients = [[0.0; 4]; BANDS];
    for (k, row) in coefficients.iter_mut().enumerate() {
        for i in 0..4 {
            row[i] = solution[i][k];
        }
    }
    Ok(LinearBaseline { coefficients })
}
