use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{band_center, SpectralCube, BANDS};
use crate::error::{Error, Result};

/// Smallest scene side the generator accepts.
pub const MIN_SCENE_SIZE: usize = 16;

struct Region {
    site: (f64, f64),
    spectrum: [f64; BANDS],
    /// Shading is `base + gy·(y − site.y) + gx·(x − site.x)` in pixels.
    shade_base: f64,
    shade_grad: (f64, f64),
}

fn random_spectrum(rng: &mut impl Rng) -> [f64; BANDS] {
    let peaks: Vec<(f64, f64, f64)> = (0..rng.random_range(2..=4))
        .map(|_| {
            (
                rng.random_range(0.2..1.0),
                rng.random_range(400.0..700.0),
                rng.random_range(20.0..80.0),
            )
        })
        .collect();
    let offset = rng.random_range(0.05..0.3);
    // Kept within ±offset at the band edges so the ramp never goes negative.
    let tilt = rng.random_range(-1.0..1.0) * offset;
    std::array::from_fn(|k| {
        let nm = band_center(k);
        let bumps: f64 = peaks
            .iter()
            .map(|&(a, mu, sigma)| a * (-0.5 * ((nm - mu) / sigma).powi(2)).exp())
            .sum();
        bumps + offset + tilt * (nm - 550.0) / 150.0
    })
}

/// Piecewise-smooth scene: 5 to 20 Voronoi regions, each with its own
/// spectrum (2 to 4 Gaussian bumps over wavelength plus a linear ramp) under
/// a gently sloped shading, scaled so the brightest value is 1.
pub fn gen_synthetic_scene(seed: u64, height: usize, width: usize) -> Result<SpectralCube> {
    if height < MIN_SCENE_SIZE || width < MIN_SCENE_SIZE {
        return Err(Error::shape(format!(
            "scene {height}×{width} is smaller than {MIN_SCENE_SIZE}×{MIN_SCENE_SIZE}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let span = height.max(width) as f64;
    let regions: Vec<Region> = (0..rng.random_range(5..=20))
        .map(|_| {
            let site = (rng.random_range(0.0..height as f64), rng.random_range(0.0..width as f64));
            let spectrum = random_spectrum(&mut rng);
            // At most ±0.3 change across the whole image.
            let g = 0.3 / span;
            Region {
                site,
                spectrum,
                shade_base: rng.random_range(0.5..1.0),
                shade_grad: (rng.random_range(-g..g), rng.random_range(-g..g)),
            }
        })
        .collect();

    let n = height * width;
    let mut data = vec![0.0f64; BANDS * n];
    for y in 0..height {
        for x in 0..width {
            let (py, px) = (y as f64 + 0.5, x as f64 + 0.5);
            let region = regions
                .iter()
                .min_by(|a, b| {
                    let da = (a.site.0 - py).powi(2) + (a.site.1 - px).powi(2);
                    let db = (b.site.0 - py).powi(2) + (b.site.1 - px).powi(2);
                    da.total_cmp(&db)
                })
                .expect("at least five regions");
            let shade = (region.shade_base
                + region.shade_grad.0 * (py - region.site.0)
                + region.shade_grad.1 * (px - region.site.1))
                .max(0.1);
            for (k, &s) in region.spectrum.iter().enumerate() {
                data[k * n + y * width + x] = s * shade;
            }
        }
    }
    let peak = data.iter().copied().fold(0.0, f64::max);
    SpectralCube::clamped(height, width, data.into_iter().map(|v| (v / peak) as f32).collect())
}
