use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::io;
use super::*;

fn random_cube(seed: u64, h: usize, w: usize) -> SpectralCube {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    SpectralCube::new(h, w, (0..BANDS * h * w).map(|_| rng.random::<f32>()).collect()).unwrap()
}

fn render_oracle(cube: &SpectralCube, resp: &ResponseFunction) -> Vec<f64> {
    let (h, w) = (cube.height(), cube.width());
    let mut out = vec![0.0; 3 * h * w];
    for c in 0..3 {
        for y in 0..h {
            for x in 0..w {
                let mut acc = 0.0;
                for k in 0..BANDS {
                    acc += cube.at(k, y, x) as f64 * resp.matrix()[k][c];
                }
                out[(c * h + y) * w + x] = acc;
            }
        }
    }
    out
}

#[test]
fn band_centres_span_visible_range() {
    let c = band_centers();
    assert_eq!(c[0], 400.0);
    assert_eq!(c[30], 700.0);
    assert!(c.windows(2).all(|p| p[1] - p[0] == 10.0));
}

#[test]
fn planar_rejects_bad_data() {
    assert!(matches!(SpectralCube::new(2, 2, vec![0.5; 10]), Err(Error::Shape(_))));
    assert!(SpectralCube::new(1, 1, vec![1.5; BANDS]).is_err());
    assert!(SpectralCube::new(1, 1, vec![f32::NAN; BANDS]).is_err());
    let c = SpectralCube::clamped(1, 1, vec![-1.0; BANDS]).unwrap();
    assert!(c.data().iter().all(|&v| v == 0.0));
}

#[test]
fn zero_response_renders_black() {
    let cube = random_cube(1, 4, 5);
    let resp = ResponseFunction::new([[0.0; 3]; BANDS]).unwrap();
    assert!(resp.validate().is_err());
    assert!(render_rgb(&cube, &resp).data().iter().all(|&v| v == 0.0));
}

#[test]
fn selector_response_copies_one_band() {
    let cube = random_cube(2, 4, 5);
    let mut m = [[0.0; 3]; BANDS];
    m[7][0] = 1.0;
    let rgb = render_rgb(&cube, &ResponseFunction::new(m).unwrap());
    assert_eq!(rgb.plane(0), cube.plane(7));
    assert!(rgb.plane(1).iter().chain(rgb.plane(2)).all(|&v| v == 0.0));
}

#[test]
fn render_matches_loop_oracle() {
    let resp = default_response();
    for seed in 0..5 {
        let cube = random_cube(seed, 6, 7);
        let fast = render_unclamped(&cube, &resp);
        let slow = render_oracle(&cube, &resp);
        for (a, b) in fast.iter().zip(&slow) {
            assert!((a - b).abs() <= 1e-12, "{a} vs {b}");
        }
        let rgb = render_rgb(&cube, &resp);
        for (a, b) in rgb.data().iter().zip(&slow) {
            assert_eq!(*a, b.clamp(0.0, 1.0) as f32);
        }
    }
}

#[test]
fn default_response_is_normalised() {
    let resp = default_response();
    assert!(resp.matrix().iter().flatten().all(|v| (0.0..=1.0).contains(v)));
    for s in resp.column_sums() {
        assert!((s - 1.0).abs() < 1e-9);
    }
    resp.validate().unwrap();
    let flat = SpectralCube::filled(3, 3, 0.5).unwrap();
    for v in render_unclamped(&flat, &resp) {
        assert!((v - 0.5).abs() < 1e-9);
    }
    // Peaks land in the expected order: red longest, blue shortest.
    let argmax = |c: usize| (0..BANDS).max_by(|&a, &b| resp.matrix()[a][c].total_cmp(&resp.matrix()[b][c])).unwrap();
    assert_eq!([argmax(0), argmax(1), argmax(2)], [21, 14, 7]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn render_is_linear_before_clamping(seed in 0u64..1000, alpha in 0.0f32..=1.0) {
        let cube = random_cube(seed, 3, 4);
        let scaled = SpectralCube::new(3, 4, cube.data().iter().map(|v| v * alpha).collect()).unwrap();
        let resp = default_response();
        let base = render_unclamped(&cube, &resp);
        for (s, b) in render_unclamped(&scaled, &resp).iter().zip(&base) {
            prop_assert!((s - alpha as f64 * b).abs() <= 1e-6 * b.abs().max(1e-3));
        }
    }
}

#[test]
fn identity_degradation_is_exact() {
    let rgb = render_rgb(&random_cube(3, 8, 9), &default_response());
    assert_eq!(degrade_real_world(&rgb, &DegradeConfig::identity(), 5).unwrap(), rgb);
}

#[test]
fn noise_level_matches_sigma() {
    let rgb = RgbImage::filled(256, 256, 0.5).unwrap();
    let cfg = DegradeConfig {
        noise_sigma: 0.02,
        mosaic: false,
        quantize_bits: None,
    };
    let out = degrade_real_world(&rgb, &cfg, 17).unwrap();
    let d: Vec<f64> = out.data().iter().map(|&v| v as f64 - 0.5).collect();
    let mean = d.iter().sum::<f64>() / d.len() as f64;
    let var = d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (d.len() - 1) as f64;
    let std = var.sqrt();
    assert!((std - 0.02).abs() <= 0.1 * 0.02, "std {std}");
    assert_eq!(degrade_real_world(&rgb, &cfg, 17).unwrap(), out);
    assert_ne!(degrade_real_world(&rgb, &cfg, 18).unwrap(), out);
}

#[test]
fn demosaicking_a_constant_field_is_exact() {
    let cfg = DegradeConfig {
        noise_sigma: 0.0,
        mosaic: true,
        quantize_bits: None,
    };
    for (h, w) in [(8, 8), (7, 5), (2, 3)] {
        let data: Vec<f32> = [0.2f32, 0.55, 0.9].iter().flat_map(|&v| vec![v; h * w]).collect();
        let rgb = RgbImage::new(h, w, data).unwrap();
        assert_eq!(degrade_real_world(&rgb, &cfg, 0).unwrap(), rgb);
    }
}

#[test]
fn demosaicking_keeps_sampled_values() {
    let rgb = render_rgb(&random_cube(4, 6, 6), &default_response());
    let cfg = DegradeConfig {
        noise_sigma: 0.0,
        mosaic: true,
        quantize_bits: None,
    };
    let out = degrade_real_world(&rgb, &cfg, 0).unwrap();
    for y in 0..6 {
        for x in 0..6 {
            let c = match (y % 2, x % 2) {
                (0, 0) => 0,
                (1, 1) => 2,
                _ => 1,
            };
            assert_eq!(out.at(c, y, x), rgb.at(c, y, x));
        }
    }
    assert_ne!(out, rgb);
}

#[test]
fn quantisation_snaps_to_levels() {
    let rgb = render_rgb(&random_cube(5, 4, 4), &default_response());
    let cfg = DegradeConfig {
        noise_sigma: 0.0,
        mosaic: false,
        quantize_bits: Some(8),
    };
    for v in degrade_real_world(&rgb, &cfg, 0).unwrap().data() {
        let level = *v as f64 * 255.0;
        assert!((level - level.round()).abs() < 1e-4, "{v}");
    }
}

#[test]
fn degrade_config_validation() {
    let bad_bits = DegradeConfig {
        quantize_bits: Some(7),
        ..DegradeConfig::default()
    };
    let bad_sigma = DegradeConfig {
        noise_sigma: -0.1,
        ..DegradeConfig::default()
    };
    let rgb = RgbImage::filled(4, 4, 0.5).unwrap();
    assert!(matches!(degrade_real_world(&rgb, &bad_bits, 0), Err(Error::Config(_))));
    assert!(matches!(degrade_real_world(&rgb, &bad_sigma, 0), Err(Error::Config(_))));
    DegradeConfig::default().validate().unwrap();
}

#[test]
fn synthetic_scenes_are_deterministic_and_normalised() {
    let a = gen_synthetic_scene(7, 32, 48).unwrap();
    assert_eq!(a, gen_synthetic_scene(7, 32, 48).unwrap());
    assert_ne!(a, gen_synthetic_scene(8, 32, 48).unwrap());
    assert!(a.data().iter().all(|v| (0.0..=1.0).contains(v)));
    assert_eq!(a.data().iter().copied().fold(0.0, f32::max), 1.0);
    assert!(matches!(gen_synthetic_scene(0, 15, 64), Err(Error::Shape(_))));
}

#[test]
fn synthetic_spectra_are_smooth() {
    for seed in 0..100 {
        let cube = gen_synthetic_scene(seed, 16, 16).unwrap();
        let n = cube.plane_len();
        for p in 0..n {
            let step: f64 = (0..BANDS - 1)
                .map(|k| (cube.data()[(k + 1) * n + p] - cube.data()[k * n + p]).abs() as f64)
                .sum::<f64>()
                / (BANDS - 1) as f64;
            assert!(step < 0.1, "seed {seed} pixel {p}: {step}");
        }
    }
}

#[test]
fn synthetic_scenes_are_piecewise() {
    // Distinct chromaticities (spectra up to shading) count the regions.
    for seed in 0..20 {
        let cube = gen_synthetic_scene(seed, 64, 64).unwrap();
        let n = cube.plane_len();
        let mut keys: Vec<Vec<i64>> = (0..n)
            .map(|p| {
                let total: f64 = (0..BANDS).map(|k| cube.data()[k * n + p] as f64).sum();
                (0..BANDS).map(|k| (cube.data()[k * n + p] as f64 / total * 1e4).round() as i64).collect()
            })
            .collect();
        keys.sort();
        keys.dedup();
        assert!(keys.len() <= 20 * 3, "seed {seed}: {} chromaticities", keys.len());
        assert!(keys.len() >= 2, "seed {seed}");
    }
}

#[test]
fn full_size_patch_is_the_whole_pair() {
    let cube = random_cube(6, 16, 16);
    let rgb = render_rgb(&cube, &default_response());
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let (r, c) = sample_patch(&rgb, &cube, 16, &mut rng).unwrap();
    assert_eq!((r, c), (rgb, cube));
}

#[test]
fn crop_commutes_with_render() {
    let resp = default_response();
    let cube = gen_synthetic_scene(3, 40, 48).unwrap();
    let rgb = render_rgb(&cube, &resp);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..20 {
        let (r, c) = sample_patch(&rgb, &cube, 24, &mut rng).unwrap();
        assert_eq!(render_rgb(&c, &resp), r);
    }
}

#[test]
fn patch_positions_are_uniform() {
    // 24×24 image with 16×16 patches: 9×9 corners.
    let cube = SpectralCube::new(
        24,
        24,
        (0..BANDS * 576).map(|i| ((i % 576) as f32) / 576.0).collect(),
    )
    .unwrap();
    let rgb = RgbImage::new(24, 24, cube.data()[..3 * 576].to_vec()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let draws = 10_000;
    let mut counts = [0usize; 81];
    for _ in 0..draws {
        let (_, c) = sample_patch(&rgb, &cube, 16, &mut rng).unwrap();
        // Top-left value encodes the corner.
        let idx = (c.at(0, 0, 0) * 576.0).round() as usize;
        let (y, x) = (idx / 24, idx % 24);
        counts[y * 9 + x] += 1;
    }
    let expected = draws as f64 / 81.0;
    let chi2: f64 = counts.iter().map(|&o| (o as f64 - expected).powi(2) / expected).sum();
    // 99th percentile of chi-squared with 80 degrees of freedom.
    assert!(chi2 < 112.33, "chi2 {chi2}");
}

#[test]
fn patch_size_rules() {
    let cube = random_cube(7, 32, 24);
    let rgb = render_rgb(&cube, &default_response());
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for size in [0, 12, 32] {
        assert!(matches!(sample_patch(&rgb, &cube, size, &mut rng), Err(Error::Shape(_))));
    }
    let other = RgbImage::filled(32, 32, 0.0).unwrap();
    assert!(matches!(sample_patch(&other, &cube, 8, &mut rng), Err(Error::Shape(_))));
}

#[test]
fn cube_container_round_trip() {
    let cube = random_cube(8, 5, 9);
    let bytes = io::encode(&cube);
    assert_eq!(bytes.len(), io::HEADER_LEN + 4 * BANDS * 45);
    let back: SpectralCube = io::decode(&bytes).unwrap();
    assert!(back.data().iter().zip(cube.data()).all(|(a, b)| a.to_bits() == b.to_bits()));
    assert_eq!(io::encode(&back), bytes);

    let rgb = render_rgb(&cube, &default_response());
    let rgb_bytes = io::encode(&rgb);
    assert_eq!(u32::from_le_bytes(rgb_bytes[12..16].try_into().unwrap()), 3);
    assert_eq!(io::decode::<3>(&rgb_bytes).unwrap(), rgb);
    assert!(matches!(io::decode::<BANDS>(&rgb_bytes), Err(Error::Format { offset: 12, .. })));
}

#[test]
fn cube_container_errors() {
    let bytes = io::encode(&random_cube(9, 3, 3));
    match io::decode::<BANDS>(&bytes[..bytes.len() - 10]) {
        Err(Error::Format { message, .. }) => assert!(message.contains("10 missing"), "{message}"),
        other => panic!("{other:?}"),
    }
    let mut bad = bytes.clone();
    bad[1] = b'X';
    assert!(matches!(io::decode::<BANDS>(&bad), Err(Error::Format { offset: 0, .. })));
    let mut range = bytes.clone();
    range[16 + 4 * 5..16 + 4 * 6].copy_from_slice(&2.0f32.to_le_bytes());
    assert!(matches!(io::decode::<BANDS>(&range), Err(Error::Format { offset: 36, .. })));
    let mut long = bytes;
    long.push(0);
    assert!(matches!(io::decode::<BANDS>(&long), Err(Error::Format { .. })));
}

#[test]
fn png_round_trip_within_16_bit_step() {
    let rgb = render_rgb(&random_cube(10, 7, 5), &default_response());
    let back = io::decode_png(&io::encode_png(&rgb).unwrap()).unwrap();
    assert!(back.same_shape(&rgb));
    for (a, b) in back.data().iter().zip(rgb.data()) {
        assert!((a - b).abs() <= 0.5 / 65535.0 + 1e-7);
    }
    // A second trip is exact: values already sit on the 16-bit grid.
    assert_eq!(io::decode_png(&io::encode_png(&back).unwrap()).unwrap(), back);
    assert!(matches!(io::decode_png(b"not a png"), Err(Error::Format { .. })));
}

#[test]
fn response_csv_round_trip() {
    let resp = default_response();
    let mut buf = Vec::new();
    io::write_response(&resp, &mut buf).unwrap();
    assert_eq!(buf.iter().filter(|&&b| b == b'\n').count(), BANDS);
    assert_eq!(io::read_response(buf.as_slice()).unwrap(), resp);
    let short = "0.1,0.2,0.3\n";
    assert!(matches!(io::read_response(short.as_bytes()), Err(Error::Format { .. })));
    let text = String::from_utf8(buf).unwrap().replacen("0", "x", 1);
    assert!(matches!(io::read_response(text.as_bytes()), Err(Error::Format { .. })));
}

#[test]
fn file_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let cube = random_cube(11, 4, 4);
    let p = dir.path().join("a.hsc");
    io::save_hsc(&cube, &p).unwrap();
    assert_eq!(io::load_hsc::<BANDS>(&p).unwrap(), cube);
    let rgb = render_rgb(&cube, &default_response());
    let q = dir.path().join("a.png");
    io::save_png(&rgb, &q).unwrap();
    assert!(io::load_rgb(&q).unwrap().same_shape(&rgb));
    let r = dir.path().join("rgb.hsc");
    io::save_hsc(&rgb, &r).unwrap();
    assert_eq!(io::load_rgb(&r).unwrap(), rgb);
    assert!(matches!(io::load_hsc::<BANDS>(&dir.path().join("missing")), Err(Error::Io { .. })));
}
