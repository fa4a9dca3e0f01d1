//! Fixed pseudo-colour map for single-band renders.
//!
//! A band of centre λ is drawn as `value × tint(λ)`, where `tint` is the
//! piecewise-linear visible-spectrum approximation below (violet through
//! red), dimmed toward both ends of 400 to 700 nm.

pub fn tint(nm: f64) -> [f64; 3] {
    let (r, g, b) = match nm {
        x if x < 440.0 => (-(x - 440.0) / 60.0, 0.0, 1.0),
        x if x < 490.0 => (0.0, (x - 440.0) / 50.0, 1.0),
        x if x < 510.0 => (0.0, 1.0, -(x - 510.0) / 20.0),
        x if x < 580.0 => ((x - 510.0) / 70.0, 1.0, 0.0),
        x if x < 645.0 => (1.0, -(x - 645.0) / 65.0, 0.0),
        _ => (1.0, 0.0, 0.0),
    };
    let fade = if nm < 420.0 {
        0.3 + 0.7 * (nm - 380.0) / 40.0
    } else if nm > 680.0 {
        0.3 + 0.7 * (720.0 - nm) / 40.0
    } else {
        1.0
    };
    [r, g, b].map(|c| (c * fade).clamp(0.0, 1.0))
}
