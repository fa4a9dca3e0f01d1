//! Reconstruction metrics, ensemble fusion and a per-pixel linear baseline.

mod baseline;

use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::spectral::{render_unclamped, ResponseFunction, SpectralCube};

pub use baseline::{linear_baseline_fit, LinearBaseline, MIN_FIT_PIXELS};

/// Default denominator guard for relative errors.
pub const DEFAULT_EPS: f64 = 1e-8;

fn check_pair(pred: &SpectralCube, gt: &SpectralCube) -> Result<()> {
    if !pred.same_shape(gt) {
        return Err(Error::shape(format!(
            "prediction {}×{} does not match ground truth {}×{}",
            pred.height(),
            pred.width(),
            gt.height(),
            gt.width()
        )));
    }
    Ok(())
}

fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps.is_finite() {
        Ok(())
    } else {
        Err(Error::config(format!("eps must be positive, got {eps}")))
    }
}

/// Mean of `|p − g| / max(g, eps)`.
fn relative_error(pred: impl Iterator<Item = f64>, gt: impl Iterator<Item = f64>, eps: f64) -> f64 {
    let (mut sum, mut n) = (0.0, 0usize);
    for (p, g) in pred.zip(gt) {
        sum += (p - g).abs() / g.max(eps);
        n += 1;
    }
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Mean relative absolute error over every band of every pixel.
pub fn mrae(pred: &SpectralCube, gt: &SpectralCube, eps: f64) -> Result<f64> {
    check_pair(pred, gt)?;
    check_eps(eps)?;
    Ok(relative_error(
        pred.data().iter().map(|&v| v as f64),
        gt.data().iter().map(|&v| v as f64),
        eps,
    ))
}

pub fn rmse(pred: &SpectralCube, gt: &SpectralCube) -> Result<f64> {
    check_pair(pred, gt)?;
    let n = pred.data().len();
    if n == 0 {
        return Ok(0.0);
    }
    let sq: f64 = pred
        .data()
        .iter()
        .zip(gt.data())
        .map(|(&p, &g)| (p as f64 - g as f64).powi(2))
        .sum();
    Ok((sq / n as f64).sqrt())
}

/// Relative error of the two cubes rendered to RGB (unclamped) through `resp`.
pub fn bpmrae(pred: &SpectralCube, gt: &SpectralCube, resp: &ResponseFunction, eps: f64) -> Result<f64> {
    check_pair(pred, gt)?;
    check_eps(eps)?;
    let (p, g) = (render_unclamped(pred, resp), render_unclamped(gt, resp));
    Ok(relative_error(p.into_iter(), g.into_iter(), eps))
}

/// Predictions of several models for the same input.
#[derive(Clone, Debug)]
pub struct EnsembleSet {
    labels: Vec<String>,
    members: Vec<SpectralCube>,
}

impl EnsembleSet {
    pub fn new(members: Vec<(String, SpectralCube)>) -> Result<Self> {
        let Some((_, first)) = members.first() else {
            return Err(Error::config("an ensemble needs at least one member"));
        };
        if let Some((label, _)) = members.iter().find(|(_, m)| !m.same_shape(first)) {
            return Err(Error::shape(format!("ensemble member {label} differs in size from the first")));
        }
        let (labels, members) = members.into_iter().unzip();
        Ok(Self { labels, members })
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn members(&self) -> &[SpectralCube] {
        &self.members
    }
}

/// Per-value arithmetic mean of the members.
pub fn ensemble_average(set: &EnsembleSet) -> SpectralCube {
    let first = &set.members[0];
    let mut acc = vec![0.0f64; first.data().len()];
    for m in &set.members {
        for (a, &v) in acc.iter_mut().zip(m.data()) {
            *a += v as f64;
        }
    }
    let k = set.members.len() as f64;
    SpectralCube::clamped(
        first.height(),
        first.width(),
        acc.into_iter().map(|v| (v / k) as f32).collect(),
    )
    .expect("members share one shape")
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ImageMetrics {
    pub name: String,
    pub mrae: f64,
    pub rmse: f64,
    pub bpmrae: f64,
}

/// Aggregate metrics are means over images.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricReport {
    pub mrae: f64,
    pub rmse: f64,
    pub bpmrae: f64,
    pub per_image: Vec<ImageMetrics>,
}

impl MetricReport {
    pub fn from_images(per_image: Vec<ImageMetrics>) -> Self {
        let n = per_image.len().max(1) as f64;
        let mean = |f: fn(&ImageMetrics) -> f64| per_image.iter().map(f).sum::<f64>() / n;
        Self {
            mrae: mean(|m| m.mrae),
            rmse: mean(|m| m.rmse),
            bpmrae: mean(|m| m.bpmrae),
            per_image,
        }
    }

    /// One row per image followed by a `mean` row.
    pub fn write_csv(&self, out: impl std::io::Write) -> Result<()> {
        let csv_err = |e: csv::Error| Error::format(0, format!("csv write failed: {e}"));
        let mut w = csv::Writer::from_writer(out);
        for m in &self.per_image {
            w.serialize(m).map_err(csv_err)?;
        }
        w.serialize(ImageMetrics {
            name: "mean".into(),
            mrae: self.mrae,
            rmse: self.rmse,
            bpmrae: self.bpmrae,
        })
        .map_err(csv_err)?;
        w.flush().map_err(|e| Error::format(0, format!("csv write failed: {e}")))
    }
}

impl fmt::Display for MetricReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let width = self.per_image.iter().map(|m| m.name.len()).max().unwrap_or(0).max(5);
        writeln!(f, "{:<width$}  {:>10}  {:>10}  {:>10}", "image", "MRAE", "RMSE", "BPMRAE")?;
        for m in &self.per_image {
            writeln!(f, "{:<width$}  {:>10.6}  {:>10.6}  {:>10.6}", m.name, m.mrae, m.rmse, m.bpmrae)?;
        }
        write!(f, "{:<width$}  {:>10.6}  {:>10.6}  {:>10.6}", "mean", self.mrae, self.rmse, self.bpmrae)
    }
}

/// Scores named prediction/ground-truth pairs. Predictions are cubes, so
/// they are already clamped to `[0, 1]`.
pub fn evaluate<'a>(
    pairs: impl IntoIterator<Item = (&'a str, &'a SpectralCube, &'a SpectralCube)>,
    resp: &ResponseFunction,
    eps: f64,
) -> Result<MetricReport> {
    let per_image = pairs
        .into_iter()
        .map(|(name, pred, gt)| {
            Ok(ImageMetrics {
                name: name.to_owned(),
                mrae: mrae(pred, gt, eps)?,
                rmse: rmse(pred, gt)?,
                bpmrae: bpmrae(pred, gt, resp, eps)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MetricReport::from_images(per_image))
}
