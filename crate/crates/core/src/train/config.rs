use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::adam::AdamConfig;
use crate::error::{Error, Result};
use crate::model::ArchConfig;
use crate::spectral::{DegradeConfig, Track};

/// Learning rate for 0-based `epoch`: halved every `half_every` epochs.
pub fn lr_at(epoch: u64, base_lr: f64, half_every: u64) -> f64 {
    let halvings = epoch / half_every.max(1);
    base_lr * 0.5f64.powi(halvings.min(i32::MAX as u64) as i32)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: u64,
    pub base_lr: f64,
    pub lr_half_every: u64,
    pub batch_size: usize,
    /// Side of the square training crops; a multiple of 8.
    pub patch_size: usize,
    pub adam: AdamConfig,
    pub seed: u64,
    /// Write a checkpoint every this many epochs (0 disables scheduled
    /// checkpoints; the best epoch is still saved).
    pub checkpoint_every: u64,
    pub train_data: PathBuf,
    pub val_data: PathBuf,
    pub track: Track,
    /// Checkpoints and the log go here.
    pub out_dir: Option<PathBuf>,
    /// Denominator guard for validation metrics.
    pub metric_eps: f64,
}

/// Desk-scale defaults. `base_lr` is ten times the full-scale rate because
/// a 300-epoch run takes only a few thousand steps.
impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 300,
            base_lr: 1e-3,
            lr_half_every: 100,
            batch_size: 4,
            patch_size: 32,
            adam: AdamConfig::default(),
            seed: 0,
            checkpoint_every: 50,
            train_data: PathBuf::from("data/train"),
            val_data: PathBuf::from("data/val"),
            track: Track::Clean,
            out_dir: None,
            metric_eps: crate::metrics::DEFAULT_EPS,
        }
    }
}

impl TrainConfig {
    pub fn lr_at(&self, epoch: u64) -> f64 {
        lr_at(epoch, self.base_lr, self.lr_half_every)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.base_lr > 0.0 && self.base_lr.is_finite()) {
            return Err(Error::config(format!("base_lr must be positive, got {}", self.base_lr)));
        }
        if self.lr_half_every == 0 || self.batch_size == 0 {
            return Err(Error::config("lr_half_every and batch_size must be positive"));
        }
        if self.patch_size == 0 || self.patch_size % 8 != 0 {
            return Err(Error::config(format!(
                "patch_size must be a positive multiple of 8, got {}",
                self.patch_size
            )));
        }
        if !(self.metric_eps > 0.0) {
            return Err(Error::config("metric_eps must be positive"));
        }
        self.adam.validate()
    }
}

/// Contents of a run config file: `[train]`, `[arch]` and `[degrade]`
/// tables, all optional, with unspecified keys taking the desk-scale
/// defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub train: TrainConfig,
    pub arch: ArchConfig,
    pub degrade: DegradeConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            train: TrainConfig::default(),
            arch: ArchConfig::desk(),
            degrade: DegradeConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::config(format!("bad config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| Error::config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config types serialise")
    }
}
