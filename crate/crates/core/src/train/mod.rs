//! L1 training with Adam and a step-halving learning rate.

mod adam;
mod config;
mod log;
mod trainer;

#[cfg(test)]
mod tests;

use crate::error::Result;
use crate::tensor::{Graph, Var};

pub use adam::{adam_step, AdamConfig, AdamState};
pub use config::{lr_at, RunConfig, TrainConfig};
pub use log::{select_best_epoch, EpochRecord, TrainLog};
pub use trainer::{train, train_on, validate, TrainOutcome, BEST_FILE, LOG_FILE};

/// Mean absolute difference between prediction and target.
pub fn l1_loss(g: &mut Graph<f32>, pred: Var, target: Var) -> Result<Var> {
    g.mean_abs_diff(pred, target)
}
