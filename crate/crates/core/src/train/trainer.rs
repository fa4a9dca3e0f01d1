use std::collections::HashMap;
use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::adam::{adam_step, AdamState};
use super::config::TrainConfig;
use super::l1_loss;
use super::log::{EpochRecord, TrainLog};
use crate::error::{Error, Result};
use crate::metrics::{evaluate, MetricReport};
use crate::model::{checkpoint, forward, reconstruct, ArchConfig, ModelParams};
use crate::spectral::{sample_patch, Dataset};
use crate::tensor::{Graph, Tensor};

pub const LOG_FILE: &str = "train_log.csv";
pub const BEST_FILE: &str = "best.hrck";

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub final_params: ModelParams<f32>,
    /// Parameters after the epoch with the lowest validation MRAE (the
    /// initial parameters when no epoch ran).
    pub best_params: ModelParams<f32>,
    pub log: TrainLog,
}

/// Loads both datasets named in `cfg` and trains on them.
pub fn train(cfg: &TrainConfig, arch: &ArchConfig, progress: impl FnMut(&EpochRecord)) -> Result<TrainOutcome> {
    cfg.validate()?;
    let train_set = Dataset::load(&cfg.train_data, cfg.track)?;
    let val_set = Dataset::load(&cfg.val_data, cfg.track)?;
    train_on(cfg, arch, &train_set, &val_set, progress)
}

/// Loss and parameter gradients for one batch.
fn batch_gradients(
    params: &ModelParams<f32>,
    rgb: Tensor<f32>,
    target: Tensor<f32>,
) -> Result<(f64, HashMap<String, Tensor<f32>>)> {
    let mut g = Graph::new();
    let bound = params.bind_graph(&mut g, true);
    let x = g.constant(rgb);
    let y = g.constant(target);
    let pred = forward(&mut g, &params.arch, &bound, &x)?;
    let loss = l1_loss(&mut g, pred, y)?;
    let value = g.value(loss).data()[0] as f64;
    let mut grads = g.backward(loss)?;
    let grads = bound
        .into_iter()
        .filter_map(|(name, var)| grads.take(var).map(|t| (name, t)))
        .collect();
    Ok((value, grads))
}

pub fn validate(params: &ModelParams<f32>, val: &Dataset, eps: f64) -> Result<MetricReport> {
    let preds = val
        .rgb
        .iter()
        .map(|rgb| reconstruct(params, rgb))
        .collect::<Result<Vec<_>>>()?;
    evaluate(
        val.names.iter().zip(&preds).zip(&val.cubes).map(|((n, p), g)| (n.as_str(), p, g)),
        &val.response,
        eps,
    )
}

/// Trains from a fresh initialisation. Each epoch visits every training
/// image once in shuffled order, taking one random patch per image, then
/// scores the full validation images. Bit-deterministic for a given seed.
pub fn train_on(
    cfg: &TrainConfig,
    arch: &ArchConfig,
    train_set: &Dataset,
    val_set: &Dataset,
    mut progress: impl FnMut(&EpochRecord),
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if train_set.is_empty() || val_set.is_empty() {
        return Err(Error::config("training and validation sets must be non-empty"));
    }
    let mut params = ModelParams::<f32>::init(arch, cfg.seed)?;
    let mut adam = AdamState::new(&params.tensors);
    // Data order and crops draw from their own stream, independent of init.
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0xda7a_5eed);
    let mut log = TrainLog::default();
    let mut best = (f64::INFINITY, params.clone());
    if let Some(dir) = &cfg.out_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }

    for epoch in 0..cfg.epochs {
        let lr = cfg.lr_at(epoch);
        let mut order: Vec<usize> = (0..train_set.len()).collect();
        order.shuffle(&mut rng);
        let (mut loss_sum, mut seen) = (0.0, 0usize);
        for batch in order.chunks(cfg.batch_size) {
            let mut rgb = Vec::with_capacity(batch.len());
            let mut cubes = Vec::with_capacity(batch.len());
            for &i in batch {
                let (r, c) = sample_patch(&train_set.rgb[i], &train_set.cubes[i], cfg.patch_size, &mut rng)?;
                rgb.push(r.to_tensor());
                cubes.push(c.to_tensor());
            }
            let (loss, grads) = batch_gradients(&params, Tensor::stack(&rgb)?, Tensor::stack(&cubes)?)?;
            if !loss.is_finite() {
                return Err(Error::Training(format!("loss diverged to {loss} in epoch {}", epoch + 1)));
            }
            adam_step(&mut params.tensors, &grads, &mut adam, lr, &cfg.adam)?;
            loss_sum += loss * batch.len() as f64;
            seen += batch.len();
        }
        if !params.is_finite() {
            return Err(Error::Training(format!("parameters became non-finite in epoch {}", epoch + 1)));
        }

        let report = validate(&params, val_set, cfg.metric_eps)?;
        let mut path: Option<PathBuf> = None;
        if let Some(dir) = &cfg.out_dir {
            let scheduled = cfg.checkpoint_every > 0 && (epoch + 1) % cfg.checkpoint_every == 0;
            if scheduled || epoch + 1 == cfg.epochs {
                let p = dir.join(format!("epoch_{:05}.hrck", epoch + 1));
                checkpoint::save(&params, &p)?;
                path = Some(p);
            }
        }
        if report.mrae <= best.0 {
            best = (report.mrae, params.clone());
            if let Some(dir) = &cfg.out_dir {
                checkpoint::save(&params, &dir.join(BEST_FILE))?;
            }
        }
        let record = EpochRecord {
            epoch: epoch + 1,
            loss: loss_sum / seen as f64,
            lr,
            mrae: report.mrae,
            rmse: report.rmse,
            bpmrae: report.bpmrae,
            path,
        };
        progress(&record);
        log.push(record)?;
    }
    if let Some(dir) = &cfg.out_dir {
        log.save(&dir.join(LOG_FILE))?;
    }
    Ok(TrainOutcome {
        final_params: params,
        best_params: best.1,
        log,
    })
}
