use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{Element, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.5,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || !(self.eps > 0.0) {
            return Err(Error::config(format!("invalid Adam settings {self:?}")));
        }
        Ok(())
    }
}

/// First and second moments per parameter plus the shared step count.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct AdamState<E> {
    pub m: BTreeMap<String, Vec<E>>,
    pub v: BTreeMap<String, Vec<E>>,
    pub t: u64,
}

impl<E: Element> AdamState<E> {
    pub fn new(params: &BTreeMap<String, Tensor<E>>) -> Self {
        let zeros = || {
            params
                .iter()
                .map(|(k, t)| (k.clone(), vec![E::zero(); t.data().len()]))
                .collect()
        };
        Self {
            m: zeros(),
            v: zeros(),
            t: 0,
        }
    }
}

/// One bias-corrected Adam update. Parameters without a gradient entry are
/// treated as having a zero gradient. Nothing is modified if any gradient is
/// non-finite.
pub fn adam_step<E: Element>(
    params: &mut BTreeMap<String, Tensor<E>>,
    grads: &HashMap<String, Tensor<E>>,
    state: &mut AdamState<E>,
    lr: f64,
    cfg: &AdamConfig,
) -> Result<()> {
    for (name, p) in params.iter() {
        if let Some(g) = grads.get(name) {
            if g.shape() != p.shape() {
                return Err(Error::shape(format!(
                    "gradient for {name} has shape {} but the parameter is {}",
                    g.shape(),
                    p.shape()
                )));
            }
            if !g.is_finite() {
                return Err(Error::Training(format!("non-finite gradient for {name}")));
            }
        }
    }
    state.t += 1;
    let t = state.t as i32;
    let (b1, b2) = (cfg.beta1, cfg.beta2);
    let correct1 = 1.0 - b1.powi(t);
    let correct2 = 1.0 - b2.powi(t);
    for (name, p) in params.iter_mut() {
        let n = p.data().len();
        let m = state.m.entry(name.clone()).or_insert_with(|| vec![E::zero(); n]);
        let v = state.v.entry(name.clone()).or_insert_with(|| vec![E::zero(); n]);
        let g = grads.get(name).map(Tensor::data);
        for i in 0..n {
            let gi = g.map_or(0.0, |g| g[i].to_f64().unwrap_or(0.0));
            let mi = b1 * m[i].to_f64().unwrap_or(0.0) + (1.0 - b1) * gi;
            let vi = b2 * v[i].to_f64().unwrap_or(0.0) + (1.0 - b2) * gi * gi;
            m[i] = E::of(mi);
            v[i] = E::of(vi);
            let step = lr * (mi / correct1) / ((vi / correct2).sqrt() + cfg.eps);
            let theta = &mut p.data_mut()[i];
            *theta = E::of(theta.to_f64().unwrap_or(0.0) - step);
        }
    }
    Ok(())
}
