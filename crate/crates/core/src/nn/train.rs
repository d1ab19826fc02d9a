use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::params::{Grads, ParamSet};
use super::{clip_grad_norm, Adam, AdamConfig};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    /// Global gradient-norm clip, if any.
    pub clip_norm: Option<f64>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            batch_size: 128,
            adam: AdamConfig::default(),
            clip_norm: None,
            seed: 0,
        }
    }
}

/// Mini-batch Adam over `data`. Example order is reshuffled every epoch
/// from `seed`; gradients are summed in batch order, so runs are
/// bit-reproducible. Returns the mean loss of every epoch.
/// `stop` is consulted after each epoch and may end training early.
pub fn fit<T, L, S>(params: &mut ParamSet, data: &[T], config: &TrainConfig, loss: L, mut stop: S) -> Result<Vec<f64>>
where
    L: Fn(&ParamSet, &T) -> Result<(f64, Grads)>,
    S: FnMut(usize, &ParamSet, f64) -> bool,
{
    if data.is_empty() {
        return Err(Error::Invalid("empty training set".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut adam = Adam::new(config.adam, params);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let batch = config.batch_size.max(1);
    let mut curve = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for chunk in order.chunks(batch) {
            let mut grads = params.zero_grads();
            for &i in chunk {
                let (l, g) = loss(params, &data[i])?;
                if !l.is_finite() {
                    return Err(Error::NonFinite(format!("training loss at epoch {epoch}")));
                }
                total += l;
                grads.accumulate(&g);
            }
            grads.scale(1.0 / chunk.len() as f64);
            if let Some(max) = config.clip_norm {
                clip_grad_norm(&mut grads, max);
            }
            adam.step(params, &grads);
        }
        let mean = total / data.len() as f64;
        curve.push(mean);
        if stop(epoch, params, mean) {
            break;
        }
    }
    Ok(curve)
}
