//! Mini-batch training with best-validation checkpointing.

use alloc::format;
use alloc::vec::Vec;
use core::ops::Range;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::{AdamConfig, AdamState};
use super::network::Network;
use super::Scalar;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    /// Stop after this many epochs without a new best validation loss.
    pub patience: Option<usize>,
    /// Seeds the per-epoch shuffles.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 300,
            batch_size: 25,
            adam: AdamConfig::default(),
            patience: Some(100),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::config("epochs must be at least 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch_size must be at least 1"));
        }
        if self.patience == Some(0) {
            return Err(Error::config("patience must be at least 1"));
        }
        self.adam.validate()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    /// Mean training loss over the epoch's mini-batches, weighted by size.
    pub train_loss: f64,
    /// Validation loss after the epoch's last update.
    pub val_loss: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub stopped_early: bool,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome<S> {
    pub log: TrainLog,
    /// Optimizer state at the best epoch.
    pub adam: AdamState<S>,
}

/// Parameter ranges of the trainable stages.
pub(crate) fn active_ranges<S: Scalar>(net: &Network<S>) -> Vec<Range<usize>> {
    net.layout()
        .iter()
        .zip(net.trainable())
        .filter(|(_, &t)| t)
        .map(|(l, _)| l.range())
        .collect()
}

/// Trains `net` in place and leaves it holding the parameters of the epoch
/// with the lowest validation loss. Inputs of stages before the first
/// trainable one are computed once and reused. `resume` continues from a
/// saved optimizer state.
#[allow(clippy::too_many_arguments)]
pub fn train<S: Scalar>(
    net: &mut Network<S>,
    train_inputs: &[&[S]],
    train_targets: &[&[S]],
    val_inputs: &[&[S]],
    val_targets: &[&[S]],
    cfg: &TrainConfig,
    resume: Option<AdamState<S>>,
    on_epoch: &mut dyn FnMut(&EpochRecord),
) -> Result<TrainOutcome<S>> {
    cfg.validate()?;
    if train_inputs.is_empty() {
        return Err(Error::EmptySplit("train".into()));
    }
    if val_inputs.is_empty() {
        return Err(Error::EmptySplit("val".into()));
    }
    if train_inputs.len() != train_targets.len() || val_inputs.len() != val_targets.len() {
        return Err(Error::shape("inputs and targets differ in count"));
    }
    let start = net
        .first_trainable()
        .ok_or_else(|| Error::config("network has no trainable stages"))?;
    let mut adam = match resume {
        Some(s) if s.m.len() == net.n_params() => s,
        Some(s) => {
            return Err(Error::shape(format!(
                "optimizer state for {} parameters, network has {}",
                s.m.len(),
                net.n_params()
            )))
        }
        None => AdamState::new(cfg.adam, net.n_params()),
    };
    let active = active_ranges(net);

    let cache = |inputs: &[&[S]]| -> Result<Option<Vec<Vec<S>>>> {
        if start == 0 {
            return Ok(None);
        }
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            inputs.par_iter().map(|x| net.features(start, x)).collect::<Result<Vec<_>>>().map(Some)
        }
        #[cfg(not(feature = "parallel"))]
        {
            inputs.iter().map(|x| net.features(start, x)).collect::<Result<Vec<_>>>().map(Some)
        }
    };
    let train_cache = cache(train_inputs)?;
    let val_cache = cache(val_inputs)?;
    let train_x: Vec<&[S]> = match &train_cache {
        Some(c) => c.iter().map(|v| v.as_slice()).collect(),
        None => train_inputs.to_vec(),
    };
    let val_x: Vec<&[S]> = match &val_cache {
        Some(c) => c.iter().map(|v| v.as_slice()).collect(),
        None => val_inputs.to_vec(),
    };

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..train_x.len()).collect();
    let mut log = TrainLog {
        epochs: Vec::with_capacity(cfg.epochs),
        best_epoch: 0,
        best_val_loss: f64::INFINITY,
        stopped_early: false,
    };
    let mut best_params = net.params().to_vec();
    let mut best_adam = adam.clone();
    let mut batch_x: Vec<&[S]> = Vec::with_capacity(cfg.batch_size);
    let mut batch_t: Vec<&[S]> = Vec::with_capacity(cfg.batch_size);

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut train_sum = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            batch_x.clear();
            batch_t.clear();
            for &i in chunk {
                batch_x.push(train_x[i]);
                batch_t.push(train_targets[i]);
            }
            let (loss, grad) = net.batch_gradient(start, &batch_x, &batch_t)?;
            train_sum += loss.as_f64() * chunk.len() as f64;
            adam.update(net.params_mut(), &grad, &active)?;
        }
        let val_loss = net.loss_from(start, &val_x, val_targets)?.as_f64();
        let record = EpochRecord {
            epoch,
            train_loss: train_sum / train_x.len() as f64,
            val_loss,
        };
        log.epochs.push(record);
        on_epoch(&record);
        if !val_loss.is_finite() {
            return Err(Error::config(format!("validation loss diverged at epoch {epoch}")));
        }
        if val_loss < log.best_val_loss {
            log.best_val_loss = val_loss;
            log.best_epoch = epoch;
            best_params.copy_from_slice(net.params());
            best_adam.clone_from(&adam);
        } else if let Some(p) = cfg.patience {
            if epoch - log.best_epoch >= p {
                log.stopped_early = true;
                break;
            }
        }
    }
    net.params_mut().copy_from_slice(&best_params);
    Ok(TrainOutcome { log, adam: best_adam })
}
