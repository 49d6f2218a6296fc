//! Surrogate training on a dataset directory.

use voxhomog_core::nn::network::grid_input;
use voxhomog_core::nn::{self, EpochRecord, LabelScaler, Network, TrainLog, TrainOutcome};
use voxhomog_core::seed;
use voxhomog_core::stats::Split;
use voxhomog_core::voxel::PhaseGrid;

use super::dataset::Dataset;
use super::stream;
use crate::config::{RunConfig, TrainSettings};
use crate::error::Result;

/// Network inputs and scaled targets of one split.
pub struct SplitTensors {
    pub inputs: Vec<Vec<f32>>,
    pub targets: Vec<Vec<f32>>,
    pub labels: Vec<[f64; 12]>,
}

impl SplitTensors {
    pub fn new(grids: &[PhaseGrid], labels: Vec<[f64; 12]>, scaler: &LabelScaler) -> Self {
        SplitTensors {
            inputs: grids.iter().map(grid_input::<f32>).collect(),
            targets: labels
                .iter()
                .map(|l| scaler.scale(l).iter().map(|&v| v as f32).collect())
                .collect(),
            labels,
        }
    }

    pub fn load(dataset: &Dataset, split: Split, scaler: &LabelScaler) -> Result<Self> {
        let (grids, labels) = dataset.load_split(split)?;
        Ok(Self::new(&grids, labels, scaler))
    }

    fn views(&self) -> (Vec<&[f32]>, Vec<&[f32]>) {
        (
            self.inputs.iter().map(Vec::as_slice).collect(),
            self.targets.iter().map(Vec::as_slice).collect(),
        )
    }
}

/// Trains `net` in place on prepared splits.
pub fn fit(
    net: &mut Network<f32>,
    train: &SplitTensors,
    val: &SplitTensors,
    settings: &TrainSettings,
    shuffle_seed: u64,
    on_epoch: &mut dyn FnMut(&EpochRecord),
) -> Result<TrainOutcome<f32>> {
    let (ti, tt) = train.views();
    let (vi, vt) = val.views();
    Ok(nn::train(
        net,
        &ti,
        &tt,
        &vi,
        &vt,
        &settings.train_config(shuffle_seed),
        None,
        on_epoch,
    )?)
}

/// Fits the label scaler on the training split, initializes the configured
/// arch and trains it.
pub fn train_surrogate(
    cfg: &RunConfig,
    dataset: &Dataset,
    on_epoch: &mut dyn FnMut(&EpochRecord),
) -> Result<nn::Checkpoint> {
    let (train_grids, train_labels) = dataset.load_split(Split::Train)?;
    let scaler = LabelScaler::fit(&train_labels)?;
    let train = SplitTensors::new(&train_grids, train_labels, &scaler);
    let val = SplitTensors::load(dataset, Split::Val, &scaler)?;
    let arch = cfg.network.arch(dataset.manifest.n)?;
    let mut net = Network::new(arch, seed::derive_tagged(cfg.seed, stream::INIT))?;
    let outcome = fit(
        &mut net,
        &train,
        &val,
        &cfg.train,
        seed::derive_tagged(cfg.seed, stream::SHUFFLE),
        on_epoch,
    )?;
    Ok(nn::Checkpoint {
        arch: net.arch().clone(),
        params: net.params().to_vec(),
        trainable: net.trainable().to_vec(),
        adam: Some(outcome.adam),
        scaler: Some(scaler),
        log: Some(outcome.log),
        seed: cfg.seed,
        base_checkpoint: None,
    })
}

/// `epoch,train_loss,val_loss` rows.
pub fn log_csv(log: &TrainLog) -> String {
    let mut s = String::from("epoch,train_loss,val_loss\n");
    for r in &log.epochs {
        s.push_str(&format!("{},{},{}\n", r.epoch, r.train_loss, r.val_loss));
    }
    s
}
