//! Fine-tuning a trained surrogate on a new dataset, with an optional
//! from-scratch baseline of the same arch.

use serde::{Deserialize, Serialize};
use voxhomog_core::nn::{extend_for_transfer, Checkpoint, EpochRecord, Network, TrainOutcome};
use voxhomog_core::seed;
use voxhomog_core::stats::Split;

use super::dataset::Dataset;
use super::evaluate::scaler_of;
use super::stream;
use super::training::{fit, SplitTensors};
use crate::config::RunConfig;
use crate::error::{Error, Result};

/// Which model an epoch callback refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    Transfer,
    Scratch,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub epoch: usize,
    pub transfer_train: f64,
    pub transfer_val: f64,
    pub scratch_train: Option<f64>,
    pub scratch_val: Option<f64>,
}

pub struct TransferOutcome {
    pub transfer: Checkpoint,
    pub scratch: Option<Checkpoint>,
    pub curve: Vec<CurvePoint>,
}

fn to_checkpoint(net: &Network<f32>, outcome: TrainOutcome<f32>, ck: &Checkpoint, seed: u64, base: Option<String>) -> Checkpoint {
    Checkpoint {
        arch: net.arch().clone(),
        params: net.params().to_vec(),
        trainable: net.trainable().to_vec(),
        adam: Some(outcome.adam),
        scaler: ck.scaler,
        log: Some(outcome.log),
        seed,
        base_checkpoint: base,
    }
}

/// Both models keep the base checkpoint's label scaler so the copied output
/// layer stays meaningful and the two runs predict in the same space.
pub fn run_transfer(
    cfg: &RunConfig,
    base: &Checkpoint,
    base_hash: &str,
    dataset: &Dataset,
    on_epoch: &mut dyn FnMut(Model, &EpochRecord),
) -> Result<TransferOutcome> {
    let scaler = scaler_of(base)?;
    let base_net = base.network()?;
    if base_net.arch().input_n != dataset.manifest.n {
        return Err(Error::Core(voxhomog_core::Error::ShapeMismatch(format!(
            "base checkpoint expects {}^3 grids, dataset has {}^3",
            base_net.arch().input_n,
            dataset.manifest.n
        ))));
    }
    let train = SplitTensors::load(dataset, Split::Train, &scaler)?;
    let val = SplitTensors::load(dataset, Split::Val, &scaler)?;
    let t = &cfg.transfer;
    let init = seed::derive_tagged(cfg.seed, stream::TRANSFER_INIT);
    let shuffle = seed::derive_tagged(cfg.seed, stream::TRANSFER_SHUFFLE);

    let mut tl = extend_for_transfer(&base_net, &t.spec(), init)?;
    let tl_out = fit(&mut tl, &train, &val, &t.train, shuffle, &mut |r| on_epoch(Model::Transfer, r))?;

    let scratch = if t.baseline {
        let mut ts = Network::new(tl.arch().clone(), init)?;
        let out = fit(&mut ts, &train, &val, &t.train, shuffle, &mut |r| on_epoch(Model::Scratch, r))?;
        Some((ts, out))
    } else {
        None
    };

    let scratch_log = scratch.as_ref().map(|(_, o)| &o.log.epochs);
    let curve = tl_out
        .log
        .epochs
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let s = scratch_log.and_then(|l| l.get(i));
            CurvePoint {
                epoch: r.epoch,
                transfer_train: r.train_loss,
                transfer_val: r.val_loss,
                scratch_train: s.map(|s| s.train_loss),
                scratch_val: s.map(|s| s.val_loss),
            }
        })
        .collect();
    Ok(TransferOutcome {
        transfer: to_checkpoint(&tl, tl_out, base, cfg.seed, Some(base_hash.to_string())),
        scratch: scratch.map(|(net, out)| to_checkpoint(&net, out, base, cfg.seed, None)),
        curve,
    })
}

/// `epoch,transfer_train,transfer_val,scratch_train,scratch_val`; the
/// scratch columns are empty without a baseline.
pub fn curve_csv(curve: &[CurvePoint]) -> String {
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let mut s = String::from("epoch,transfer_train,transfer_val,scratch_train,scratch_val\n");
    for p in curve {
        s.push_str(&format!(
            "{},{},{},{},{}\n",
            p.epoch,
            p.transfer_train,
            p.transfer_val,
            opt(p.scratch_train),
            opt(p.scratch_val)
        ));
    }
    s
}

