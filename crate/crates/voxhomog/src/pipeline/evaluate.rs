//! Prediction in physical units and per-component error reports.

use serde::{Deserialize, Serialize};
use voxhomog_core::homog::{COMPONENT_NAMES, N_MODULI};
use voxhomog_core::nn::network::grid_input;
use voxhomog_core::nn::{Checkpoint, LabelScaler, Network};
use voxhomog_core::stats::{self, Split};
use voxhomog_core::voxel::PhaseGrid;

use super::dataset::Dataset;
use crate::error::{Error, Result};

pub fn scaler_of(ck: &Checkpoint) -> Result<LabelScaler> {
    ck.scaler
        .ok_or_else(|| Error::config("checkpoint", "has no label scaler; it was never trained"))
}

/// Unscaled predictions, one row per grid.
pub fn predict(net: &Network<f32>, scaler: &LabelScaler, grids: &[PhaseGrid]) -> Result<Vec<[f64; 12]>> {
    let inputs: Vec<Vec<f32>> = grids.iter().map(grid_input::<f32>).collect();
    let views: Vec<&[f32]> = inputs.iter().map(Vec::as_slice).collect();
    let out = net.predict_many(0, &views)?;
    out.iter()
        .map(|y| {
            if y.len() != 12 {
                return Err(Error::Core(voxhomog_core::Error::ShapeMismatch(format!(
                    "network emits {} values, expected 12",
                    y.len()
                ))));
            }
            let s: [f64; 12] = core::array::from_fn(|i| y[i] as f64);
            Ok(scaler.unscale(&s))
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComponentError {
    pub component: String,
    pub mare: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MareReport {
    pub split: Split,
    pub samples: usize,
    pub components: Vec<ComponentError>,
    pub moduli_max: f64,
    pub poisson_max: f64,
}

impl MareReport {
    pub fn from_predictions(split: Split, pred: &[[f64; 12]], truth: &[[f64; 12]]) -> Result<Self> {
        let m = stats::mare(pred, truth)?;
        Ok(MareReport {
            split,
            samples: truth.len(),
            components: COMPONENT_NAMES
                .iter()
                .zip(m)
                .map(|(c, mare)| ComponentError {
                    component: c.to_string(),
                    mare,
                })
                .collect(),
            moduli_max: m[..N_MODULI].iter().copied().fold(0.0, f64::max),
            poisson_max: m[N_MODULI..].iter().copied().fold(0.0, f64::max),
        })
    }

    pub fn values(&self) -> Vec<f64> {
        self.components.iter().map(|c| c.mare).collect()
    }
}

/// MARE of `ck` on one split of `dataset`, in physical units.
pub fn evaluate(ck: &Checkpoint, dataset: &Dataset, split: Split) -> Result<MareReport> {
    let net = ck.network()?;
    if net.arch().input_n != dataset.manifest.n {
        return Err(Error::Core(voxhomog_core::Error::ShapeMismatch(format!(
            "checkpoint expects {}^3 grids, dataset has {}^3",
            net.arch().input_n,
            dataset.manifest.n
        ))));
    }
    let scaler = scaler_of(ck)?;
    let (grids, labels) = dataset.load_split(split)?;
    let pred = predict(&net, &scaler, &grids)?;
    MareReport::from_predictions(split, &pred, &labels)
}
