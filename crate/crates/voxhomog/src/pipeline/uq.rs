//! Propagating volume-fraction scatter through the surrogate and the
//! finite-element oracle.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use voxhomog_core::homog::{COMPONENT_NAMES, COMPONENT_UNITS};
use voxhomog_core::microgeom::{PackingConfig, MAX_TARGET_VF};
use voxhomog_core::nn::Checkpoint;
use voxhomog_core::seed;
use voxhomog_core::stats::{self, Histogram};
use voxhomog_core::voxel::voxel_vf;

use super::evaluate::{predict, scaler_of};
use super::{make_sample, stream, SampleSpec};
use crate::config::{RunConfig, UqConfig};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UqDraw {
    pub index: usize,
    /// Normal draw clamped to the admissible range.
    pub target_vf: f64,
    pub seed: u64,
    pub voxel_vf: f64,
    pub surrogate: Option<[f64; 12]>,
    pub oracle: Option<[f64; 12]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComponentSummary {
    pub component: String,
    pub unit: String,
    /// Histogram edges; one more than `counts`.
    pub bins: Vec<f64>,
    pub counts: Vec<usize>,
    pub mu: f64,
    pub sigma: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UqReport {
    pub config: UqConfig,
    pub draws: Vec<UqDraw>,
    pub surrogate: Option<Vec<ComponentSummary>>,
    pub oracle: Option<Vec<ComponentSummary>>,
}

/// Target volume fractions: `N(vf_mean, vf_sd)` draws clamped to
/// `[0, MAX_TARGET_VF]`.
pub fn draw_targets(uq: &UqConfig, seed: u64) -> Result<Vec<f64>> {
    let normal = Normal::new(uq.vf_mean, uq.vf_sd).map_err(|e| Error::config("uq.vf_sd", e))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..uq.n_samples)
        .map(|_| normal.sample(&mut rng).clamp(0.0, MAX_TARGET_VF))
        .collect())
}

pub fn summarize(rows: &[[f64; 12]], bins: usize) -> Result<Vec<ComponentSummary>> {
    (0..12)
        .map(|c| {
            let xs: Vec<f64> = rows.iter().map(|r| r[c]).collect();
            let (mu, sigma) = stats::gaussian_fit(&xs)?;
            let Histogram { edges, counts } = stats::histogram(&xs, bins)?;
            Ok(ComponentSummary {
                component: COMPONENT_NAMES[c].to_string(),
                unit: COMPONENT_UNITS[c].to_string(),
                bins: edges,
                counts,
                mu,
                sigma,
            })
        })
        .collect()
}

/// Draws `uq.n_samples` microstructures at `n^3`, then evaluates the
/// surrogate (when a checkpoint is given) and the oracle (when enabled).
pub fn run_uq(
    cfg: &RunConfig,
    uq: &UqConfig,
    packing: &PackingConfig,
    n: usize,
    checkpoint: Option<&Checkpoint>,
) -> Result<UqReport> {
    if checkpoint.is_none() && !uq.oracle {
        return Err(Error::config("uq.oracle", "needs a checkpoint or the oracle enabled"));
    }
    let targets = draw_targets(uq, seed::derive_tagged(cfg.seed, stream::UQ_DRAWS))?;
    let base = seed::derive_tagged(cfg.seed, stream::UQ_GEOMETRY);
    let spec = SampleSpec {
        packing,
        n,
        phases: &cfg.phases,
        solver: &cfg.solver,
        oracle: uq.oracle,
    };
    let samples = targets
        .par_iter()
        .enumerate()
        .map(|(i, &vf)| make_sample(&spec, vf, base, i))
        .collect::<Result<Vec<_>>>()?;

    let surrogate_rows = match checkpoint {
        Some(ck) => {
            let net = ck.network()?;
            let grids: Vec<_> = samples.iter().map(|s| s.grid.clone()).collect();
            Some(predict(&net, &scaler_of(ck)?, &grids)?)
        }
        None => None,
    };
    let draws: Vec<UqDraw> = samples
        .iter()
        .enumerate()
        .map(|(i, s)| UqDraw {
            index: i,
            target_vf: targets[i],
            seed: s.geometry.seed,
            voxel_vf: voxel_vf(&s.grid),
            surrogate: surrogate_rows.as_ref().map(|r| r[i]),
            oracle: s.labels,
        })
        .collect();
    let oracle_rows: Option<Vec<[f64; 12]>> = draws.iter().map(|d| d.oracle).collect();
    Ok(UqReport {
        config: *uq,
        surrogate: surrogate_rows.as_deref().map(|r| summarize(r, uq.bins)).transpose()?,
        oracle: oracle_rows.as_deref().map(|r| summarize(r, uq.bins)).transpose()?,
        draws,
    })
}
