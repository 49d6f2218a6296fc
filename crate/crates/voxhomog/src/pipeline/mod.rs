//! Orchestration: dataset construction, surrogate training and
//! evaluation, uncertainty propagation and transfer learning.

pub mod dataset;
pub mod evaluate;
pub mod featmaps;
pub mod training;
pub mod transfer;
pub mod uq;

use voxhomog_core::homog::{self, Homogenization, Phases, SolverOptions};
use voxhomog_core::microgeom::{self, PackingConfig, RveGeometry};
use voxhomog_core::seed;
use voxhomog_core::voxel::{self, PhaseGrid};

use crate::error::{Error, Result};

/// Fresh seeds tried after a failed sample.
pub const RETRIES: u64 = 3;

/// Named random streams derived from the run seed.
pub mod stream {
    pub const DATASET: &str = "dataset";
    pub const SPLIT: &str = "split";
    pub const INIT: &str = "init";
    pub const SHUFFLE: &str = "shuffle";
    pub const UQ_DRAWS: &str = "uq-draws";
    pub const UQ_GEOMETRY: &str = "uq-geometry";
    pub const TRANSFER_INIT: &str = "transfer-init";
    pub const TRANSFER_SHUFFLE: &str = "transfer-shuffle";
}

/// Seed of sample `id`; attempt 0 is the plain derived seed.
pub fn sample_seed(base: u64, id: usize, attempt: u64) -> u64 {
    let s = seed::derive(base, id as u64);
    if attempt == 0 {
        s
    } else {
        seed::derive(s, attempt)
    }
}

/// A generated, voxelized and (optionally) homogenized sample.
pub struct LabeledSample {
    pub geometry: RveGeometry,
    pub grid: PhaseGrid,
    pub homogenization: Option<Homogenization>,
    pub labels: Option<[f64; 12]>,
    pub attempt: u64,
}

pub struct SampleSpec<'a> {
    pub packing: &'a PackingConfig,
    pub n: usize,
    pub phases: &'a Phases,
    pub solver: &'a SolverOptions,
    pub oracle: bool,
}

/// Packs, voxelizes and labels one sample, retrying with fresh seeds.
pub fn make_sample(spec: &SampleSpec, target_vf: f64, base: u64, id: usize) -> Result<LabeledSample> {
    let mut last = None;
    for attempt in 0..=RETRIES {
        match try_sample(spec, target_vf, sample_seed(base, id, attempt)) {
            Ok((geometry, grid, h)) => {
                let labels = match &h {
                    Some(h) => Some(
                        homog::extract_engineering_constants(&h.stiffness)
                            .map_err(|source| Error::Sample { id, source })?
                            .to_array(),
                    ),
                    None => None,
                };
                return Ok(LabeledSample {
                    geometry,
                    grid,
                    homogenization: h,
                    labels,
                    attempt,
                });
            }
            Err(e) => last = Some(e),
        }
    }
    Err(Error::Sample {
        id,
        source: last.expect("at least one attempt"),
    })
}

fn try_sample(
    spec: &SampleSpec,
    target_vf: f64,
    seed: u64,
) -> voxhomog_core::Result<(RveGeometry, PhaseGrid, Option<Homogenization>)> {
    let geometry = microgeom::generate_rve(target_vf, spec.packing, seed)?;
    let grid = voxel::voxelize(&geometry, spec.n)?;
    let h = if spec.oracle {
        Some(homog::homogenize(&grid, spec.phases, spec.solver)?)
    } else {
        None
    };
    Ok((geometry, grid, h))
}
