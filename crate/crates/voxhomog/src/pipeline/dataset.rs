//! Dataset construction and loading.
//!
//! Layout of a dataset directory:
//! `manifest.json`, `labels.csv`, `config.toml`,
//! `geometry/sample_NNNNN.json` and `grids/sample_NNNNN.phgr`.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use voxhomog_core::microgeom::{self, SampleSchedule, ShapeKind};
use voxhomog_core::seed;
use voxhomog_core::stats::{self, Split};
use voxhomog_core::voxel::{voxel_vf, PhaseGrid};

use super::{make_sample, stream, SampleSpec};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::io::{self, grid, labels::LabelRow};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const LABELS_FILE: &str = "labels.csv";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleRecord {
    pub id: usize,
    pub target_vf: f64,
    /// Seed the successful attempt used.
    pub seed: u64,
    /// 0 unless earlier seeds failed.
    pub attempt: u64,
    pub achieved_vf: f64,
    pub voxel_vf: f64,
    /// Paths relative to the dataset directory.
    pub geometry: String,
    pub grid: String,
    pub labels: [f64; 12],
    pub asymmetry: f64,
    pub split: Split,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub dataset_seed: u64,
    pub n: usize,
    pub shape_kind: ShapeKind,
    pub schedule: SampleSchedule,
    pub split_ratio: [usize; 3],
    pub samples: Vec<SampleRecord>,
}

impl DatasetManifest {
    pub fn split(&self, split: Split) -> impl Iterator<Item = &SampleRecord> {
        self.samples.iter().filter(move |s| s.split == split)
    }
}

fn sample_name(id: usize) -> String {
    format!("sample_{id:05}")
}

/// Generates, labels and writes every scheduled sample, then the label
/// table and the manifest. Samples are processed in parallel; all writes
/// happen afterwards in id order.
pub fn build_dataset(cfg: &RunConfig, out: &Path, progress: &(dyn Fn(usize) + Sync)) -> Result<DatasetManifest> {
    cfg.validate()?;
    let d = &cfg.dataset;
    let schedule = microgeom::sample_schedule(d.vf_min, d.vf_max, d.n_bins, d.count, d.decay)?;
    let targets = schedule.targets();
    let dataset_seed = seed::derive_tagged(cfg.seed, stream::DATASET);
    let splits = stats::assign_splits(targets.len(), d.split, seed::derive_tagged(cfg.seed, stream::SPLIT))?;
    let spec = SampleSpec {
        packing: &d.packing,
        n: d.n,
        phases: &cfg.phases,
        solver: &cfg.solver,
        oracle: true,
    };

    let samples: Vec<Result<_>> = targets
        .par_iter()
        .enumerate()
        .map(|(id, &vf)| {
            let s = make_sample(&spec, vf, dataset_seed, id);
            progress(id);
            s
        })
        .collect();

    let mut records = Vec::with_capacity(samples.len());
    let mut rows = Vec::with_capacity(samples.len());
    for (id, s) in samples.into_iter().enumerate() {
        let s = s?;
        let name = sample_name(id);
        let geometry = format!("geometry/{name}.json");
        let grid_path = format!("grids/{name}.phgr");
        io::write_json(&out.join(&geometry), &s.geometry)?;
        grid::write_grid(&out.join(&grid_path), &s.grid, d.grid_encoding)?;
        let h = s.homogenization.expect("dataset samples are labeled");
        let labels = s.labels.expect("dataset samples are labeled");
        let vvf = voxel_vf(&s.grid);
        rows.push(LabelRow {
            sample_id: id,
            vf: vvf,
            values: labels,
            asymmetry: h.asymmetry,
        });
        records.push(SampleRecord {
            id,
            target_vf: targets[id],
            seed: s.geometry.seed,
            attempt: s.attempt,
            achieved_vf: s.geometry.achieved_vf,
            voxel_vf: vvf,
            geometry,
            grid: grid_path,
            labels,
            asymmetry: h.asymmetry,
            split: splits[id],
        });
    }
    let manifest = DatasetManifest {
        dataset_seed,
        n: d.n,
        shape_kind: d.packing.shape,
        schedule,
        split_ratio: d.split,
        samples: records,
    };
    io::labels::write_labels(&out.join(LABELS_FILE), &rows)?;
    io::write_json(&out.join(MANIFEST_FILE), &manifest)?;
    Ok(manifest)
}

/// A dataset directory with its manifest.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub dir: PathBuf,
    pub manifest: DatasetManifest,
}

impl Dataset {
    pub fn open(dir: &Path) -> Result<Self> {
        let manifest: DatasetManifest = io::read_json(&dir.join(MANIFEST_FILE))?;
        let mut seen = std::collections::HashSet::new();
        for s in &manifest.samples {
            if !seen.insert(s.id) {
                return Err(Error::format(dir.join(MANIFEST_FILE), format!("duplicate sample id {}", s.id)));
            }
        }
        Ok(Dataset {
            dir: dir.to_path_buf(),
            manifest,
        })
    }

    pub fn grid(&self, record: &SampleRecord) -> Result<PhaseGrid> {
        let g = grid::read_grid(&self.dir.join(&record.grid))?;
        if g.n() != self.manifest.n {
            return Err(Error::format(
                self.dir.join(&record.grid),
                format!("grid size {} differs from the manifest's {}", g.n(), self.manifest.n),
            ));
        }
        Ok(g)
    }

    /// Grids and raw labels of one split, in id order.
    pub fn load_split(&self, split: Split) -> Result<(Vec<PhaseGrid>, Vec<[f64; 12]>)> {
        let records: Vec<&SampleRecord> = self.manifest.split(split).collect();
        let grids = records.iter().map(|r| self.grid(r)).collect::<Result<Vec<_>>>()?;
        Ok((grids, records.iter().map(|r| r.labels).collect()))
    }
}
