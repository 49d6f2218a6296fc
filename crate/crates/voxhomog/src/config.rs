//! Run configuration. Every field has a default, unknown keys are
//! rejected, and the resolved config is echoed next to each command's
//! outputs so the run can be repeated from that file alone.

use std::path::Path;

use serde::{Deserialize, Serialize};
use voxhomog_core::homog::{Phases, SolverOptions};
use voxhomog_core::microgeom::{PackingConfig, DEFAULT_DECAY, MAX_TARGET_VF};
use voxhomog_core::nn::{Activation, AdamConfig, NetworkArch, Pooling, Preset, TrainConfig, TrainableScope, TransferSpec};

use crate::error::{Error, Result};
use crate::io::grid::GridEncoding;

/// File name of the echoed config inside an output directory.
pub const ECHO_FILE: &str = "config.toml";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Root of every random stream in the run.
    pub seed: u64,
    pub dataset: DatasetConfig,
    pub phases: Phases,
    pub solver: SolverOptions,
    pub network: NetworkConfig,
    pub train: TrainSettings,
    pub uq: UqConfig,
    pub transfer: TransferConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 42,
            dataset: DatasetConfig::default(),
            phases: Phases::default(),
            solver: SolverOptions::default(),
            network: NetworkConfig::default(),
            train: TrainSettings::default(),
            uq: UqConfig::default(),
            transfer: TransferConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    /// Voxels per edge.
    pub n: usize,
    pub count: usize,
    pub vf_min: f64,
    pub vf_max: f64,
    pub n_bins: usize,
    /// Sample counts fall off as `exp(-decay * vf)`.
    pub decay: f64,
    /// Train : validation : test.
    pub split: [usize; 3],
    pub grid_encoding: GridEncoding,
    pub packing: PackingConfig,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            n: 33,
            count: 300,
            vf_min: 0.02,
            vf_max: 0.28,
            n_bins: 14,
            decay: DEFAULT_DECAY,
            split: [240, 30, 30],
            grid_encoding: GridEncoding::Raw,
            packing: PackingConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkConfig {
    pub preset: Preset,
    pub pooling: Pooling,
    pub output_activation: Activation,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig {
            preset: Preset::Desk,
            pooling: Pooling::Every,
            output_activation: Activation::Sigmoid,
        }
    }
}

impl NetworkConfig {
    pub fn arch(&self, n: usize) -> voxhomog_core::Result<NetworkArch> {
        self.preset.arch(n, &self.pooling, self.output_activation)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSettings {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    /// Epochs without a new best validation loss before stopping; 0 never
    /// stops early.
    pub patience: usize,
}

impl Default for TrainSettings {
    fn default() -> Self {
        TrainSettings {
            epochs: 300,
            batch_size: 25,
            adam: AdamConfig::default(),
            patience: 100,
        }
    }
}

impl TrainSettings {
    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            adam: self.adam,
            patience: (self.patience > 0).then_some(self.patience),
            seed,
        }
    }

    fn validate(&self, prefix: &str) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::config(format!("{prefix}.epochs"), "must be at least 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::config(format!("{prefix}.batch_size"), "must be at least 1"));
        }
        self.adam
            .validate()
            .map_err(|e| Error::config(format!("{prefix}.adam"), e))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UqConfig {
    pub vf_mean: f64,
    pub vf_sd: f64,
    pub n_samples: usize,
    /// Histogram bins per component.
    pub bins: usize,
    /// Also label every draw with the finite-element oracle.
    pub oracle: bool,
}

impl Default for UqConfig {
    fn default() -> Self {
        UqConfig {
            vf_mean: 0.14,
            vf_sd: 0.007,
            n_samples: 50,
            bins: 10,
            oracle: true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransferConfig {
    pub filters: usize,
    pub kernel: usize,
    pub scope: TrainableScope,
    /// Also train the same extended arch from scratch for comparison.
    pub baseline: bool,
    pub train: TrainSettings,
}

impl Default for TransferConfig {
    fn default() -> Self {
        TransferConfig {
            filters: 32,
            kernel: 5,
            scope: TrainableScope::Head,
            baseline: true,
            train: TrainSettings {
                epochs: 200,
                patience: 0,
                ..TrainSettings::default()
            },
        }
    }
}

impl TransferConfig {
    pub fn spec(&self) -> TransferSpec {
        TransferSpec {
            filters: self.filters,
            kernel: self.kernel,
            scope: self.scope,
        }
    }
}

impl RunConfig {
    /// Reads TOML, or JSON when the extension is `.json`.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path.extension().is_some_and(|e| e == "json"))
    }

    pub fn parse(text: &str, json: bool) -> Result<Self> {
        let cfg: RunConfig = if json {
            serde_json::from_str(text).map_err(|e| Error::config("config", e))?
        } else {
            toml::from_str(text).map_err(|e| Error::config("config", e.message()))?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let d = &self.dataset;
        if d.n < 3 || d.n > u16::MAX as usize {
            return Err(Error::config("dataset.n", format!("must lie in [3, 65535] (got {})", d.n)));
        }
        if !(d.vf_min >= 0.0 && d.vf_min <= MAX_TARGET_VF) {
            return Err(Error::config(
                "dataset.vf_min",
                format!("must lie in [0, {MAX_TARGET_VF}] (got {})", d.vf_min),
            ));
        }
        if !(d.vf_max > 0.0 && d.vf_max <= MAX_TARGET_VF) {
            return Err(Error::config(
                "dataset.vf_max",
                format!("must lie in (0, {MAX_TARGET_VF}] (got {})", d.vf_max),
            ));
        }
        if d.vf_min >= d.vf_max {
            return Err(Error::config("dataset.vf_min", "must be below dataset.vf_max"));
        }
        if d.n_bins < 2 {
            return Err(Error::config("dataset.n_bins", "must be at least 2"));
        }
        if d.count < d.n_bins {
            return Err(Error::config(
                "dataset.count",
                format!("must be at least dataset.n_bins = {} (got {})", d.n_bins, d.count),
            ));
        }
        if !(d.decay.is_finite() && d.decay >= 0.0) {
            return Err(Error::config("dataset.decay", "must be a non-negative number"));
        }
        if d.split.iter().sum::<usize>() == 0 {
            return Err(Error::config("dataset.split", "needs a positive entry"));
        }
        d.packing.validate().map_err(|e| Error::config("dataset.packing", e))?;
        self.phases.matrix.validate().map_err(|e| Error::config("phases.matrix", e))?;
        self.phases
            .inclusion
            .validate()
            .map_err(|e| Error::config("phases.inclusion", e))?;
        self.solver.validate().map_err(|e| Error::config("solver", e))?;
        self.network.arch(d.n).map_err(|e| Error::config("network", e))?;
        self.train.validate("train")?;

        let u = &self.uq;
        if !(u.vf_mean > 0.0 && u.vf_mean <= MAX_TARGET_VF) {
            return Err(Error::config(
                "uq.vf_mean",
                format!("must lie in (0, {MAX_TARGET_VF}] (got {})", u.vf_mean),
            ));
        }
        if !(u.vf_sd.is_finite() && u.vf_sd > 0.0) {
            return Err(Error::config("uq.vf_sd", format!("must be positive (got {})", u.vf_sd)));
        }
        if u.n_samples < 2 {
            return Err(Error::config("uq.n_samples", "must be at least 2"));
        }
        if u.bins == 0 {
            return Err(Error::config("uq.bins", "must be at least 1"));
        }

        let t = &self.transfer;
        if t.filters == 0 {
            return Err(Error::config("transfer.filters", "must be at least 1"));
        }
        if t.kernel % 2 == 0 {
            return Err(Error::config("transfer.kernel", "must be odd"));
        }
        t.train.validate("transfer.train")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid_and_round_trip() {
        let cfg = RunConfig::default();
        cfg.validate().unwrap();
        let text = cfg.to_toml();
        assert_eq!(RunConfig::parse(&text, false).unwrap(), cfg);
        let json = serde_json::to_string(&cfg).unwrap();
        assert_eq!(RunConfig::parse(&json, true).unwrap(), cfg);
    }

    #[test]
    fn partial_files_fill_defaults() {
        let cfg = RunConfig::parse("seed = 7\n[dataset]\ncount = 20\nsplit = [14, 3, 3]\n", false).unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.dataset.count, 20);
        assert_eq!(cfg.dataset.n, 33);
        assert_eq!(cfg.train.batch_size, 25);
    }

    #[test]
    fn errors_name_the_field() {
        let e = RunConfig::parse("[dataset]\nvf_max = 0.9\n", false).unwrap_err();
        assert_eq!(e.exit_code(), 2);
        assert!(e.to_string().contains("dataset.vf_max"), "{e}");

        let e = RunConfig::parse("[dataset]\nvf_maxx = 0.2\n", false).unwrap_err();
        assert_eq!(e.exit_code(), 2);
        assert!(e.to_string().contains("vf_maxx"), "{e}");

        let e = RunConfig::parse("[uq]\nvf_sd = 0.0\n", false).unwrap_err();
        assert!(e.to_string().contains("uq.vf_sd"), "{e}");

        let e = RunConfig::parse("[dataset.packing]\nr_min = 0.2\n", false).unwrap_err();
        assert!(e.to_string().contains("dataset.packing"), "{e}");
    }

    #[test]
    fn pooling_pattern_in_toml() {
        let cfg = RunConfig::parse("[network]\npooling = { pattern = [true, false] }\n", false).unwrap();
        assert_eq!(cfg.network.pooling, Pooling::Pattern(vec![true, false]));
        assert_eq!(RunConfig::parse(&cfg.to_toml(), false).unwrap(), cfg);
    }
}
