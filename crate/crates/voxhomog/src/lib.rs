//! File formats, run configuration and pipelines around `voxhomog-core`.
//!
//! * [`cli`]: the `voxhomog` command-line front end.
//! * [`config`]: the TOML/JSON run configuration with field-level errors.
//! * [`io`]: phase grids, label tables, checkpoints and JSON artifacts.
//! * [`pipeline`]: dataset generation, training, evaluation, uncertainty
//!   propagation, transfer learning and feature-map export.
//!
//! Every artifact is a deterministic function of the config and seed;
//! thread count only changes wall time.

pub mod cli;
pub mod config;
pub mod error;
pub mod io;
pub mod pipeline;

pub use error::{Error, Result};
