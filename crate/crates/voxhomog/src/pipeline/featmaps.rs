//! Slices of conv activations for visual inspection (`VXFM` container).
//!
//! The data section holds `channels` maps of `extent^2` values followed by
//! the matching input slice of `input_n^2` values. In every 2D slice the
//! lower-indexed free axis runs fastest.

use std::path::Path;

use serde::{Deserialize, Serialize};
use voxhomog_core::nn::network::grid_input;
use voxhomog_core::nn::Network;
use voxhomog_core::voxel::PhaseGrid;

use crate::error::{Error, Result};
use crate::io::{self, blob};

const MAGIC: &[u8; 4] = b"VXFM";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureMapHeader {
    pub layer: usize,
    pub channels: usize,
    pub extent: usize,
    pub axis: Axis,
    pub index: usize,
    pub input_n: usize,
    /// Input plane at the same relative position as `index`.
    pub input_index: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMaps {
    pub header: FeatureMapHeader,
    pub maps: Vec<f32>,
    pub input: Vec<f32>,
}

/// Plane `index` along `axis` of each channel of a channels-first cube.
pub fn slice(values: &[f32], channels: usize, n: usize, axis: Axis, index: usize) -> Vec<f32> {
    let mut out = Vec::with_capacity(channels * n * n);
    for c in 0..channels {
        let vol = &values[c * n * n * n..(c + 1) * n * n * n];
        for b in 0..n {
            for a in 0..n {
                let (i, j, k) = match axis {
                    Axis::X => (index, a, b),
                    Axis::Y => (a, index, b),
                    Axis::Z => (a, b, index),
                };
                out.push(vol[i + n * (j + n * k)]);
            }
        }
    }
    out
}

pub fn feature_maps(net: &Network<f32>, grid: &PhaseGrid, layer: usize, axis: Axis, index: usize) -> Result<FeatureMaps> {
    let n = grid.n();
    if n != net.arch().input_n {
        return Err(Error::Core(voxhomog_core::Error::ShapeMismatch(format!(
            "network expects {}^3 grids, got {n}^3",
            net.arch().input_n
        ))));
    }
    let x = grid_input::<f32>(grid);
    let (channels, extent, values) = net.conv_activation(layer, &x)?;
    if index >= extent {
        return Err(Error::Core(voxhomog_core::Error::IndexOutOfRange {
            what: "slice",
            index,
            len: extent,
        }));
    }
    let input_index = (((index as f64 + 0.5) * n as f64 / extent as f64) as usize).min(n - 1);
    Ok(FeatureMaps {
        header: FeatureMapHeader {
            layer,
            channels,
            extent,
            axis,
            index,
            input_n: n,
            input_index,
        },
        maps: slice(&values, channels, extent, axis, index),
        input: slice(&x, 1, n, axis, input_index),
    })
}

pub fn encode(fm: &FeatureMaps) -> Vec<u8> {
    let mut data = fm.maps.clone();
    data.extend_from_slice(&fm.input);
    blob::encode(MAGIC, &fm.header, &data)
}

pub fn decode(path: &Path, bytes: &[u8]) -> Result<FeatureMaps> {
    let (header, mut data): (FeatureMapHeader, Vec<f32>) = blob::decode(path, MAGIC, bytes)?;
    let m = header.channels * header.extent * header.extent;
    if data.len() != m + header.input_n * header.input_n {
        return Err(Error::format(path, format!("unexpected value count {}", data.len())));
    }
    let input = data.split_off(m);
    Ok(FeatureMaps { header, maps: data, input })
}

pub fn write_feature_maps(path: &Path, fm: &FeatureMaps) -> Result<()> {
    io::write_bytes(path, &encode(fm))
}

pub fn read_feature_maps(path: &Path) -> Result<FeatureMaps> {
    decode(path, &io::read_bytes(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slices_follow_the_axis() {
        let n = 3;
        let vol: Vec<f32> = (0..27).map(|v| v as f32).collect();
        assert_eq!(slice(&vol, 1, n, Axis::X, 1), [1., 4., 7., 10., 13., 16., 19., 22., 25.]);
        assert_eq!(slice(&vol, 1, n, Axis::Y, 0), [0., 1., 2., 9., 10., 11., 18., 19., 20.]);
        assert_eq!(slice(&vol, 1, n, Axis::Z, 2), (18..27).map(|v| v as f32).collect::<Vec<_>>());
    }
}
