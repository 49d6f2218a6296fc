//! Architecture descriptors, presets and shape tracing.

use alloc::format;
use alloc::vec::Vec;
use core::ops::Range;

use serde::{Deserialize, Serialize};

use super::OUTPUT_DIM;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Sigmoid,
    Identity,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvSpec {
    pub filters: usize,
    /// Cubic filter edge; odd.
    pub kernel: usize,
    /// Whether a 2^3 max-pool follows the ReLU.
    pub pool: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FcSpec {
    pub width: usize,
    pub activation: Activation,
}

/// Where max-pooling goes when building from a preset.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pooling {
    /// After every conv layer whose output extent is at least 2.
    Every,
    /// One flag per conv layer.
    Pattern(Vec<bool>),
}

/// Ordered stage descriptors for a single-channel cubic input.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkArch {
    pub input_n: usize,
    pub convs: Vec<ConvSpec>,
    /// Hidden layers followed by the output layer.
    pub fcs: Vec<FcSpec>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvTrace {
    pub in_channels: usize,
    pub in_extent: usize,
    pub out_extent: usize,
    /// Extent after pooling (equal to `out_extent` without pooling).
    pub pooled_extent: usize,
    pub channels: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShapeTrace {
    pub convs: Vec<ConvTrace>,
    pub flatten: usize,
}

impl ShapeTrace {
    /// Spatial extents in order: input, then conv and pool outputs.
    pub fn extents(&self, input_n: usize) -> Vec<usize> {
        let mut v = alloc::vec![input_n];
        for c in &self.convs {
            v.push(c.out_extent);
            if c.pooled_extent != c.out_extent {
                v.push(c.pooled_extent);
            }
        }
        v
    }
}

/// Location of one stage's parameters in the flat vector. Conv weights are
/// ordered `[out, in, p, q, r]` (row-major, `r` fastest) where `p, q, r`
/// run along x, y, z; FC weights are `[out, in]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StageLayout {
    pub weights: Range<usize>,
    pub bias: Range<usize>,
    pub fan_in: usize,
}

impl StageLayout {
    pub fn range(&self) -> Range<usize> {
        self.weights.start..self.bias.end
    }
}

/// Named architectures. `Case1`..`Case7` are the full-resolution variants
/// of the architecture study; `Desk` is sized for 33^3 inputs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Desk,
    Case1,
    Case2,
    Case3,
    Case4,
    Case5,
    Case6,
    Case7,
}

impl Preset {
    pub const ALL: [Preset; 8] = [
        Preset::Desk,
        Preset::Case1,
        Preset::Case2,
        Preset::Case3,
        Preset::Case4,
        Preset::Case5,
        Preset::Case6,
        Preset::Case7,
    ];

    /// `(filters per conv layer, hidden FC widths)`; every filter is 5^3.
    pub fn layers(self) -> (&'static [usize], &'static [usize]) {
        match self {
            Preset::Desk => (&[8, 16], &[32, 16]),
            Preset::Case1 => (&[16, 16, 32], &[32, 16]),
            Preset::Case2 => (&[16, 16, 32], &[64, 32]),
            Preset::Case3 => (&[16, 16, 32], &[128, 64]),
            Preset::Case4 => (&[16, 16, 16, 32], &[64, 32]),
            Preset::Case5 => (&[16, 32, 32], &[64, 32]),
            Preset::Case6 => (&[16, 16, 16], &[64, 32]),
            Preset::Case7 => (&[16, 16, 32], &[64, 32, 32]),
        }
    }

    pub fn arch(self, input_n: usize, pooling: &Pooling, output_activation: Activation) -> Result<NetworkArch> {
        let (filters, hidden) = self.layers();
        let convs: Vec<(usize, usize)> = filters.iter().map(|&f| (f, 5)).collect();
        NetworkArch::build(input_n, &convs, pooling, hidden, output_activation)
    }
}

impl NetworkArch {
    /// Builds an arch from `(filters, kernel)` pairs and hidden widths.
    /// Hidden FC layers use sigmoid; the output layer has [`OUTPUT_DIM`]
    /// units.
    pub fn build(
        input_n: usize,
        convs: &[(usize, usize)],
        pooling: &Pooling,
        hidden: &[usize],
        output_activation: Activation,
    ) -> Result<Self> {
        if let Pooling::Pattern(p) = pooling {
            if p.len() != convs.len() {
                return Err(Error::config(format!(
                    "pooling pattern has {} entries for {} conv layers",
                    p.len(),
                    convs.len()
                )));
            }
        }
        let mut specs = Vec::with_capacity(convs.len());
        let mut extent = input_n;
        for (i, &(filters, kernel)) in convs.iter().enumerate() {
            if kernel == 0 || extent < kernel {
                return Err(Error::shape(format!(
                    "conv layer {i}: extent {extent} is smaller than kernel {kernel}"
                )));
            }
            let out = extent - kernel + 1;
            let pool = match pooling {
                Pooling::Every => out >= 2,
                Pooling::Pattern(p) => p[i],
            };
            specs.push(ConvSpec { filters, kernel, pool });
            extent = if pool { out / 2 } else { out };
        }
        let mut fcs: Vec<FcSpec> = hidden
            .iter()
            .map(|&width| FcSpec {
                width,
                activation: Activation::Sigmoid,
            })
            .collect();
        fcs.push(FcSpec {
            width: OUTPUT_DIM,
            activation: output_activation,
        });
        let arch = NetworkArch {
            input_n,
            convs: specs,
            fcs,
        };
        arch.trace()?;
        Ok(arch)
    }

    /// Validates the stack and traces extents through it.
    pub fn trace(&self) -> Result<ShapeTrace> {
        if self.input_n == 0 {
            return Err(Error::shape("input extent must be positive"));
        }
        let mut convs = Vec::with_capacity(self.convs.len());
        let mut extent = self.input_n;
        let mut channels = 1;
        for (i, c) in self.convs.iter().enumerate() {
            if c.kernel % 2 == 0 {
                return Err(Error::shape(format!("conv layer {i}: kernel {} is not odd", c.kernel)));
            }
            if c.filters == 0 {
                return Err(Error::shape(format!("conv layer {i}: no filters")));
            }
            if extent < c.kernel {
                return Err(Error::shape(format!(
                    "conv layer {i}: extent {extent} is smaller than kernel {}",
                    c.kernel
                )));
            }
            let out = extent - c.kernel + 1;
            if c.pool && out < 2 {
                return Err(Error::shape(format!("conv layer {i}: cannot pool extent {out}")));
            }
            let pooled = if c.pool { out / 2 } else { out };
            convs.push(ConvTrace {
                in_channels: channels,
                in_extent: extent,
                out_extent: out,
                pooled_extent: pooled,
                channels: c.filters,
            });
            extent = pooled;
            channels = c.filters;
        }
        if self.fcs.is_empty() {
            return Err(Error::shape("at least the output layer is required"));
        }
        if let Some(i) = self.fcs.iter().position(|f| f.width == 0) {
            return Err(Error::shape(format!("fc layer {i} has zero width")));
        }
        let last = self.fcs.last().map(|f| f.width).unwrap_or(0);
        if last != OUTPUT_DIM {
            return Err(Error::shape(format!("output layer has {last} units, expected {OUTPUT_DIM}")));
        }
        Ok(ShapeTrace {
            convs,
            flatten: channels * extent * extent * extent,
        })
    }

    pub fn n_stages(&self) -> usize {
        self.convs.len() + self.fcs.len()
    }

    /// Per-stage parameter ranges, conv stages first.
    pub fn param_layout(&self) -> Result<Vec<StageLayout>> {
        let trace = self.trace()?;
        let mut out = Vec::with_capacity(self.n_stages());
        let mut at = 0;
        let mut push = |n_w: usize, n_b: usize, fan_in: usize| {
            let w = at..at + n_w;
            let b = at + n_w..at + n_w + n_b;
            at += n_w + n_b;
            StageLayout {
                weights: w,
                bias: b,
                fan_in,
            }
        };
        for (c, t) in self.convs.iter().zip(&trace.convs) {
            let fan_in = t.in_channels * c.kernel * c.kernel * c.kernel;
            out.push(push(c.filters * fan_in, c.filters, fan_in));
        }
        let mut width = trace.flatten;
        for f in &self.fcs {
            out.push(push(f.width * width, f.width, width));
            width = f.width;
        }
        Ok(out)
    }

    pub fn n_params(&self) -> Result<usize> {
        Ok(self.param_layout()?.last().map(|l| l.bias.end).unwrap_or(0))
    }
}
