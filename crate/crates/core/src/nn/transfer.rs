//! Extending a trained network with one more conv layer for fine-tuning.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::arch::{ConvSpec, NetworkArch};
use super::network::Network;
use super::Scalar;
use crate::error::{Error, Result};

/// Which stages of the extended network are trained.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainableScope {
    /// The new conv layer, the last hidden FC layer and the output layer.
    #[default]
    Head,
    /// The new conv layer and every FC layer.
    NewConvAndFc,
    /// Every stage.
    All,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransferSpec {
    pub filters: usize,
    pub kernel: usize,
    pub scope: TrainableScope,
}

impl Default for TransferSpec {
    fn default() -> Self {
        TransferSpec {
            filters: 32,
            kernel: 5,
            scope: TrainableScope::Head,
        }
    }
}

/// Arch of `base` with one conv layer appended to the conv stack (pooled
/// when its output extent is at least 2) and the same FC widths.
pub fn extended_arch(base: &NetworkArch, spec: &TransferSpec) -> Result<NetworkArch> {
    let trace = base.trace()?;
    let extent = trace.convs.last().map(|c| c.pooled_extent).unwrap_or(base.input_n);
    if spec.kernel > extent {
        return Err(Error::ShapeMismatch(alloc::format!(
            "added conv kernel {} does not fit the base stack's output extent {extent}",
            spec.kernel
        )));
    }
    let out = extent - spec.kernel + 1;
    let mut arch = base.clone();
    arch.convs.push(ConvSpec {
        filters: spec.filters,
        kernel: spec.kernel,
        pool: out >= 2,
    });
    arch.trace()?;
    Ok(arch)
}

/// Builds the extended network. All stages start from a fresh
/// initialisation with `seed` (so a from-scratch model with the same seed
/// differs only in the copied stages); then the base conv stages, and every
/// FC stage whose weight shape is unchanged, are copied from `base`.
/// Trainable flags follow `spec.scope`.
pub fn extend_for_transfer<S: Scalar>(base: &Network<S>, spec: &TransferSpec, seed: u64) -> Result<Network<S>> {
    let arch = extended_arch(base.arch(), spec)?;
    let mut net = Network::new(arch, seed)?;
    let nc_base = base.arch().convs.len();
    let nf = base.arch().fcs.len();
    let base_layout = base.layout().to_vec();
    let new_layout = net.layout().to_vec();
    let mut copy = |from: usize, to: usize| -> bool {
        let (a, b) = (&base_layout[from], &new_layout[to]);
        if a.weights.len() != b.weights.len() || a.bias.len() != b.bias.len() {
            return false;
        }
        net.params_mut()[b.range()].copy_from_slice(&base.params()[a.range()]);
        true
    };
    for s in 0..nc_base {
        copy(s, s);
    }
    let new_conv = nc_base;
    for f in 0..nf {
        copy(nc_base + f, nc_base + 1 + f);
    }
    let n_stages = net.n_stages();
    let first_fc = nc_base + 1;
    let flags: Vec<bool> = (0..n_stages)
        .map(|s| match spec.scope {
            TrainableScope::All => true,
            TrainableScope::NewConvAndFc => s >= new_conv,
            TrainableScope::Head => s == new_conv || (s >= first_fc && s + 2 >= n_stages),
        })
        .collect();
    net.set_trainable_flags(flags)?;
    Ok(net)
}
