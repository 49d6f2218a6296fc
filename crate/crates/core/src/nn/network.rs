//! Network parameters, forward pass with caches, and backpropagation.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::adam::AdamState;
use super::arch::{NetworkArch, ShapeTrace, StageLayout};
use super::kernels;
use super::layers::{fc_apply, fc_backward};
use super::scaling::LabelScaler;
use super::train::TrainLog;
use super::Scalar;
use crate::error::{Error, Result};
use crate::math;
use crate::voxel::PhaseGrid;

/// Parameters plus the arch they belong to. Stage `s < arch.convs.len()` is
/// conv layer `s`; later stages are FC layers.
#[derive(Clone, Debug, PartialEq)]
pub struct Network<S> {
    arch: NetworkArch,
    trace: ShapeTrace,
    layout: Vec<StageLayout>,
    params: Vec<S>,
    trainable: Vec<bool>,
}

/// Forward results of one stage.
#[derive(Clone, Debug)]
enum StageCache<S> {
    Conv {
        /// Post-ReLU, pre-pool.
        out: Vec<S>,
        pooled: Option<(Vec<S>, Vec<u32>)>,
    },
    Fc {
        out: Vec<S>,
    },
}

impl<S> StageCache<S> {
    fn output(&self) -> &[S] {
        match self {
            StageCache::Conv { pooled: Some((p, _)), .. } => p,
            StageCache::Conv { out, .. } => out,
            StageCache::Fc { out } => out,
        }
    }
}

/// Everything needed to resume training or run inference.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub arch: NetworkArch,
    /// Flat parameters in [`NetworkArch::param_layout`] order.
    pub params: Vec<f32>,
    /// One flag per stage.
    pub trainable: Vec<bool>,
    pub adam: Option<AdamState<f32>>,
    pub scaler: Option<LabelScaler>,
    pub log: Option<TrainLog>,
    pub seed: u64,
    /// Hash of the checkpoint this one was transferred from.
    pub base_checkpoint: Option<String>,
}

impl Checkpoint {
    pub fn network(&self) -> Result<Network<f32>> {
        let mut net = Network::from_params(self.arch.clone(), self.params.clone())?;
        net.set_trainable_flags(self.trainable.clone())?;
        Ok(net)
    }
}

impl<S: Scalar> Network<S> {
    /// Weights `~ U[-sqrt(6 / fan_in), sqrt(6 / fan_in)]`, zero biases.
    pub fn new(arch: NetworkArch, seed: u64) -> Result<Self> {
        let layout = arch.param_layout()?;
        let n = layout.last().map(|l| l.bias.end).unwrap_or(0);
        let mut params = vec![S::zero(); n];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for l in &layout {
            init_uniform(&mut params[l.weights.clone()], l.fan_in, &mut rng);
        }
        Self::from_params(arch, params)
    }

    pub fn from_params(arch: NetworkArch, params: Vec<S>) -> Result<Self> {
        let trace = arch.trace()?;
        let layout = arch.param_layout()?;
        let n = layout.last().map(|l| l.bias.end).unwrap_or(0);
        if params.len() != n {
            return Err(Error::shape(format!(
                "arch has {n} parameters, got {}",
                params.len()
            )));
        }
        if let Some(i) = params.iter().position(|v| !v.is_finite()) {
            return Err(Error::shape(format!("parameter {i} is not finite")));
        }
        let trainable = vec![true; arch.n_stages()];
        Ok(Network {
            arch,
            trace,
            layout,
            params,
            trainable,
        })
    }

    /// Same parameters in another precision.
    pub fn cast<T: Scalar>(&self) -> Network<T> {
        Network {
            arch: self.arch.clone(),
            trace: self.trace.clone(),
            layout: self.layout.clone(),
            params: self.params.iter().map(|&v| T::of(v.as_f64())).collect(),
            trainable: self.trainable.clone(),
        }
    }

    pub fn arch(&self) -> &NetworkArch {
        &self.arch
    }

    pub fn trace(&self) -> &ShapeTrace {
        &self.trace
    }

    pub fn layout(&self) -> &[StageLayout] {
        &self.layout
    }

    pub fn params(&self) -> &[S] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [S] {
        &mut self.params
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn n_stages(&self) -> usize {
        self.layout.len()
    }

    pub fn trainable(&self) -> &[bool] {
        &self.trainable
    }

    pub fn set_trainable(&mut self, stage: usize, on: bool) -> Result<()> {
        let len = self.trainable.len();
        let slot = self.trainable.get_mut(stage).ok_or(Error::IndexOutOfRange {
            what: "stage",
            index: stage,
            len,
        })?;
        *slot = on;
        Ok(())
    }

    pub fn set_trainable_flags(&mut self, flags: Vec<bool>) -> Result<()> {
        if flags.len() != self.n_stages() {
            return Err(Error::shape(format!(
                "{} trainable flags for {} stages",
                flags.len(),
                self.n_stages()
            )));
        }
        self.trainable = flags;
        Ok(())
    }

    /// Index of the first stage with trainable parameters.
    pub fn first_trainable(&self) -> Option<usize> {
        self.trainable.iter().position(|&t| t)
    }

    /// Length of the activation entering `stage` (`stage == n_stages` is the
    /// output).
    pub fn stage_input_len(&self, stage: usize) -> usize {
        let nc = self.arch.convs.len();
        if stage == 0 {
            let n = self.arch.input_n;
            return n * n * n;
        }
        if stage <= nc {
            let t = &self.trace.convs[stage - 1];
            return t.channels * t.pooled_extent * t.pooled_extent * t.pooled_extent;
        }
        self.arch.fcs[stage - nc - 1].width
    }

    fn forward_stages(&self, start: usize, end: usize, x: &[S]) -> Result<Vec<StageCache<S>>> {
        if x.len() != self.stage_input_len(start) {
            return Err(Error::shape(format!(
                "stage {start} expects {} inputs, got {}",
                self.stage_input_len(start),
                x.len()
            )));
        }
        let nc = self.arch.convs.len();
        let mut caches: Vec<StageCache<S>> = Vec::with_capacity(end - start);
        for s in start..end {
            let input = if s == start { x } else { caches[s - start - 1].output() };
            let l = &self.layout[s];
            let w = &self.params[l.weights.clone()];
            let b = &self.params[l.bias.clone()];
            let cache = if s < nc {
                let t = &self.trace.convs[s];
                let spec = &self.arch.convs[s];
                let o = t.out_extent;
                let mut out = vec![S::zero(); t.channels * o * o * o];
                kernels::conv_forward(input, t.in_channels, t.in_extent, w, b, spec.kernel, &mut out);
                let pooled = if spec.pool {
                    let p = t.pooled_extent;
                    let mut po = vec![S::zero(); t.channels * p * p * p];
                    let mut arg = vec![0u32; po.len()];
                    kernels::maxpool_forward(&out, t.channels, o, &mut po, &mut arg);
                    Some((po, arg))
                } else {
                    None
                };
                StageCache::Conv { out, pooled }
            } else {
                let f = &self.arch.fcs[s - nc];
                let mut out = vec![S::zero(); f.width];
                fc_apply(input, w, b, f.activation, &mut out);
                StageCache::Fc { out }
            };
            caches.push(cache);
        }
        Ok(caches)
    }

    /// Output for an input volume (`n^3` values, x fastest).
    pub fn predict(&self, x: &[S]) -> Result<Vec<S>> {
        self.predict_from(0, x)
    }

    /// Output for an activation entering `stage`.
    pub fn predict_from(&self, stage: usize, x: &[S]) -> Result<Vec<S>> {
        let caches = self.forward_stages(stage, self.n_stages(), x)?;
        Ok(caches.last().map(|c| c.output().to_vec()).unwrap_or_else(|| x.to_vec()))
    }

    pub fn predict_grid(&self, grid: &PhaseGrid) -> Result<Vec<S>> {
        self.predict(&grid_input(grid))
    }

    /// Activation entering `stage`.
    pub fn features(&self, stage: usize, x: &[S]) -> Result<Vec<S>> {
        if stage > self.n_stages() {
            return Err(Error::IndexOutOfRange {
                what: "stage",
                index: stage,
                len: self.n_stages(),
            });
        }
        let caches = self.forward_stages(0, stage, x)?;
        Ok(caches.last().map(|c| c.output().to_vec()).unwrap_or_else(|| x.to_vec()))
    }

    /// Post-ReLU activation of conv layer `layer` as `(channels, extent,
    /// values)`.
    pub fn conv_activation(&self, layer: usize, x: &[S]) -> Result<(usize, usize, Vec<S>)> {
        let nc = self.arch.convs.len();
        if layer >= nc {
            return Err(Error::IndexOutOfRange {
                what: "conv layer",
                index: layer,
                len: nc,
            });
        }
        let mut caches = self.forward_stages(0, layer + 1, x)?;
        let t = &self.trace.convs[layer];
        match caches.pop() {
            Some(StageCache::Conv { out, .. }) => Ok((t.channels, t.out_extent, out)),
            _ => Err(Error::shape("conv stage produced no volume")),
        }
    }

    /// Adds `scale * d(sum_l (y_l - t_l)^2)/d(params)` to `grad` for one
    /// sample entering at `start`; returns the squared error. Frozen stages
    /// receive no gradient and backpropagation stops at the first trainable
    /// stage.
    pub fn accumulate_gradient(&self, start: usize, x: &[S], target: &[S], scale: S, grad: &mut [S]) -> Result<S> {
        if grad.len() != self.params.len() {
            return Err(Error::shape("gradient buffer does not match the parameter count"));
        }
        let end = self.n_stages();
        if target.len() != self.stage_input_len(end) {
            return Err(Error::shape(format!(
                "target has {} values, expected {}",
                target.len(),
                self.stage_input_len(end)
            )));
        }
        let caches = self.forward_stages(start, end, x)?;
        let y = caches[end - start - 1].output();
        let two = S::of(2.0);
        let mut sq = S::zero();
        let mut d: Vec<S> = y
            .iter()
            .zip(target)
            .map(|(&yi, &ti)| {
                let e = yi - ti;
                sq = sq + e * e;
                two * e * scale
            })
            .collect();

        let stop = match self.trainable[start..].iter().position(|&t| t) {
            Some(p) => start + p,
            None => return Ok(sq),
        };
        let nc = self.arch.convs.len();
        for s in (stop..end).rev() {
            let input = if s == start { x } else { caches[s - start - 1].output() };
            let l = &self.layout[s];
            let w = &self.params[l.weights.clone()];
            let need_input_grad = s > stop;
            let mut d_in = if need_input_grad {
                vec![S::zero(); input.len()]
            } else {
                Vec::new()
            };
            let (gw, gb) = grad[l.range()].split_at_mut(l.weights.len());
            let grads = if self.trainable[s] { Some((gw, gb)) } else { None };
            match &caches[s - start] {
                StageCache::Fc { out } => {
                    let act = self.arch.fcs[s - nc].activation;
                    fc_backward(input, w, act, out, &d, grads, need_input_grad.then_some(&mut d_in[..]));
                }
                StageCache::Conv { out, pooled } => {
                    let t = &self.trace.convs[s];
                    let d_conv = match pooled {
                        Some((_, arg)) => {
                            let mut dc = vec![S::zero(); out.len()];
                            kernels::maxpool_backward(&d, arg, t.channels, t.out_extent, &mut dc);
                            dc
                        }
                        None => core::mem::take(&mut d),
                    };
                    kernels::conv_backward(
                        input,
                        t.in_channels,
                        t.in_extent,
                        w,
                        self.arch.convs[s].kernel,
                        out,
                        &d_conv,
                        grads,
                        need_input_grad.then_some(&mut d_in[..]),
                    );
                }
            }
            d = d_in;
        }
        Ok(sq)
    }

    /// Mean over the batch of the summed squared error, and its gradient.
    /// Per-sample gradients are reduced in sample order, so the result does
    /// not depend on how samples are scheduled across threads.
    pub fn batch_gradient(&self, start: usize, inputs: &[&[S]], targets: &[&[S]]) -> Result<(S, Vec<S>)> {
        if inputs.len() != targets.len() || inputs.is_empty() {
            return Err(Error::shape(format!(
                "{} inputs for {} targets",
                inputs.len(),
                targets.len()
            )));
        }
        let scale = S::one() / S::of(inputs.len() as f64);
        let n = self.params.len();
        let one = |i: usize| -> Result<(S, Vec<S>)> {
            let mut g = vec![S::zero(); n];
            let sq = self.accumulate_gradient(start, inputs[i], targets[i], scale, &mut g)?;
            Ok((sq, g))
        };
        #[cfg(feature = "parallel")]
        let per_sample: Vec<Result<(S, Vec<S>)>> = {
            use rayon::prelude::*;
            (0..inputs.len()).into_par_iter().map(one).collect()
        };
        #[cfg(not(feature = "parallel"))]
        let per_sample: Vec<Result<(S, Vec<S>)>> = (0..inputs.len()).map(one).collect();

        let mut total = vec![S::zero(); n];
        let mut loss = S::zero();
        for r in per_sample {
            let (sq, g) = r?;
            loss = loss + sq;
            for (t, v) in total.iter_mut().zip(&g) {
                *t = *t + *v;
            }
        }
        Ok((loss * scale, total))
    }

    /// Mean summed squared error over a set of samples entering at `start`.
    pub fn loss_from(&self, start: usize, inputs: &[&[S]], targets: &[&[S]]) -> Result<S> {
        if inputs.len() != targets.len() || inputs.is_empty() {
            return Err(Error::shape(format!(
                "{} inputs for {} targets",
                inputs.len(),
                targets.len()
            )));
        }
        let preds = self.predict_many(start, inputs)?;
        super::loss::mse_loss(&preds, targets)
    }

    /// Outputs for many activations entering `start`, in input order.
    pub fn predict_many(&self, start: usize, inputs: &[&[S]]) -> Result<Vec<Vec<S>>> {
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            inputs.par_iter().map(|x| self.predict_from(start, x)).collect()
        }
        #[cfg(not(feature = "parallel"))]
        {
            inputs.iter().map(|x| self.predict_from(start, x)).collect()
        }
    }
}

fn init_uniform<S: Scalar>(w: &mut [S], fan_in: usize, rng: &mut ChaCha8Rng) {
    let a = math::sqrt(6.0 / fan_in as f64);
    for v in w {
        let u: f64 = rng.random();
        *v = S::of(a * (2.0 * u - 1.0));
    }
}

/// Phase grid as a single-channel 0/1 volume.
pub fn grid_input<S: Scalar>(grid: &PhaseGrid) -> Vec<S> {
    grid.values().iter().map(|&v| if v == 0 { S::zero() } else { S::one() }).collect()
}
