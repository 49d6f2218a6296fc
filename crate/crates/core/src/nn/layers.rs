//! Shape-checked single-layer operations on owned tensors.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::arch::Activation;
use super::kernels;
use super::Scalar;
use crate::error::{Error, Result};

/// Dense tensor: `[channels, n, n, n]` for volumes (x fastest in memory) or
/// `[features]` for flat vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<S> {
    shape: Vec<usize>,
    values: Vec<S>,
}

impl<S: Scalar> Tensor<S> {
    pub fn new(shape: Vec<usize>, values: Vec<S>) -> Result<Self> {
        let len: usize = shape.iter().product();
        if len != values.len() {
            return Err(Error::shape(format!(
                "shape {shape:?} needs {len} values, got {}",
                values.len()
            )));
        }
        Ok(Tensor { shape, values })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let len = shape.iter().product();
        Tensor {
            shape,
            values: vec![S::zero(); len],
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn values(&self) -> &[S] {
        &self.values
    }

    pub fn into_values(self) -> Vec<S> {
        self.values
    }

    /// `(channels, n)` of a cubic volume.
    fn volume_dims(&self) -> Result<(usize, usize)> {
        match self.shape[..] {
            [c, a, b, d] if a == b && b == d => Ok((c, a)),
            _ => Err(Error::shape(format!("expected a cubic volume, got shape {:?}", self.shape))),
        }
    }
}

/// Conv layer with cubic `kernel^3` filters, stride 1, no padding, ReLU.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvLayer<S> {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    /// `[out, in, p, q, r]`, `r` fastest.
    pub weights: Vec<S>,
    pub bias: Vec<S>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FcLayer<S> {
    pub inputs: usize,
    pub outputs: usize,
    /// `[out, in]`.
    pub weights: Vec<S>,
    pub bias: Vec<S>,
    pub activation: Activation,
}

pub fn conv3d_forward<S: Scalar>(input: &Tensor<S>, layer: &ConvLayer<S>) -> Result<Tensor<S>> {
    let (c, n) = input.volume_dims()?;
    let k = layer.kernel;
    if c != layer.in_channels {
        return Err(Error::shape(format!(
            "conv expects {} input channels, got {c}",
            layer.in_channels
        )));
    }
    if k % 2 == 0 || n < k {
        return Err(Error::shape(format!("kernel {k} does not fit extent {n}")));
    }
    if layer.weights.len() != layer.out_channels * c * k * k * k || layer.bias.len() != layer.out_channels {
        return Err(Error::shape("conv parameter sizes disagree with the layer shape"));
    }
    let o = n - k + 1;
    let mut out = Tensor::zeros(vec![layer.out_channels, o, o, o]);
    kernels::conv_forward(&input.values, c, n, &layer.weights, &layer.bias, k, &mut out.values);
    Ok(out)
}

/// 2^3 max-pool; returns the pooled tensor and channel-local argmax indices.
pub fn maxpool3d<S: Scalar>(input: &Tensor<S>) -> Result<(Tensor<S>, Vec<u32>)> {
    let (c, n) = input.volume_dims()?;
    if n < 2 {
        return Err(Error::shape(format!("cannot pool extent {n}")));
    }
    let o = n / 2;
    let mut out = Tensor::zeros(vec![c, o, o, o]);
    let mut arg = vec![0u32; c * o * o * o];
    kernels::maxpool_forward(&input.values, c, n, &mut out.values, &mut arg);
    Ok((out, arg))
}

pub fn fc_forward<S: Scalar>(input: &Tensor<S>, layer: &FcLayer<S>) -> Result<Tensor<S>> {
    if input.values.len() != layer.inputs {
        return Err(Error::shape(format!(
            "fc layer expects {} inputs, got {}",
            layer.inputs,
            input.values.len()
        )));
    }
    if layer.weights.len() != layer.inputs * layer.outputs || layer.bias.len() != layer.outputs {
        return Err(Error::shape("fc parameter sizes disagree with the layer shape"));
    }
    let mut out = vec![S::zero(); layer.outputs];
    fc_apply(&input.values, &layer.weights, &layer.bias, layer.activation, &mut out);
    Tensor::new(vec![layer.outputs], out)
}

#[inline]
pub(crate) fn activate<S: Scalar>(a: Activation, z: S) -> S {
    match a {
        Activation::Relu => {
            if z > S::zero() {
                z
            } else {
                S::zero()
            }
        }
        Activation::Sigmoid => S::one() / (S::one() + (-z).exp()),
        Activation::Identity => z,
    }
}

/// Derivative expressed through the activation's output.
#[inline]
pub(crate) fn activation_slope<S: Scalar>(a: Activation, y: S) -> S {
    match a {
        Activation::Relu => {
            if y > S::zero() {
                S::one()
            } else {
                S::zero()
            }
        }
        Activation::Sigmoid => y * (S::one() - y),
        Activation::Identity => S::one(),
    }
}

pub(crate) fn fc_apply<S: Scalar>(x: &[S], w: &[S], b: &[S], act: Activation, out: &mut [S]) {
    let n_in = x.len();
    for (o, y) in out.iter_mut().enumerate() {
        let z = b[o] + kernels::dot(&w[o * n_in..(o + 1) * n_in], x);
        *y = activate(act, z);
    }
}

/// Accumulates weight and bias gradients (when given) and overwrites `d_in`
/// (when given). `y` is the forward output, `d_out` the gradient with
/// respect to it.
pub(crate) fn fc_backward<S: Scalar>(
    x: &[S],
    w: &[S],
    act: Activation,
    y: &[S],
    d_out: &[S],
    grads: Option<(&mut [S], &mut [S])>,
    d_in: Option<&mut [S]>,
) {
    let n_in = x.len();
    let dz: Vec<S> = y
        .iter()
        .zip(d_out)
        .map(|(&yo, &g)| g * activation_slope(act, yo))
        .collect();
    if let Some((dw, db)) = grads {
        for (o, &g) in dz.iter().enumerate() {
            db[o] = db[o] + g;
            kernels::axpy(g, x, &mut dw[o * n_in..(o + 1) * n_in]);
        }
    }
    if let Some(d) = d_in {
        d.fill(S::zero());
        for (o, &g) in dz.iter().enumerate() {
            kernels::axpy(g, &w[o * n_in..(o + 1) * n_in], d);
        }
    }
}
