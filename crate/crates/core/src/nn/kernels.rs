//! Slice-level kernels.
//!
//! Convolutions run in the full-stride layout: output voxel `(x, y, z)` of a
//! valid convolution over an `n^3` input is accumulated at `t = x + n (y + n
//! z)`, the input index of its lowest corner. For a fixed filter tap with
//! input offset `o` every output then reads `input[t + o]`, so each tap is a
//! single contiguous axpy (forward, input gradient) or dot (weight
//! gradient) of length `strided_len(n, k)`. Positions with `x`, `y` or `z`
//! past the output extent are scratch and never read back.

use alloc::vec;
use alloc::vec::Vec;

use super::Scalar;

/// Tile length; keeps the accumulator tile in L1.
const TILE: usize = 2048;

#[inline]
pub(crate) fn strided_len(n: usize, k: usize) -> usize {
    let o = n - k + 1;
    (o - 1) * (1 + n + n * n) + 1
}

/// Input offsets of the `k^3` taps in weight order (`p` slowest, `r`
/// fastest).
pub(crate) fn tap_offsets(n: usize, k: usize) -> Vec<usize> {
    let mut v = Vec::with_capacity(k * k * k);
    for p in 0..k {
        for q in 0..k {
            for r in 0..k {
                v.push(p + n * (q + n * r));
            }
        }
    }
    v
}

#[inline]
pub(crate) fn axpy<S: Scalar>(alpha: S, x: &[S], y: &mut [S]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi = *yi + alpha * xi;
    }
}

/// Dot product with eight interleaved partial sums in a fixed order.
#[inline]
pub(crate) fn dot<S: Scalar>(a: &[S], b: &[S]) -> S {
    let len = a.len().min(b.len());
    let (a, b) = (&a[..len], &b[..len]);
    let mut acc = [S::zero(); 8];
    let mut ca = a.chunks_exact(8);
    let mut cb = b.chunks_exact(8);
    for (x, y) in (&mut ca).zip(&mut cb) {
        for l in 0..8 {
            acc[l] = acc[l] + x[l] * y[l];
        }
    }
    let mut tail = S::zero();
    for (&x, &y) in ca.remainder().iter().zip(cb.remainder()) {
        tail = tail + x * y;
    }
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}

/// Valid 3D convolution plus ReLU. `input` is `c_in x n^3`, `weights`
/// `c_out x c_in x k^3`; writes `c_out x o^3` into `out`.
pub(crate) fn conv_forward<S: Scalar>(
    input: &[S],
    c_in: usize,
    n: usize,
    weights: &[S],
    bias: &[S],
    k: usize,
    out: &mut [S],
) {
    let c_out = bias.len();
    let o = n - k + 1;
    let n3 = n * n * n;
    let k3 = k * k * k;
    let len = strided_len(n, k);
    let taps = tap_offsets(n, k);
    let mut acc = vec![S::zero(); len];
    for j in 0..c_out {
        for t0 in (0..len).step_by(TILE) {
            let t1 = (t0 + TILE).min(len);
            let tile = &mut acc[t0..t1];
            tile.fill(bias[j]);
            for m in 0..c_in {
                let x = &input[m * n3..(m + 1) * n3];
                let w = &weights[(j * c_in + m) * k3..(j * c_in + m + 1) * k3];
                for (&wv, &off) in w.iter().zip(&taps) {
                    axpy(wv, &x[t0 + off..t1 + off], tile);
                }
            }
        }
        let dst = &mut out[j * o * o * o..(j + 1) * o * o * o];
        for z in 0..o {
            for y in 0..o {
                let src = &acc[n * (y + n * z)..n * (y + n * z) + o];
                let row = &mut dst[o * (y + o * z)..o * (y + o * z) + o];
                for (d, &s) in row.iter_mut().zip(src) {
                    *d = if s > S::zero() { s } else { S::zero() };
                }
            }
        }
    }
}

/// Backward pass of [`conv_forward`]. `out` is the forward output (post
/// ReLU) and `d_out` the loss gradient with respect to it. Weight and bias
/// gradients are accumulated; `d_in`, when given, is overwritten.
#[allow(clippy::too_many_arguments)]
pub(crate) fn conv_backward<S: Scalar>(
    input: &[S],
    c_in: usize,
    n: usize,
    weights: &[S],
    k: usize,
    out: &[S],
    d_out: &[S],
    grads: Option<(&mut [S], &mut [S])>,
    mut d_in: Option<&mut [S]>,
) {
    let o = n - k + 1;
    let o3 = o * o * o;
    let c_out = out.len() / o3;
    let n3 = n * n * n;
    let k3 = k * k * k;
    let len = strided_len(n, k);
    let taps = tap_offsets(n, k);
    if let Some(d) = d_in.as_deref_mut() {
        d.fill(S::zero());
    }
    let mut grads = grads;
    let mut g = vec![S::zero(); len];
    for j in 0..c_out {
        // Gradient before the ReLU, expanded to the strided layout.
        let mut bias_grad = S::zero();
        for z in 0..o {
            for y in 0..o {
                let src = o * (y + o * z);
                let dst = n * (y + n * z);
                for x in 0..o {
                    let v = if out[j * o3 + src + x] > S::zero() {
                        d_out[j * o3 + src + x]
                    } else {
                        S::zero()
                    };
                    g[dst + x] = v;
                    bias_grad = bias_grad + v;
                }
            }
        }
        if let Some((dw, db)) = grads.as_mut() {
            db[j] = db[j] + bias_grad;
            for m in 0..c_in {
                let x = &input[m * n3..(m + 1) * n3];
                let dw = &mut dw[(j * c_in + m) * k3..(j * c_in + m + 1) * k3];
                for t0 in (0..len).step_by(TILE) {
                    let t1 = (t0 + TILE).min(len);
                    let gt = &g[t0..t1];
                    for (d, &off) in dw.iter_mut().zip(&taps) {
                        *d = *d + dot(gt, &x[t0 + off..t1 + off]);
                    }
                }
            }
        }
        if let Some(d) = d_in.as_deref_mut() {
            for m in 0..c_in {
                let di = &mut d[m * n3..(m + 1) * n3];
                let w = &weights[(j * c_in + m) * k3..(j * c_in + m + 1) * k3];
                for t0 in (0..len).step_by(TILE) {
                    let t1 = (t0 + TILE).min(len);
                    let gt = &g[t0..t1];
                    for (&wv, &off) in w.iter().zip(&taps) {
                        axpy(wv, gt, &mut di[t0 + off..t1 + off]);
                    }
                }
            }
        }
        // Clear scratch positions for the next channel.
        for z in 0..o {
            for y in 0..o {
                let dst = n * (y + n * z);
                g[dst..dst + o].fill(S::zero());
            }
        }
    }
}

/// Non-overlapping 2^3 max-pool per channel with floor semantics. `argmax`
/// receives the channel-local input index of each maximum; ties go to the
/// lowest index.
pub(crate) fn maxpool_forward<S: Scalar>(input: &[S], c: usize, n: usize, out: &mut [S], argmax: &mut [u32]) {
    let o = n / 2;
    let n3 = n * n * n;
    let o3 = o * o * o;
    for ch in 0..c {
        let x = &input[ch * n3..(ch + 1) * n3];
        for z in 0..o {
            for y in 0..o {
                for xo in 0..o {
                    let base = 2 * xo + n * (2 * y + n * 2 * z);
                    let mut best = base;
                    for dz in 0..2 {
                        for dy in 0..2 {
                            for dx in 0..2 {
                                let i = base + dx + n * (dy + n * dz);
                                if x[i] > x[best] {
                                    best = i;
                                }
                            }
                        }
                    }
                    let oi = ch * o3 + xo + o * (y + o * z);
                    out[oi] = x[best];
                    argmax[oi] = best as u32;
                }
            }
        }
    }
}

/// Routes `d_out` back through the stored maxima; overwrites `d_in`.
pub(crate) fn maxpool_backward<S: Scalar>(d_out: &[S], argmax: &[u32], c: usize, n: usize, d_in: &mut [S]) {
    let n3 = n * n * n;
    let o3 = d_out.len() / c.max(1);
    d_in.fill(S::zero());
    for ch in 0..c {
        for i in 0..o3 {
            let src = ch * o3 + i;
            let dst = ch * n3 + argmax[src] as usize;
            d_in[dst] = d_in[dst] + d_out[src];
        }
    }
}
