//! Preconditioner from the homogeneous reference operator.
//!
//! On a periodic grid with a single phase the stencil is translation
//! invariant, so the operator is block-circulant and diagonalised by the
//! discrete Fourier transform: each wavevector `k` carries a real symmetric
//! 3x3 block `K(k) = sum_d A_d cos(2 pi k.d / n)` (the stencil is
//! centrosymmetric). The preconditioner applies `K(k)^-1` for `k != 0` and
//! zero at `k = 0`, so its output is always zero-mean. Using the matrix
//! phase as reference bounds the condition number of the preconditioned
//! system by the largest inclusion-to-matrix modulus ratio, independent of
//! `n`.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::math;

type C64 = Complex<f64>;

/// 27-neighbour blocks of a translation-invariant stencil; `blocks[d][r][c]`
/// couples row component `r` to component `c` of neighbour `d` (x fastest,
/// offsets -1..=1).
pub(crate) type ReferenceStencil = [[[f64; 3]; 3]; 27];

pub(crate) struct FourierPreconditioner {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    /// Upper triangle `(00, 11, 22, 12, 02, 01)` of `K(k)^-1 / n^3`.
    blocks: Vec<[f64; 6]>,
}

pub(crate) struct FourierScratch {
    fields: [Vec<C64>; 3],
    batch: Vec<C64>,
    fft: Vec<C64>,
}

impl FourierPreconditioner {
    pub(crate) fn new(n: usize, stencil: &ReferenceStencil) -> Self {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let two_pi_over_n = 2.0 * core::f64::consts::PI / n as f64;
        let scale = 1.0 / (n * n * n) as f64;
        let mut blocks = vec![[0.0; 6]; n * n * n];
        for kz in 0..n {
            for ky in 0..n {
                for kx in 0..n {
                    let idx = kx + n * (ky + n * kz);
                    if idx == 0 {
                        continue;
                    }
                    let mut m = [[0.0; 3]; 3];
                    for (d, a) in stencil.iter().enumerate() {
                        let off = [d % 3, (d / 3) % 3, d / 9].map(|o| o as f64 - 1.0);
                        let phase = two_pi_over_n
                            * (kx as f64 * off[0] + ky as f64 * off[1] + kz as f64 * off[2]);
                        let c = math::cos(phase);
                        for r in 0..3 {
                            for s in 0..3 {
                                m[r][s] += a[r][s] * c;
                            }
                        }
                    }
                    blocks[idx] = inverse_sym3(&m).map(|v| v * scale);
                }
            }
        }
        FourierPreconditioner {
            n,
            forward,
            inverse,
            blocks,
        }
    }

    pub(crate) fn scratch(&self) -> FourierScratch {
        let n = self.n;
        let len = n * n * n;
        let fft_len = self
            .forward
            .get_inplace_scratch_len()
            .max(self.inverse.get_inplace_scratch_len());
        FourierScratch {
            fields: [vec![C64::default(); len], vec![C64::default(); len], vec![C64::default(); len]],
            batch: vec![C64::default(); n * n],
            fft: vec![C64::default(); fft_len],
        }
    }

    /// `z = K_ref^+ r` for node-major `r` (`3 n^3` values).
    pub(crate) fn apply(&self, r: &[f64], z: &mut [f64], s: &mut FourierScratch) {
        for (c, field) in s.fields.iter_mut().enumerate() {
            for (f, v) in field.iter_mut().zip(r.iter().skip(c).step_by(3)) {
                *f = C64::new(*v, 0.0);
            }
        }
        for field in s.fields.iter_mut() {
            self.transform(&*self.forward, field, &mut s.batch, &mut s.fft);
        }
        let [fx, fy, fz] = &mut s.fields;
        for (((x, y), w), b) in fx.iter_mut().zip(fy.iter_mut()).zip(fz.iter_mut()).zip(&self.blocks) {
            let (u, v, t) = (*x, *y, *w);
            *x = u * b[0] + t * b[4] + v * b[5];
            *y = u * b[5] + v * b[1] + t * b[3];
            *w = u * b[4] + v * b[3] + t * b[2];
        }
        for field in s.fields.iter_mut() {
            self.transform(&*self.inverse, field, &mut s.batch, &mut s.fft);
        }
        for (c, field) in s.fields.iter().enumerate() {
            for (zv, f) in z.iter_mut().skip(c).step_by(3).zip(field) {
                *zv = f.re;
            }
        }
    }

    /// Separable 3D transform, one axis at a time.
    fn transform(&self, fft: &dyn Fft<f64>, data: &mut [C64], batch: &mut [C64], scratch: &mut [C64]) {
        let n = self.n;
        // x lines are contiguous.
        fft.process_with_scratch(data, scratch);
        // y lines, one z plane at a time.
        for k in 0..n {
            let plane = &mut data[n * n * k..n * n * (k + 1)];
            for j in 0..n {
                for i in 0..n {
                    batch[i * n + j] = plane[i + n * j];
                }
            }
            fft.process_with_scratch(batch, scratch);
            for j in 0..n {
                for i in 0..n {
                    plane[i + n * j] = batch[i * n + j];
                }
            }
        }
        // z lines, one y row at a time.
        for j in 0..n {
            for k in 0..n {
                for i in 0..n {
                    batch[i * n + k] = data[i + n * (j + n * k)];
                }
            }
            fft.process_with_scratch(batch, scratch);
            for k in 0..n {
                for i in 0..n {
                    data[i + n * (j + n * k)] = batch[i * n + k];
                }
            }
        }
    }
}

/// Inverse of a symmetric 3x3 matrix, returned as `(00, 11, 22, 12, 02, 01)`.
fn inverse_sym3(m: &[[f64; 3]; 3]) -> [f64; 6] {
    let c00 = m[1][1] * m[2][2] - m[1][2] * m[1][2];
    let c11 = m[0][0] * m[2][2] - m[0][2] * m[0][2];
    let c22 = m[0][0] * m[1][1] - m[0][1] * m[0][1];
    let c12 = m[0][2] * m[0][1] - m[0][0] * m[1][2];
    let c02 = m[0][1] * m[1][2] - m[1][1] * m[0][2];
    let c01 = m[0][2] * m[1][2] - m[0][1] * m[2][2];
    let det = m[0][0] * c00 + m[0][1] * c01 + m[0][2] * c02;
    let inv = 1.0 / det;
    [c00 * inv, c11 * inv, c22 * inv, c12 * inv, c02 * inv, c01 * inv]
}
