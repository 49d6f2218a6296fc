//! Matrix-free PCG for the periodic unit-cell problem.
//!
//! Nodes are identified across opposite faces, so an `n^3` grid carries
//! `n^3` nodes and `3 n^3` unknowns. For a macroscopic strain `E` the
//! displacement is `u = E x + w` with `w` periodic, and `w` solves
//! `K w = -sum_e K_e (E x)_e`. Because `K_e` annihilates translations, the
//! affine load of an element only depends on its phase; since the matrix
//! phase contributions cancel node by node, only inclusion elements carry
//! load (`K_1 - K_0` applied to the affine field). Translations are removed
//! by keeping the fluctuation at zero mean; the preconditioned
//! residual is projected onto that subspace every iteration.

use alloc::vec;
use alloc::vec::Vec;

use super::element::{self, ElementMatrix, StrainOperator, DOFS, NODES};
use super::{isotropic_voigt, Phases, StrainLoadCase, StressField, VoigtMatrix6};
use crate::error::{Error, Result};
use crate::math;
use crate::voxel::PhaseGrid;

#[cfg(feature = "std")]
use super::fourier::{FourierPreconditioner, ReferenceStencil};
#[cfg(feature = "std")]
use std::sync::OnceLock;

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preconditioner {
    /// Inverse diagonal. Iteration count grows with `n`.
    Jacobi,
    /// Inverse of the matrix-phase operator, applied by FFT. Iteration count
    /// depends only on the phase contrast. Requires `std`.
    Fourier,
}

impl Default for Preconditioner {
    fn default() -> Self {
        if cfg!(feature = "std") {
            Preconditioner::Fourier
        } else {
            Preconditioner::Jacobi
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    /// Relative residual `|r| / |b|` at which iteration stops.
    pub tol: f64,
    /// Iteration cap; `None` means `10 n^3`.
    pub max_iterations: Option<usize>,
    pub preconditioner: Preconditioner,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-8,
            max_iterations: None,
            preconditioner: Preconditioner::default(),
        }
    }
}

impl SolverOptions {
    pub fn with_tol(tol: f64) -> Self {
        SolverOptions {
            tol,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 1e-12 && self.tol < 1e-2) {
            return Err(Error::config(alloc::format!(
                "solver tolerance must lie in (1e-12, 1e-2) (got {})",
                self.tol
            )));
        }
        if self.preconditioner == Preconditioner::Fourier && !cfg!(feature = "std") {
            return Err(Error::config("the fourier preconditioner needs the std feature"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct LoadCaseSolution {
    pub stress: StressField,
    /// Volume average of the total strain; equals the imposed strain.
    pub mean_strain: [f64; 6],
    /// Periodic fluctuation, `3 n^3` values (node-major, xyz).
    pub fluctuation: Vec<f64>,
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Coupling of one node to its 27 neighbours, for one arrangement of the
/// eight surrounding element phases. Column `3 d + c` holds the three rows
/// for neighbour `d` (x fastest, offsets -1..=1) and component `c`; the
/// fourth lane is padding.
type NodeStencil = [[f64; 4]; 81];

pub(crate) struct PeriodicProblem<'a> {
    grid: &'a PhaseGrid,
    n: usize,
    stiffness: [ElementMatrix; 2],
    constitutive: [VoigtMatrix6; 2],
    center_b: StrainOperator,
    inv_diag: Vec<f64>,
    uniform: bool,
    /// Index into `stencils` for every node.
    node_config: Vec<u16>,
    stencils: Vec<NodeStencil>,
    #[cfg(feature = "std")]
    fourier: OnceLock<FourierPreconditioner>,
}

impl<'a> PeriodicProblem<'a> {
    pub(crate) fn new(grid: &'a PhaseGrid, phases: &Phases) -> Result<Self> {
        phases.validate()?;
        let n = grid.n();
        if n < 2 {
            return Err(Error::config("periodic grid needs at least 2 voxels per edge"));
        }
        let h = grid.spacing();
        let constitutive = [isotropic_voigt(&phases.matrix), isotropic_voigt(&phases.inclusion)];
        let stiffness = [
            element::stiffness(&constitutive[0], h),
            element::stiffness(&constitutive[1], h),
        ];

        let first = grid.values()[0];
        let mut p = PeriodicProblem {
            grid,
            n,
            stiffness,
            constitutive,
            center_b: element::center_strain_operator(h),
            inv_diag: Vec::new(),
            uniform: grid.values().iter().all(|&v| v == first),
            node_config: Vec::new(),
            stencils: Vec::new(),
            #[cfg(feature = "std")]
            fourier: OnceLock::new(),
        };
        p.build_stencils();
        Ok(p)
    }

    /// Phase bit pattern of the eight elements around node `(i, j, k)`. Bit
    /// `b = bx + 2 by + 4 bz` is the element at `(i - 1 + bx, j - 1 + by,
    /// k - 1 + bz)`, in which the node is local node `7 - b`.
    fn node_pattern(&self, i: usize, j: usize, k: usize) -> u8 {
        let n = self.n;
        let prev = |v: usize| if v == 0 { n - 1 } else { v - 1 };
        let xs = [prev(i), i];
        let ys = [prev(j), j];
        let zs = [prev(k), k];
        let phases = self.grid.values();
        let mut pattern = 0u8;
        for b in 0..8 {
            let e = xs[b & 1] + n * (ys[(b >> 1) & 1] + n * zs[(b >> 2) & 1]);
            pattern |= (phases[e] & 1) << b;
        }
        pattern
    }

    fn assemble_stencil(&self, pattern: u8) -> NodeStencil {
        let mut st = [[0.0; 4]; 81];
        for b in 0..8usize {
            let k = &self.stiffness[((pattern >> b) & 1) as usize];
            let a = 7 - b;
            let oa = element::node_offset(a);
            for other in 0..NODES {
                let oo = element::node_offset(other);
                // Neighbour offset in -1..=1 per axis, mapped to 0..3.
                let d = (oo[0] + 1 - oa[0]) + 3 * ((oo[1] + 1 - oa[1]) + 3 * (oo[2] + 1 - oa[2]));
                for r in 0..3 {
                    for c in 0..3 {
                        st[3 * d + c][r] += k[3 * a + r][3 * other + c];
                    }
                }
            }
        }
        st
    }

    fn build_stencils(&mut self) {
        let n = self.n;
        let mut slot = [u16::MAX; 256];
        let mut configs = vec![0u16; n * n * n];
        let mut stencils = Vec::new();
        for k in 0..n {
            for j in 0..n {
                for i in 0..n {
                    let pattern = self.node_pattern(i, j, k);
                    if slot[pattern as usize] == u16::MAX {
                        slot[pattern as usize] = stencils.len() as u16;
                        stencils.push(self.assemble_stencil(pattern));
                    }
                    configs[i + n * (j + n * k)] = slot[pattern as usize];
                }
            }
        }
        // The centre neighbour is d = 13.
        let mut inv_diag = vec![0.0; 3 * n * n * n];
        for (node, &cfg) in configs.iter().enumerate() {
            let st = &stencils[cfg as usize];
            for c in 0..3 {
                inv_diag[3 * node + c] = 1.0 / st[3 * 13 + c][c];
            }
        }
        self.node_config = configs;
        self.stencils = stencils;
        self.inv_diag = inv_diag;
    }

    #[inline]
    fn for_each_element(&self, mut f: impl FnMut(usize, [usize; NODES])) {
        let n = self.n;
        for k in 0..n {
            let k1 = if k + 1 == n { 0 } else { k + 1 };
            for j in 0..n {
                let j1 = if j + 1 == n { 0 } else { j + 1 };
                let row0 = n * (j + n * k);
                let row1 = n * (j1 + n * k);
                let row2 = n * (j + n * k1);
                let row3 = n * (j1 + n * k1);
                for i in 0..n {
                    let i1 = if i + 1 == n { 0 } else { i + 1 };
                    let nodes = [
                        row0 + i,
                        row0 + i1,
                        row1 + i,
                        row1 + i1,
                        row2 + i,
                        row2 + i1,
                        row3 + i,
                        row3 + i1,
                    ];
                    f(row0 + i, nodes);
                }
            }
        }
    }

    #[inline]
    fn gather(u: &[f64], nodes: &[usize; NODES]) -> [f64; DOFS] {
        let mut ue = [0.0; DOFS];
        for (a, &node) in nodes.iter().enumerate() {
            ue[3 * a] = u[3 * node];
            ue[3 * a + 1] = u[3 * node + 1];
            ue[3 * a + 2] = u[3 * node + 2];
        }
        ue
    }

    /// `out = K u`, node by node through the stencil table.
    pub(crate) fn apply(&self, u: &[f64], out: &mut [f64]) {
        let n = self.n;
        let wrap = |v: usize, d: usize| -> usize {
            // v + d - 1 modulo n, for d in 0..3
            let s = v + d;
            if s == 0 {
                n - 1
            } else if s > n {
                s - 1 - n
            } else {
                s - 1
            }
        };
        let mut local = [0.0; 81];
        for k in 0..n {
            let ks = [wrap(k, 0), k, wrap(k, 2)];
            for j in 0..n {
                let js = [wrap(j, 0), j, wrap(j, 2)];
                let mut rows = [0usize; 9];
                for dz in 0..3 {
                    for dy in 0..3 {
                        rows[dy + 3 * dz] = n * (js[dy] + n * ks[dz]);
                    }
                }
                for i in 0..n {
                    let is = [wrap(i, 0), i, wrap(i, 2)];
                    for (r, &row) in rows.iter().enumerate() {
                        for (dx, &x) in is.iter().enumerate() {
                            let src = 3 * (row + x);
                            let dst = 3 * (3 * r + dx);
                            local[dst] = u[src];
                            local[dst + 1] = u[src + 1];
                            local[dst + 2] = u[src + 2];
                        }
                    }
                    let node = i + rows[4];
                    let st = &self.stencils[self.node_config[node] as usize];
                    let mut acc = [0.0; 4];
                    for (col, &v) in st.iter().zip(&local) {
                        acc[0] += col[0] * v;
                        acc[1] += col[1] * v;
                        acc[2] += col[2] * v;
                        acc[3] += col[3] * v;
                    }
                    out[3 * node] = acc[0];
                    out[3 * node + 1] = acc[1];
                    out[3 * node + 2] = acc[2];
                }
            }
        }
    }

    /// `out = K u` by element-wise gather / multiply / scatter. Reference
    /// for the stencil operator.
    #[cfg(test)]
    pub(crate) fn apply_elementwise(&self, u: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        let phases = self.grid.values();
        self.for_each_element(|e, nodes| {
            let k = &self.stiffness[phases[e] as usize];
            let ue = Self::gather(u, &nodes);
            // K is symmetric: accumulate rows scaled by ue (vectorizes).
            let mut fe = [0.0; DOFS];
            for (c, row) in k.iter().enumerate() {
                let s = ue[c];
                for r in 0..DOFS {
                    fe[r] += s * row[r];
                }
            }
            for (a, &node) in nodes.iter().enumerate() {
                out[3 * node] += fe[3 * a];
                out[3 * node + 1] += fe[3 * a + 1];
                out[3 * node + 2] += fe[3 * a + 2];
            }
        });
    }

    fn affine_element_displacement(&self, case: &StrainLoadCase) -> [f64; DOFS] {
        let e = case.tensor();
        let h = self.grid.spacing();
        let mut u = [0.0; DOFS];
        for a in 0..NODES {
            let o = element::node_offset(a);
            let x = [o[0] as f64 * h, o[1] as f64 * h, o[2] as f64 * h];
            for i in 0..3 {
                u[3 * a + i] = e[i][0] * x[0] + e[i][1] * x[1] + e[i][2] * x[2];
            }
        }
        u
    }

    fn rhs(&self, case: &StrainLoadCase) -> Vec<f64> {
        let n3 = self.n * self.n * self.n;
        let mut b = vec![0.0; 3 * n3];
        if self.uniform {
            return b;
        }
        let ua = self.affine_element_displacement(case);
        // -(K_1 - K_0) u_affine, applied at inclusion elements only.
        let mut delta = [0.0; DOFS];
        for r in 0..DOFS {
            let mut s = 0.0;
            for c in 0..DOFS {
                s += (self.stiffness[1][r][c] - self.stiffness[0][r][c]) * ua[c];
            }
            delta[r] = -s;
        }
        let phases = self.grid.values();
        self.for_each_element(|e, nodes| {
            if phases[e] == 1 {
                for (a, &node) in nodes.iter().enumerate() {
                    for c in 0..3 {
                        b[3 * node + c] += delta[3 * a + c];
                    }
                }
            }
        });
        b
    }

    fn project_zero_mean(v: &mut [f64]) {
        let nodes = v.len() / 3;
        let mut mean = [0.0; 3];
        for chunk in v.chunks_exact(3) {
            mean[0] += chunk[0];
            mean[1] += chunk[1];
            mean[2] += chunk[2];
        }
        let inv = 1.0 / nodes as f64;
        let mean = mean.map(|m| m * inv);
        for chunk in v.chunks_exact_mut(3) {
            chunk[0] -= mean[0];
            chunk[1] -= mean[1];
            chunk[2] -= mean[2];
        }
    }

    #[cfg(feature = "std")]
    fn fourier(&self) -> &FourierPreconditioner {
        self.fourier.get_or_init(|| {
            // Matrix-phase stencil, re-laid out as 3x3 blocks.
            let st = self.assemble_stencil(0);
            let mut blocks: ReferenceStencil = [[[0.0; 3]; 3]; 27];
            for (d, block) in blocks.iter_mut().enumerate() {
                for r in 0..3 {
                    for c in 0..3 {
                        block[r][c] = st[3 * d + c][r];
                    }
                }
            }
            FourierPreconditioner::new(self.n, &blocks)
        })
    }

    fn pcg(&self, b: &[f64], opts: &SolverOptions) -> Result<(Vec<f64>, usize, f64)> {
        let len = b.len();
        let mut x = vec![0.0; len];
        let b_norm = math::sqrt(dot(b, b));
        if b_norm == 0.0 {
            return Ok((x, 0, 0.0));
        }
        let cap = opts.max_iterations.unwrap_or(10 * self.n * self.n * self.n);

        #[cfg(feature = "std")]
        let mut fourier = match opts.preconditioner {
            Preconditioner::Fourier => {
                let f = self.fourier();
                Some((f, f.scratch()))
            }
            Preconditioner::Jacobi => None,
        };
        #[cfg_attr(not(feature = "std"), allow(unused_mut))]
        let mut precondition = |r: &[f64], z: &mut [f64]| {
            #[cfg(feature = "std")]
            if let Some((f, scratch)) = fourier.as_mut() {
                f.apply(r, z, scratch);
                return;
            }
            for ((zi, ri), di) in z.iter_mut().zip(r).zip(&self.inv_diag) {
                *zi = ri * di;
            }
            Self::project_zero_mean(z);
        };

        let mut r = b.to_vec();
        let mut z = vec![0.0; len];
        precondition(&r, &mut z);
        let mut p = z.clone();
        let mut q = vec![0.0; len];
        let mut rz = dot(&r, &z);
        let mut residual = 1.0;

        for it in 1..=cap {
            self.apply(&p, &mut q);
            let pq = dot(&p, &q);
            if !(pq > 0.0) {
                return Err(Error::SolverDiverged {
                    iterations: it,
                    residual,
                });
            }
            let alpha = rz / pq;
            axpy(alpha, &p, &mut x);
            axpy(-alpha, &q, &mut r);
            residual = math::sqrt(dot(&r, &r)) / b_norm;
            if residual <= opts.tol {
                Self::project_zero_mean(&mut x);
                return Ok((x, it, residual));
            }
            precondition(&r, &mut z);
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for (pi, zi) in p.iter_mut().zip(&z) {
                *pi = zi + beta * *pi;
            }
        }
        Err(Error::SolverDiverged {
            iterations: cap,
            residual,
        })
    }

    pub(crate) fn solve(&self, case: &StrainLoadCase, opts: &SolverOptions) -> Result<LoadCaseSolution> {
        opts.validate()?;
        let b = self.rhs(case);
        let (w, iterations, relative_residual) = self.pcg(&b, opts)?;

        let eps_bar = case.macro_strain;
        let phases = self.grid.values();
        let n3 = phases.len();
        let mut stresses = vec![[0.0; 6]; n3];
        let mut strain_sum = [0.0; 6];
        self.for_each_element(|e, nodes| {
            let we = Self::gather(&w, &nodes);
            let mut eps = eps_bar;
            for (i, row) in self.center_b.iter().enumerate() {
                eps[i] += row.iter().zip(&we).map(|(a, b)| a * b).sum::<f64>();
            }
            for c in 0..6 {
                strain_sum[c] += eps[c];
            }
            stresses[e] = self.constitutive[phases[e] as usize].apply(&eps);
        });
        let inv = 1.0 / n3 as f64;
        Ok(LoadCaseSolution {
            stress: StressField { n: self.n, stresses },
            mean_strain: strain_sum.map(|s| s * inv),
            fluctuation: w,
            iterations,
            relative_residual,
        })
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    // Four interleaved partial sums; fixed order, so still deterministic.
    let mut acc = [0.0; 4];
    let mut ca = a.chunks_exact(4);
    let mut cb = b.chunks_exact(4);
    for (x, y) in (&mut ca).zip(&mut cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut tail = 0.0;
    for (x, y) in ca.remainder().iter().zip(cb.remainder()) {
        tail += x * y;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Solves one load case on `grid` and returns the element-averaged stress
/// field.
pub fn solve_load_case(
    grid: &PhaseGrid,
    phases: &Phases,
    case: &StrainLoadCase,
    opts: &SolverOptions,
) -> Result<LoadCaseSolution> {
    PeriodicProblem::new(grid, phases)?.solve(case, opts)
}
