//! Effective elastic properties of a two-phase voxel microstructure.
//!
//! The effective stiffness is the volume average of the stress fields that
//! answer the six unit macroscopic strains under periodic boundary
//! conditions. Each voxel is one trilinear hexahedron; the displacement is
//! split into the affine part `E x` and a periodic fluctuation solved for by
//! matrix-free preconditioned conjugate gradients (see [`solver`]).
//!
//! Voigt ordering throughout is `(xx, yy, zz, yz, zx, xy)` with engineering
//! shear strains.

pub mod element;
#[cfg(feature = "std")]
mod fourier;
pub mod solver;

use alloc::format;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::voxel::PhaseGrid;

pub use solver::{solve_load_case, LoadCaseSolution, Preconditioner, SolverOptions};

/// Linear isotropic phase. Young's modulus in GPa.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IsotropicPhase {
    pub young_modulus: f64,
    pub poisson_ratio: f64,
}

impl IsotropicPhase {
    /// Aluminium-like matrix phase.
    pub const MATRIX: IsotropicPhase = IsotropicPhase {
        young_modulus: 68.9,
        poisson_ratio: 0.33,
    };
    /// Ceramic-like inclusion phase.
    pub const INCLUSION: IsotropicPhase = IsotropicPhase {
        young_modulus: 379.2,
        poisson_ratio: 0.21,
    };

    pub fn new(young_modulus: f64, poisson_ratio: f64) -> Result<Self> {
        let p = IsotropicPhase {
            young_modulus,
            poisson_ratio,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.young_modulus.is_finite() && self.young_modulus > 0.0) {
            return Err(Error::config(format!(
                "Young's modulus must be positive (got {})",
                self.young_modulus
            )));
        }
        if !(self.poisson_ratio > -1.0 && self.poisson_ratio < 0.5) {
            return Err(Error::config(format!(
                "Poisson's ratio must lie in (-1, 0.5) (got {})",
                self.poisson_ratio
            )));
        }
        Ok(())
    }

    /// First Lamé parameter.
    pub fn lambda(&self) -> f64 {
        let (e, nu) = (self.young_modulus, self.poisson_ratio);
        e * nu / ((1.0 + nu) * (1.0 - 2.0 * nu))
    }

    /// Shear modulus.
    pub fn mu(&self) -> f64 {
        self.young_modulus / (2.0 * (1.0 + self.poisson_ratio))
    }
}

/// The two phases of a composite: index 0 is the matrix, 1 the inclusion.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Phases {
    pub matrix: IsotropicPhase,
    pub inclusion: IsotropicPhase,
}

impl Default for Phases {
    fn default() -> Self {
        Phases {
            matrix: IsotropicPhase::MATRIX,
            inclusion: IsotropicPhase::INCLUSION,
        }
    }
}

impl Phases {
    pub fn get(&self, phase: u8) -> &IsotropicPhase {
        if phase == 0 {
            &self.matrix
        } else {
            &self.inclusion
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.matrix.validate()?;
        self.inclusion.validate()
    }
}

/// 6x6 matrix in Voigt notation (GPa for stiffness).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VoigtMatrix6(pub [[f64; 6]; 6]);

impl VoigtMatrix6 {
    pub const ZERO: VoigtMatrix6 = VoigtMatrix6([[0.0; 6]; 6]);

    pub fn transpose(&self) -> Self {
        let mut t = Self::ZERO;
        for i in 0..6 {
            for j in 0..6 {
                t.0[i][j] = self.0[j][i];
            }
        }
        t
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// `max |C - C^T| / max |C|`.
    pub fn asymmetry(&self) -> f64 {
        let scale = self.max_abs();
        if scale == 0.0 {
            return 0.0;
        }
        let mut m = 0.0f64;
        for i in 0..6 {
            for j in 0..6 {
                m = m.max((self.0[i][j] - self.0[j][i]).abs());
            }
        }
        m / scale
    }

    pub fn symmetrized(&self) -> Self {
        let mut s = Self::ZERO;
        for i in 0..6 {
            for j in 0..6 {
                s.0[i][j] = 0.5 * (self.0[i][j] + self.0[j][i]);
            }
        }
        s
    }

    /// Largest entry outside the orthotropic pattern (normal-shear coupling
    /// and shear-shear coupling) relative to the largest entry.
    pub fn orthotropy_defect(&self) -> f64 {
        let scale = self.max_abs();
        if scale == 0.0 {
            return 0.0;
        }
        let mut m = 0.0f64;
        for i in 0..6 {
            for j in 0..6 {
                let orthotropic = (i < 3 && j < 3) || i == j;
                if !orthotropic {
                    m = m.max(self.0[i][j].abs());
                }
            }
        }
        m / scale
    }

    pub fn apply(&self, v: &[f64; 6]) -> [f64; 6] {
        let mut out = [0.0; 6];
        for (i, row) in self.0.iter().enumerate() {
            out[i] = row.iter().zip(v).map(|(a, b)| a * b).sum();
        }
        out
    }

    pub fn max_relative_difference(&self, other: &VoigtMatrix6) -> f64 {
        let scale = self.max_abs().max(other.max_abs());
        let mut m = 0.0f64;
        for i in 0..6 {
            for j in 0..6 {
                m = m.max((self.0[i][j] - other.0[i][j]).abs());
            }
        }
        if scale == 0.0 {
            m
        } else {
            m / scale
        }
    }
}

/// Isotropic stiffness in Lamé form.
pub fn isotropic_voigt(phase: &IsotropicPhase) -> VoigtMatrix6 {
    let lambda = phase.lambda();
    let mu = phase.mu();
    let mut c = VoigtMatrix6::ZERO;
    for i in 0..3 {
        for j in 0..3 {
            c.0[i][j] = lambda;
        }
        c.0[i][i] = lambda + 2.0 * mu;
        c.0[i + 3][i + 3] = mu;
    }
    c
}

/// Unit macroscopic strain in Voigt order `(xx, yy, zz, yz, zx, xy)`, shear
/// components as engineering strains.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrainLoadCase {
    pub macro_strain: [f64; 6],
}

impl StrainLoadCase {
    /// The canonical case with a unit value in component `m`.
    pub fn unit(m: usize) -> Self {
        assert!(m < 6, "Voigt component index out of range");
        let mut macro_strain = [0.0; 6];
        macro_strain[m] = 1.0;
        StrainLoadCase { macro_strain }
    }

    pub fn canonical() -> [StrainLoadCase; 6] {
        core::array::from_fn(Self::unit)
    }

    /// Symmetric strain tensor (tensorial shear = engineering / 2).
    pub fn tensor(&self) -> [[f64; 3]; 3] {
        let e = &self.macro_strain;
        [
            [e[0], 0.5 * e[5], 0.5 * e[4]],
            [0.5 * e[5], e[1], 0.5 * e[3]],
            [0.5 * e[4], 0.5 * e[3], e[2]],
        ]
    }
}

/// Element-averaged stresses (GPa) for one load case, in grid order.
#[derive(Clone, Debug, PartialEq)]
pub struct StressField {
    pub n: usize,
    pub stresses: alloc::vec::Vec<[f64; 6]>,
}

impl StressField {
    /// Volume average, summed sequentially in grid order.
    pub fn average(&self) -> [f64; 6] {
        let mut acc = [0.0; 6];
        for s in &self.stresses {
            for c in 0..6 {
                acc[c] += s[c];
            }
        }
        let inv = 1.0 / self.stresses.len() as f64;
        acc.map(|v| v * inv)
    }
}

/// Result of [`homogenize`].
#[derive(Clone, Debug, PartialEq)]
pub struct Homogenization {
    /// Symmetrized effective stiffness.
    pub stiffness: VoigtMatrix6,
    /// Relative asymmetry before symmetrization.
    pub asymmetry: f64,
    /// Relative size of entries outside the orthotropic pattern.
    pub orthotropy_defect: f64,
    pub iterations: [usize; 6],
}

/// Runs the six canonical load cases and averages the stress fields.
pub fn homogenize(grid: &PhaseGrid, phases: &Phases, opts: &SolverOptions) -> Result<Homogenization> {
    let problem = solver::PeriodicProblem::new(grid, phases)?;
    opts.validate()?;

    let solve = |m: usize| -> Result<([f64; 6], usize)> {
        let sol = problem.solve(&StrainLoadCase::unit(m), opts)?;
        Ok((sol.stress.average(), sol.iterations))
    };

    #[cfg(feature = "parallel")]
    let columns: alloc::vec::Vec<Result<([f64; 6], usize)>> = {
        use rayon::prelude::*;
        (0..6).into_par_iter().map(solve).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let columns: alloc::vec::Vec<Result<([f64; 6], usize)>> = (0..6).map(solve).collect();

    let mut raw = VoigtMatrix6::ZERO;
    let mut iterations = [0; 6];
    for (m, col) in columns.into_iter().enumerate() {
        let (avg, its) = col?;
        for i in 0..6 {
            raw.0[i][m] = avg[i];
        }
        iterations[m] = its;
    }
    Ok(Homogenization {
        stiffness: raw.symmetrized(),
        asymmetry: raw.asymmetry(),
        orthotropy_defect: raw.orthotropy_defect(),
        iterations,
    })
}

/// The twelve engineering constants in label order
/// `E11 E22 E33 G23 G13 G12 nu21 nu31 nu12 nu32 nu13 nu23`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EffectiveProperties {
    pub e11: f64,
    pub e22: f64,
    pub e33: f64,
    pub g23: f64,
    pub g13: f64,
    pub g12: f64,
    pub nu21: f64,
    pub nu31: f64,
    pub nu12: f64,
    pub nu32: f64,
    pub nu13: f64,
    pub nu23: f64,
}

pub const COMPONENT_NAMES: [&str; 12] = [
    "E11", "E22", "E33", "G23", "G13", "G12", "nu21", "nu31", "nu12", "nu32", "nu13", "nu23",
];

/// Units of each label component.
pub const COMPONENT_UNITS: [&str; 12] = [
    "GPa", "GPa", "GPa", "GPa", "GPa", "GPa", "-", "-", "-", "-", "-", "-",
];

/// Number of modulus components at the front of the label vector.
pub const N_MODULI: usize = 6;

impl EffectiveProperties {
    pub fn to_array(&self) -> [f64; 12] {
        [
            self.e11, self.e22, self.e33, self.g23, self.g13, self.g12, self.nu21, self.nu31,
            self.nu12, self.nu32, self.nu13, self.nu23,
        ]
    }

    pub fn from_array(a: [f64; 12]) -> Self {
        EffectiveProperties {
            e11: a[0],
            e22: a[1],
            e33: a[2],
            g23: a[3],
            g13: a[4],
            g12: a[5],
            nu21: a[6],
            nu31: a[7],
            nu12: a[8],
            nu32: a[9],
            nu13: a[10],
            nu23: a[11],
        }
    }
}

/// Reads the engineering constants off the compliance `S = C^-1` of the
/// orthotropic part of `c`. Normal-shear and shear-shear coupling is dropped
/// first (see [`VoigtMatrix6::orthotropy_defect`] for its magnitude).
pub fn extract_engineering_constants(c: &VoigtMatrix6) -> Result<EffectiveProperties> {
    let n = |i: usize, j: usize| 0.5 * (c.0[i][j] + c.0[j][i]);
    let (a11, a22, a33) = (n(0, 0), n(1, 1), n(2, 2));
    let (a12, a13, a23) = (n(0, 1), n(0, 2), n(1, 2));

    // Cofactors of the symmetric normal block; S is symmetric by construction.
    let c11 = a22 * a33 - a23 * a23;
    let c12 = a13 * a23 - a12 * a33;
    let c13 = a12 * a23 - a13 * a22;
    let c22 = a11 * a33 - a13 * a13;
    let c23 = a12 * a13 - a11 * a23;
    let c33 = a11 * a22 - a12 * a12;
    let det = a11 * c11 + a12 * c12 + a13 * c13;

    let scale = (a11 * a22 * a33).abs();
    if !(det.is_finite() && det.abs() > 1e-12 * scale && scale > 0.0) {
        return Err(Error::SingularMatrix);
    }
    let s11 = c11 / det;
    let s22 = c22 / det;
    let s33 = c33 / det;
    let s12 = c12 / det;
    let s13 = c13 / det;
    let s23 = c23 / det;
    if !(s11 > 0.0 && s22 > 0.0 && s33 > 0.0) {
        return Err(Error::SingularMatrix);
    }
    let (c44, c55, c66) = (c.0[3][3], c.0[4][4], c.0[5][5]);
    if !(c44 > 0.0 && c55 > 0.0 && c66 > 0.0) {
        return Err(Error::SingularMatrix);
    }

    // Shear compliances of the orthotropic part.
    let (s44, s55, s66) = (1.0 / c44, 1.0 / c55, 1.0 / c66);

    let e11 = 1.0 / s11;
    let e22 = 1.0 / s22;
    let e33 = 1.0 / s33;
    Ok(EffectiveProperties {
        e11,
        e22,
        e33,
        g23: 1.0 / s44,
        g13: 1.0 / s55,
        g12: 1.0 / s66,
        nu21: -s12 * e22,
        nu31: -s13 * e33,
        nu12: -s12 * e11,
        nu32: -s23 * e33,
        nu13: -s13 * e11,
        nu23: -s23 * e22,
    })
}

/// Rule-of-mixtures bounds on the Young's modulus, in GPa.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct YoungBounds {
    pub reuss: f64,
    pub voigt: f64,
}

impl YoungBounds {
    pub fn contains(&self, e: f64, rel_tol: f64) -> bool {
        e >= self.reuss * (1.0 - rel_tol) && e <= self.voigt * (1.0 + rel_tol)
    }
}

pub fn voigt_reuss_bounds(phases: &Phases, vf: f64) -> Result<YoungBounds> {
    if !(0.0..=1.0).contains(&vf) {
        return Err(Error::config(format!("volume fraction must lie in [0, 1] (got {vf})")));
    }
    let (em, ei) = (phases.matrix.young_modulus, phases.inclusion.young_modulus);
    Ok(YoungBounds {
        voigt: vf * ei + (1.0 - vf) * em,
        reuss: 1.0 / (vf / ei + (1.0 - vf) / em),
    })
}
