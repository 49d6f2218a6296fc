//! Trilinear 8-node hexahedron on a cube of side `h`.
//!
//! Local node `a` sits at offset `(a & 1, (a >> 1) & 1, (a >> 2) & 1) * h`;
//! its degrees of freedom are `3a + {0, 1, 2}`.

use super::VoigtMatrix6;

pub const NODES: usize = 8;
pub const DOFS: usize = 24;

pub type ElementMatrix = [[f64; DOFS]; DOFS];
pub type StrainOperator = [[f64; DOFS]; 6];

#[inline]
pub fn node_offset(a: usize) -> [usize; 3] {
    [a & 1, (a >> 1) & 1, (a >> 2) & 1]
}

/// Physical gradients of the eight shape functions at reference point
/// `xi in [-1, 1]^3`.
fn shape_gradients(xi: [f64; 3], h: f64) -> [[f64; 3]; NODES] {
    let mut g = [[0.0; 3]; NODES];
    let scale = 2.0 / h;
    for (a, ga) in g.iter_mut().enumerate() {
        let o = node_offset(a);
        let s = [
            2.0 * o[0] as f64 - 1.0,
            2.0 * o[1] as f64 - 1.0,
            2.0 * o[2] as f64 - 1.0,
        ];
        let f = [1.0 + s[0] * xi[0], 1.0 + s[1] * xi[1], 1.0 + s[2] * xi[2]];
        ga[0] = 0.125 * s[0] * f[1] * f[2] * scale;
        ga[1] = 0.125 * s[1] * f[0] * f[2] * scale;
        ga[2] = 0.125 * s[2] * f[0] * f[1] * scale;
    }
    g
}

/// Voigt strain-displacement matrix `B` (engineering shear).
pub fn strain_operator(xi: [f64; 3], h: f64) -> StrainOperator {
    let g = shape_gradients(xi, h);
    let mut b = [[0.0; DOFS]; 6];
    for (a, ga) in g.iter().enumerate() {
        let (ux, uy, uz) = (3 * a, 3 * a + 1, 3 * a + 2);
        b[0][ux] = ga[0];
        b[1][uy] = ga[1];
        b[2][uz] = ga[2];
        b[3][uy] = ga[2];
        b[3][uz] = ga[1];
        b[4][ux] = ga[2];
        b[4][uz] = ga[0];
        b[5][ux] = ga[1];
        b[5][uy] = ga[0];
    }
    b
}

/// `B` at the element center. Since each strain component is at most
/// bilinear in the other two coordinates, this is also the element average
/// of `B`.
pub fn center_strain_operator(h: f64) -> StrainOperator {
    strain_operator([0.0; 3], h)
}

/// `K = integral of B^T D B` by 2x2x2 Gauss quadrature (exact for this
/// element).
pub fn stiffness(d: &VoigtMatrix6, h: f64) -> ElementMatrix {
    let gp = 1.0 / libm::sqrt(3.0);
    let weight = (0.5 * h) * (0.5 * h) * (0.5 * h);
    let mut k = [[0.0; DOFS]; DOFS];
    for q in 0..8 {
        let o = node_offset(q);
        let xi = [
            gp * (2.0 * o[0] as f64 - 1.0),
            gp * (2.0 * o[1] as f64 - 1.0),
            gp * (2.0 * o[2] as f64 - 1.0),
        ];
        let b = strain_operator(xi, h);
        // db = D B
        let mut db = [[0.0; DOFS]; 6];
        for i in 0..6 {
            for c in 0..DOFS {
                let mut s = 0.0;
                for j in 0..6 {
                    s += d.0[i][j] * b[j][c];
                }
                db[i][c] = s;
            }
        }
        for r in 0..DOFS {
            for c in 0..DOFS {
                let mut s = 0.0;
                for i in 0..6 {
                    s += b[i][r] * db[i][c];
                }
                k[r][c] += s * weight;
            }
        }
    }
    // Quadrature sums are symmetric up to rounding; make it exact.
    for r in 0..DOFS {
        for c in 0..r {
            let v = 0.5 * (k[r][c] + k[c][r]);
            k[r][c] = v;
            k[c][r] = v;
        }
    }
    k
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::homog::{isotropic_voigt, IsotropicPhase};
    use approx::assert_relative_eq;

    fn affine(e: [[f64; 3]; 3], h: f64) -> [f64; DOFS] {
        let mut u = [0.0; DOFS];
        for a in 0..NODES {
            let o = node_offset(a);
            let x = [o[0] as f64 * h, o[1] as f64 * h, o[2] as f64 * h];
            for i in 0..3 {
                u[3 * a + i] = (0..3).map(|j| e[i][j] * x[j]).sum();
            }
        }
        u
    }

    #[test]
    fn rigid_translations_are_in_the_kernel() {
        let k = stiffness(&isotropic_voigt(&IsotropicPhase::MATRIX), 0.1);
        for dir in 0..3 {
            for r in 0..DOFS {
                let s: f64 = (0..NODES).map(|a| k[r][3 * a + dir]).sum();
                assert!(s.abs() < 1e-10, "row {r} dir {dir}: {s}");
            }
        }
    }

    #[test]
    fn center_operator_recovers_affine_strain() {
        let b = center_strain_operator(0.37);
        let e = [[0.1, 0.02, -0.03], [0.02, -0.2, 0.05], [-0.03, 0.05, 0.3]];
        let u = affine(e, 0.37);
        let eps: alloc::vec::Vec<f64> =
            b.iter().map(|row| row.iter().zip(&u).map(|(p, q)| p * q).sum()).collect();
        let expected = [0.1, -0.2, 0.3, 0.1, -0.06, 0.04];
        for (a, b) in eps.iter().zip(expected) {
            assert_relative_eq!(*a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn strain_energy_of_affine_field() {
        // u^T K u = V * eps^T D eps for a uniform strain.
        let h = 0.25;
        let d = isotropic_voigt(&IsotropicPhase::INCLUSION);
        let k = stiffness(&d, h);
        let e = [[0.01, 0.0, 0.004], [0.0, -0.02, 0.0], [0.004, 0.0, 0.005]];
        let u = affine(e, h);
        let mut energy = 0.0;
        for r in 0..DOFS {
            for c in 0..DOFS {
                energy += u[r] * k[r][c] * u[c];
            }
        }
        let eps = [0.01, -0.02, 0.005, 0.0, 0.008, 0.0];
        let sig = d.apply(&eps);
        let expected: f64 = h * h * h * eps.iter().zip(sig).map(|(a, b)| a * b).sum::<f64>();
        assert_relative_eq!(energy, expected, max_relative = 1e-12);
    }
}
