//! Binary phase grids.
//!
//! Voxel `(i, j, k)` covers `[i h, (i+1) h) x [j h, (j+1) h) x [k h, (k+1) h)`
//! with `h = edge / n`, and is stored at linear index `i + n (j + n k)`
//! (x fastest). It is inclusion (1) iff its center lies strictly inside some
//! inclusion, matrix (0) otherwise.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;
use crate::microgeom::RveGeometry;

pub const MATRIX: u8 = 0;
pub const INCLUSION: u8 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct PhaseGrid {
    n: usize,
    spacing: f64,
    values: Vec<u8>,
}

impl PhaseGrid {
    pub fn new(n: usize, edge_length: f64, values: Vec<u8>) -> Result<Self> {
        if n == 0 {
            return Err(Error::config("grid size must be positive"));
        }
        if values.len() != n * n * n {
            return Err(Error::shape(format!(
                "grid of size {n} needs {} values, got {}",
                n * n * n,
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|&&v| v > 1) {
            return Err(Error::config(format!("phase values must be 0 or 1, found {v}")));
        }
        if !(edge_length.is_finite() && edge_length > 0.0) {
            return Err(Error::config("edge length must be positive"));
        }
        Ok(PhaseGrid {
            n,
            spacing: edge_length / n as f64,
            values,
        })
    }

    /// Single-phase grid.
    pub fn filled(n: usize, edge_length: f64, phase: u8) -> Result<Self> {
        Self::new(n, edge_length, vec![phase; n * n * n])
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn edge_length(&self) -> f64 {
        self.spacing * self.n as f64
    }

    #[inline]
    pub fn values(&self) -> &[u8] {
        &self.values
    }

    pub fn into_values(self) -> Vec<u8> {
        self.values
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.n * (j + self.n * k)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> u8 {
        self.values[self.index(i, j, k)]
    }

    pub fn set(&mut self, i: usize, j: usize, k: usize, phase: u8) {
        let idx = self.index(i, j, k);
        self.values[idx] = phase.min(1);
    }

    pub fn inclusion_count(&self) -> usize {
        self.values.iter().filter(|&&v| v == INCLUSION).count()
    }
}

/// Samples the geometry at voxel centers.
pub fn voxelize(geom: &RveGeometry, n: usize) -> Result<PhaseGrid> {
    if n < 3 {
        return Err(Error::config(format!("grid size must be at least 3 (got {n})")));
    }
    let mut grid = PhaseGrid::filled(n, geom.edge_length, MATRIX)?;
    let h = grid.spacing;

    // Only voxels whose center can lie inside the bounding box are visited.
    let range = |c: f64, r: f64| {
        let lo = math::floor((c - r) / h - 0.5).max(0.0) as usize;
        let hi = ((math::floor((c + r) / h - 0.5) as isize + 1).max(0) as usize).min(n - 1);
        lo..=hi
    };

    for inc in &geom.inclusions {
        let c = inc.center();
        let r = inc.bounding_radius();
        for k in range(c[2], r) {
            let z = (k as f64 + 0.5) * h;
            for j in range(c[1], r) {
                let y = (j as f64 + 0.5) * h;
                for i in range(c[0], r) {
                    let x = (i as f64 + 0.5) * h;
                    if inc.contains([x, y, z]) {
                        let idx = grid.index(i, j, k);
                        grid.values[idx] = INCLUSION;
                    }
                }
            }
        }
    }
    Ok(grid)
}

/// Fraction of inclusion voxels.
pub fn voxel_vf(grid: &PhaseGrid) -> f64 {
    grid.inclusion_count() as f64 / grid.values.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::microgeom::Inclusion;
    use approx::assert_relative_eq;

    #[test]
    fn empty_geometry_is_all_matrix() {
        let g = voxelize(&RveGeometry::empty(1.0, 0), 9).unwrap();
        assert!(g.values().iter().all(|&v| v == MATRIX));
        assert_eq!(voxel_vf(&g), 0.0);
    }

    #[test]
    fn rejects_tiny_grid() {
        assert!(matches!(
            voxelize(&RveGeometry::empty(1.0, 0), 2),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn vf_of_simple_grids() {
        assert_eq!(voxel_vf(&PhaseGrid::filled(5, 1.0, 1).unwrap()), 1.0);
        let mut v = vec![0u8; 64];
        for k in 0..4 {
            for j in 0..4 {
                for i in 0..4 {
                    v[i + 4 * (j + 4 * k)] = ((i + j + k) % 2) as u8;
                }
            }
        }
        assert_eq!(voxel_vf(&PhaseGrid::new(4, 1.0, v).unwrap()), 0.5);
    }

    #[test]
    fn centered_sphere_volume() {
        let mut geom = RveGeometry::empty(1.0, 0);
        geom.inclusions.push(Inclusion::Sphere {
            center: [0.5; 3],
            radius: 0.3,
        });
        let g = voxelize(&geom, 101).unwrap();
        let exact = 4.0 / 3.0 * core::f64::consts::PI * 0.027;
        assert_relative_eq!(voxel_vf(&g), exact, max_relative = 0.01);
    }

    #[test]
    fn surface_voxel_is_matrix() {
        // Voxel centers at 0.125 + 0.25 k; the sphere surface passes exactly
        // through the center of voxel (2, 1, 1).
        let mut geom = RveGeometry::empty(1.0, 0);
        geom.inclusions.push(Inclusion::Sphere {
            center: [0.375; 3],
            radius: 0.25,
        });
        let g = voxelize(&geom, 4).unwrap();
        assert_eq!(g.get(1, 1, 1), INCLUSION);
        assert_eq!(g.get(2, 1, 1), MATRIX);
        assert_eq!(g.get(0, 1, 1), MATRIX);
        assert_eq!(g.inclusion_count(), 1);
    }

    #[test]
    fn bounding_box_scan_matches_full_scan() {
        let mut geom = RveGeometry::empty(1.0, 0);
        geom.inclusions.push(Inclusion::Ellipsoid {
            center: [0.31, 0.52, 0.77],
            semi_axes: [0.1, 0.06, 0.09],
        });
        geom.inclusions.push(Inclusion::Sphere {
            center: [0.1, 0.1, 0.1],
            radius: 0.1,
        });
        let n = 23;
        let g = voxelize(&geom, n).unwrap();
        let h = 1.0 / n as f64;
        for k in 0..n {
            for j in 0..n {
                for i in 0..n {
                    let p = [(i as f64 + 0.5) * h, (j as f64 + 0.5) * h, (k as f64 + 0.5) * h];
                    let inside = geom.inclusions.iter().any(|inc| inc.contains(p));
                    assert_eq!(g.get(i, j, k) == INCLUSION, inside);
                }
            }
        }
    }
}
