//! Voxelization convergence and homogenization properties on packed RVEs.

use approx::assert_relative_eq;
use voxhomog_core::homog::*;
use voxhomog_core::microgeom::{analytic_vf, generate_rve, PackingConfig};
use voxhomog_core::voxel::{voxel_vf, voxelize, PhaseGrid};

#[test]
fn voxel_vf_converges_with_resolution() {
    let cfg = PackingConfig::default();
    for seed in [3, 4, 5] {
        let g = generate_rve(0.2, &cfg, seed).unwrap();
        let exact = analytic_vf(&g);
        let errors: Vec<f64> = [33, 65, 129]
            .iter()
            .map(|&n| (voxel_vf(&voxelize(&g, n).unwrap()) - exact).abs())
            .collect();
        assert!(errors[1] < 1.1 * errors[0], "{errors:?}");
        assert!(errors[2] < 1.1 * errors[1], "{errors:?}");
    }
}

#[test]
fn resolution_floor() {
    // Smallest sphere diameter in voxels at the full-scale grid.
    let spacing = 1.0 / 101.0;
    assert!(2.0 * 0.05 / spacing >= 10.0);
}

#[test]
fn single_phase_grids_are_exact() {
    let phases = Phases::default();
    let opts = SolverOptions::default();
    for n in [17, 33] {
        for (phase, p) in [(0u8, phases.matrix), (1, phases.inclusion)] {
            let grid = PhaseGrid::filled(n, 1.0, phase).unwrap();
            let h = homogenize(&grid, &phases, &opts).unwrap();
            assert!(h.stiffness.max_relative_difference(&isotropic_voigt(&p)) < 1e-8);
            let e = extract_engineering_constants(&h.stiffness).unwrap();
            for v in [e.e11, e.e22, e.e33] {
                assert_relative_eq!(v, p.young_modulus, max_relative = 1e-8);
            }
            for v in [e.nu21, e.nu31, e.nu12, e.nu32, e.nu13, e.nu23] {
                assert_relative_eq!(v, p.poisson_ratio, max_relative = 1e-8);
            }
            for v in [e.g23, e.g13, e.g12] {
                assert_relative_eq!(v, p.mu(), max_relative = 1e-8);
            }
        }
    }
}

#[test]
fn packed_rves_respect_bounds_and_symmetry() {
    let phases = Phases::default();
    let opts = SolverOptions::default();
    let cfg = PackingConfig::default();
    let mut moduli = Vec::new();
    for i in 0..20 {
        let vf = 0.02 + 0.26 * i as f64 / 19.0;
        let g = generate_rve(vf, &cfg, 500 + i).unwrap();
        let grid = voxelize(&g, 33).unwrap();
        let h = homogenize(&grid, &phases, &opts).unwrap();
        assert!(h.asymmetry < 1e-6, "asymmetry {}", h.asymmetry);
        let e = extract_engineering_constants(&h.stiffness).unwrap();
        let b = voigt_reuss_bounds(&phases, voxel_vf(&grid)).unwrap();
        for v in [e.e11, e.e22, e.e33] {
            assert!(b.reuss <= v && v <= b.voigt, "{v} outside [{}, {}]", b.reuss, b.voigt);
        }
        for v in e.to_array()[N_MODULI..].iter() {
            assert!(*v > 0.0 && *v < 0.5);
        }
        let a = e.to_array();
        assert_relative_eq!(a[8] / a[0], a[6] / a[1], max_relative = 1e-12);
        moduli.push((vf, e.e11));
    }
    // Stiffness grows with the inclusion content between the ends of the range.
    assert!(moduli[19].1 > moduli[0].1);
}

fn e11(g: &voxhomog_core::microgeom::RveGeometry, n: usize) -> f64 {
    let h = homogenize(&voxelize(g, n).unwrap(), &Phases::default(), &SolverOptions::default()).unwrap();
    extract_engineering_constants(&h.stiffness).unwrap().e11
}

#[test]
fn mesh_refinement_at_moderate_fraction() {
    let g = generate_rve(0.1, &PackingConfig::default(), 11).unwrap();
    let (coarse, fine) = (e11(&g, 33), e11(&g, 65));
    assert!(((coarse - fine) / fine).abs() < 0.02, "{coarse} vs {fine}");
}

#[test]
fn refinement_softens_dense_packings() {
    // Staircase interfaces overestimate stiffness at first order in the
    // voxel size, so the modulus decreases toward the continuum value.
    let g = generate_rve(0.28, &PackingConfig::default(), 13).unwrap();
    let (coarse, fine) = (e11(&g, 33), e11(&g, 65));
    assert!(fine < coarse, "{coarse} vs {fine}");
    assert!((coarse - fine) / fine < 0.06, "{coarse} vs {fine}");
}
