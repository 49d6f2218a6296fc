//! Packing invariants audited by an independent all-pairs scan.

use proptest::prelude::*;
use voxhomog_core::microgeom::*;

/// Clearance of two axis-aligned ellipsoids: the contact function of the
/// `clearance / 2`-inflated bodies, maximized over a dense grid, exceeds 1.
fn ellipsoids_clear(ca: [f64; 3], a: [f64; 3], cb: [f64; 3], b: [f64; 3], clearance: f64) -> bool {
    let g = 0.5 * clearance;
    (1..4000).any(|s| {
        let l = s as f64 / 4000.0;
        let f: f64 = (0..3)
            .map(|i| {
                let d = ca[i] - cb[i];
                d * d / ((1.0 - l) * (a[i] + g).powi(2) + l * (b[i] + g).powi(2))
            })
            .sum();
        l * (1.0 - l) * f > 1.0
    })
}

/// Re-checks every geometry invariant without the generator's cell grid.
fn audit(g: &RveGeometry, cfg: &PackingConfig) {
    let l = g.edge_length;
    for inc in &g.inclusions {
        let r = inc.bounding_radius();
        let c = inc.center();
        for &x in &c {
            assert!(x - r >= 0.0 && x + r <= l, "inclusion crosses a face: {inc:?}");
        }
        match *inc {
            Inclusion::Sphere { radius, .. } => assert!(radius >= cfg.r_min && radius <= cfg.r_max),
            Inclusion::Ellipsoid { semi_axes, .. } => {
                assert!(semi_axes.iter().all(|&a| a >= cfg.r_min && a <= cfg.r_max))
            }
        }
    }
    for (i, a) in g.inclusions.iter().enumerate() {
        for b in &g.inclusions[..i] {
            let (ca, cb) = (a.center(), b.center());
            let d2: f64 = (0..3).map(|k| (ca[k] - cb[k]) * (ca[k] - cb[k])).sum();
            let min = a.bounding_radius() + b.bounding_radius() + cfg.gap;
            if d2.sqrt() > min {
                continue;
            }
            match (*a, *b) {
                (Inclusion::Ellipsoid { semi_axes: sa, .. }, Inclusion::Ellipsoid { semi_axes: sb, .. }) => {
                    // Grid maximum sits a hair under the true maximum.
                    assert!(ellipsoids_clear(ca, sa, cb, sb, 0.99 * cfg.gap), "overlap between {a:?} and {b:?}");
                }
                _ => panic!("overlap between {a:?} and {b:?}"),
            }
        }
    }
    let vf: f64 = g.inclusions.iter().map(|i| i.volume()).sum::<f64>() / (l * l * l);
    assert!((vf - g.achieved_vf).abs() < 1e-12);
    assert!((vf - g.target_vf).abs() <= cfg.vf_tolerance, "vf {vf} vs {}", g.target_vf);
}

#[test]
fn vf_grid_times_twenty_seeds() {
    let cfg = PackingConfig::default();
    for step in 1..=14 {
        let vf = 0.02 * step as f64;
        for seed in 0..20 {
            let g = generate_rve(vf, &cfg, 1000 * step + seed).unwrap();
            audit(&g, &cfg);
            assert!((analytic_vf(&g) - vf).abs() <= cfg.vf_tolerance);
        }
    }
}

#[test]
fn dense_spheres_hundred_seeds() {
    let cfg = PackingConfig::default();
    for seed in 0..100 {
        let g = generate_rve(0.28, &cfg, seed).unwrap();
        audit(&g, &cfg);
    }
}

#[test]
fn ellipsoids_across_range() {
    let cfg = PackingConfig::with_shape(ShapeKind::Ellipsoid);
    for (i, vf) in [0.02, 0.1, 0.2, 0.28].into_iter().enumerate() {
        for seed in 0..20 {
            let g = generate_rve(vf, &cfg, 77 + 100 * i as u64 + seed).unwrap();
            assert!(g.inclusions.iter().all(|i| i.kind() == ShapeKind::Ellipsoid));
            audit(&g, &cfg);
        }
    }
}

#[test]
fn geometry_json_round_trip() {
    let g = generate_rve(0.12, &PackingConfig::with_shape(ShapeKind::Ellipsoid), 5).unwrap();
    let s = serde_json::to_string(&g).unwrap();
    assert!(s.contains("\"kind\":\"ellipsoid\""));
    assert!(s.contains("semi_axes"));
    let back: RveGeometry = serde_json::from_str(&s).unwrap();
    assert_eq!(back, g);
}

#[test]
fn full_scale_schedule() {
    let s = sample_schedule(0.02, 0.28, 14, 2000, DEFAULT_DECAY).unwrap();
    assert_eq!(s.total(), 2000);
    let ratio = s.bins[13].count as f64 / s.bins[0].count as f64;
    assert!((ratio - 0.1).abs() < 0.01, "{ratio}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn schedule_invariants(
        n_bins in 2usize..30,
        extra in 0usize..3000,
        decay in 0.0f64..40.0,
        lo in 0.0f64..0.2,
        width in 0.01f64..0.1,
    ) {
        let total = n_bins + extra;
        let s = sample_schedule(lo, lo + width, n_bins, total, decay).unwrap();
        prop_assert_eq!(s.bins.len(), n_bins);
        prop_assert_eq!(s.total(), total);
        prop_assert!(s.bins.iter().all(|b| b.count >= 1));
        prop_assert!(s.bins.windows(2).all(|w| w[0].count >= w[1].count));
        prop_assert!(s.bins.windows(2).all(|w| w[0].vf < w[1].vf));
    }

    #[test]
    fn zero_decay_is_uniform(n_bins in 2usize..20, extra in 0usize..500) {
        let total = n_bins + extra;
        let s = sample_schedule(0.02, 0.28, n_bins, total, 0.0).unwrap();
        let min = s.bins.iter().map(|b| b.count).min().unwrap();
        let max = s.bins.iter().map(|b| b.count).max().unwrap();
        prop_assert!(max - min <= 1);
    }
}
