//! Random two-phase RVE geometry.
//!
//! Inclusions are placed by hierarchical random sequential adsorption:
//! each trial draws a size from `U[r_min, r_hi]` and a center uniformly in
//! the region where the inclusion stays inside the cube, and is rejected if
//! it comes closer than `gap` to an earlier inclusion. After `max_attempts`
//! consecutive rejections the upper size bound `r_hi` shrinks by
//! `shrink_factor` (never below `r_min`). The last inclusion is sized to
//! close the remaining volume-fraction gap.
//!
//! Inclusions never cross the cube faces, so the analytic volume sum is the
//! exact volume fraction.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math;

/// Largest target volume fraction accepted by [`generate_rve`].
pub const MAX_TARGET_VF: f64 = 0.30;

/// Decay rate for which the last bin of the `[0.02, 0.28]` schedule holds a
/// tenth of the samples of the first bin.
pub const DEFAULT_DECAY: f64 = core::f64::consts::LN_10 / 0.26;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShapeKind {
    #[default]
    Sphere,
    Ellipsoid,
}

impl core::fmt::Display for ShapeKind {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(match self {
            ShapeKind::Sphere => "sphere",
            ShapeKind::Ellipsoid => "ellipsoid",
        })
    }
}

/// A single axis-aligned inclusion. Lengths are in mm.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Inclusion {
    Sphere { center: [f64; 3], radius: f64 },
    Ellipsoid { center: [f64; 3], semi_axes: [f64; 3] },
}

impl Inclusion {
    pub fn center(&self) -> [f64; 3] {
        match *self {
            Inclusion::Sphere { center, .. } | Inclusion::Ellipsoid { center, .. } => center,
        }
    }

    pub fn kind(&self) -> ShapeKind {
        match self {
            Inclusion::Sphere { .. } => ShapeKind::Sphere,
            Inclusion::Ellipsoid { .. } => ShapeKind::Ellipsoid,
        }
    }

    /// Radius of the smallest centered sphere containing the inclusion.
    pub fn bounding_radius(&self) -> f64 {
        match *self {
            Inclusion::Sphere { radius, .. } => radius,
            Inclusion::Ellipsoid { semi_axes: [a, b, c], .. } => a.max(b).max(c),
        }
    }

    pub fn volume(&self) -> f64 {
        match *self {
            Inclusion::Sphere { radius, .. } => 4.0 / 3.0 * PI * radius * radius * radius,
            Inclusion::Ellipsoid { semi_axes: [a, b, c], .. } => 4.0 / 3.0 * PI * a * b * c,
        }
    }

    /// Strict interior test: points on the surface are outside.
    #[inline]
    pub fn contains(&self, p: [f64; 3]) -> bool {
        match *self {
            Inclusion::Sphere { center, radius } => {
                let dx = p[0] - center[0];
                let dy = p[1] - center[1];
                let dz = p[2] - center[2];
                dx * dx + dy * dy + dz * dz < radius * radius
            }
            Inclusion::Ellipsoid { center, semi_axes } => {
                let mut q = 0.0;
                for i in 0..3 {
                    let t = (p[i] - center[i]) / semi_axes[i];
                    q += t * t;
                }
                q < 1.0
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RveGeometry {
    pub edge_length: f64,
    pub seed: u64,
    pub target_vf: f64,
    pub achieved_vf: f64,
    pub inclusions: Vec<Inclusion>,
}

impl RveGeometry {
    pub fn empty(edge_length: f64, seed: u64) -> Self {
        RveGeometry {
            edge_length,
            seed,
            target_vf: 0.0,
            achieved_vf: 0.0,
            inclusions: Vec::new(),
        }
    }
}

/// Knobs of the packing algorithm. Defaults reproduce the reference setup:
/// spheres with radius in `[0.05, 0.1]` mm in a 1 mm cube.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PackingConfig {
    pub shape: ShapeKind,
    pub r_min: f64,
    pub r_max: f64,
    pub edge_length: f64,
    /// Minimum surface-to-surface clearance between inclusions.
    pub gap: f64,
    /// Consecutive rejections before the size interval is narrowed.
    pub max_attempts: usize,
    pub shrink_factor: f64,
    /// Allowed absolute deviation of the achieved volume fraction.
    pub vf_tolerance: f64,
}

impl Default for PackingConfig {
    fn default() -> Self {
        PackingConfig {
            shape: ShapeKind::Sphere,
            r_min: 0.05,
            r_max: 0.1,
            edge_length: 1.0,
            gap: 0.005,
            max_attempts: 5000,
            shrink_factor: 0.9,
            vf_tolerance: 0.002,
        }
    }
}

impl PackingConfig {
    pub fn with_shape(shape: ShapeKind) -> Self {
        PackingConfig {
            shape,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.r_min,
            self.r_max,
            self.edge_length,
            self.gap,
            self.shrink_factor,
            self.vf_tolerance,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(Error::config("packing parameters must be finite"));
        }
        if self.edge_length <= 0.0 {
            return Err(Error::config("edge_length must be positive"));
        }
        if !(self.r_min > 0.0 && self.r_min <= self.r_max && self.r_max < self.edge_length / 2.0) {
            return Err(Error::config(format!(
                "radius range must satisfy 0 < r_min <= r_max < edge_length/2 (got [{}, {}], edge {})",
                self.r_min, self.r_max, self.edge_length
            )));
        }
        if self.gap < 0.0 {
            return Err(Error::config("gap must be non-negative"));
        }
        if self.max_attempts == 0 {
            return Err(Error::config("max_attempts must be at least 1"));
        }
        if !(self.shrink_factor > 0.0 && self.shrink_factor < 1.0) {
            return Err(Error::config("shrink_factor must lie in (0, 1)"));
        }
        if self.vf_tolerance <= 0.0 {
            return Err(Error::config("vf_tolerance must be positive"));
        }
        Ok(())
    }
}

/// Uniform bucket grid over the cube for neighbour queries. The cell width
/// is at least the largest possible interaction distance, so only the 27
/// surrounding cells need to be scanned.
struct CellGrid {
    cells_per_axis: usize,
    inv_width: f64,
    cells: Vec<Vec<u32>>,
    placed: Vec<([f64; 3], Size)>,
}

impl CellGrid {
    fn new(edge: f64, reach: f64) -> Self {
        let m = ((edge / reach) as usize).max(1);
        CellGrid {
            cells_per_axis: m,
            inv_width: m as f64 / edge,
            cells: vec![Vec::new(); m * m * m],
            placed: Vec::new(),
        }
    }

    fn cell_of(&self, p: [f64; 3]) -> [usize; 3] {
        let m = self.cells_per_axis;
        let f = |x: f64| ((x * self.inv_width) as usize).min(m - 1);
        [f(p[0]), f(p[1]), f(p[2])]
    }

    fn fits(&self, center: [f64; 3], size: Size, gap: f64) -> bool {
        let m = self.cells_per_axis as isize;
        let c = self.cell_of(center);
        for dk in -1..=1isize {
            let k = c[2] as isize + dk;
            if k < 0 || k >= m {
                continue;
            }
            for dj in -1..=1isize {
                let j = c[1] as isize + dj;
                if j < 0 || j >= m {
                    continue;
                }
                for di in -1..=1isize {
                    let i = c[0] as isize + di;
                    if i < 0 || i >= m {
                        continue;
                    }
                    let cell = (i + m * (j + m * k)) as usize;
                    for &id in &self.cells[cell] {
                        let (q, other) = self.placed[id as usize];
                        let d = [center[0] - q[0], center[1] - q[1], center[2] - q[2]];
                        if !separated(d, size, other, gap) {
                            return false;
                        }
                    }
                }
            }
        }
        true
    }

    fn insert(&mut self, center: [f64; 3], size: Size) {
        let m = self.cells_per_axis;
        let c = self.cell_of(center);
        let id = self.placed.len() as u32;
        self.placed.push((center, size));
        self.cells[c[0] + m * (c[1] + m * c[2])].push(id);
    }
}

/// Whether two inclusions whose centers differ by `d` keep a surface
/// clearance of at least `gap`. Spheres compare center distance; ellipsoid
/// pairs use the contact function of the two ellipsoids with every semi-axis
/// grown by `gap / 2`, which contain the `gap / 2` parallel bodies.
fn separated(d: [f64; 3], a: Size, b: Size, gap: f64) -> bool {
    let d2 = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
    let reach = a.bounding_radius() + b.bounding_radius() + gap;
    if d2 > reach * reach {
        return true;
    }
    let (Size::Ellipsoid(ea), Size::Ellipsoid(eb)) = (a, b) else {
        return false;
    };
    let inner = ea.iter().copied().fold(f64::INFINITY, f64::min) + eb.iter().copied().fold(f64::INFINITY, f64::min) + gap;
    if d2 <= inner * inner {
        return false;
    }
    let sq = |e: [f64; 3]| e.map(|x| (x + 0.5 * gap) * (x + 0.5 * gap));
    contact_max(d, sq(ea), sq(eb)) > 1.0
}

/// Maximum over `l` in `[0, 1]` of the contact function
/// `l (1 - l) sum d_i^2 / ((1 - l) a_i + l b_i)` of two axis-aligned
/// ellipsoids with squared semi-axes `a` and `b`; above 1 iff they are
/// disjoint. The function is concave in `l`.
fn contact_max(d: [f64; 3], a: [f64; 3], b: [f64; 3]) -> f64 {
    let f = |l: f64| {
        let mut s = 0.0;
        for i in 0..3 {
            s += d[i] * d[i] / ((1.0 - l) * a[i] + l * b[i]);
        }
        l * (1.0 - l) * s
    };
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let (mut lo, mut hi) = (0.0, 1.0);
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..60 {
        if f1.max(f2) > 1.0 {
            return f1.max(f2);
        }
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        }
    }
    f1.max(f2)
}

#[derive(Clone, Copy, Debug)]
enum Size {
    Sphere(f64),
    Ellipsoid([f64; 3]),
}

impl Size {
    fn volume(&self) -> f64 {
        match *self {
            Size::Sphere(r) => 4.0 / 3.0 * PI * r * r * r,
            Size::Ellipsoid([a, b, c]) => 4.0 / 3.0 * PI * a * b * c,
        }
    }

    fn bounding_radius(&self) -> f64 {
        match *self {
            Size::Sphere(r) => r,
            Size::Ellipsoid([a, b, c]) => a.max(b).max(c),
        }
    }

    fn at(self, center: [f64; 3]) -> Inclusion {
        match self {
            Size::Sphere(radius) => Inclusion::Sphere { center, radius },
            Size::Ellipsoid(semi_axes) => Inclusion::Ellipsoid { center, semi_axes },
        }
    }

    /// Shrinks the size so its volume equals `volume`, keeping every length
    /// inside `[lo, hi]`. Only called when the current volume is too large.
    fn fit_volume(self, volume: f64, lo: f64, hi: f64) -> Size {
        let product = 3.0 * volume / (4.0 * PI);
        match self {
            Size::Sphere(_) => Size::Sphere(math::cbrt(product).clamp(lo, hi)),
            Size::Ellipsoid(mut axes) => {
                for _ in 0..3 {
                    let current = axes[0] * axes[1] * axes[2];
                    if current <= product {
                        break;
                    }
                    let free = axes.iter().filter(|&&a| a > lo).count();
                    if free == 0 {
                        break;
                    }
                    let s = libm::pow(product / current, 1.0 / free as f64);
                    for a in axes.iter_mut().filter(|a| **a > lo) {
                        *a = (*a * s).clamp(lo, hi);
                    }
                }
                Size::Ellipsoid(axes)
            }
        }
    }
}

fn draw_size(rng: &mut ChaCha8Rng, shape: ShapeKind, lo: f64, hi: f64) -> Size {
    let mut draw = || if hi > lo { rng.random_range(lo..=hi) } else { lo };
    match shape {
        ShapeKind::Sphere => Size::Sphere(draw()),
        ShapeKind::Ellipsoid => {
            let a = draw();
            let b = draw();
            let c = draw();
            Size::Ellipsoid([a, b, c])
        }
    }
}

/// Packs inclusions into a cube until the analytic volume fraction is within
/// `cfg.vf_tolerance` of `target_vf`. Deterministic in `(target_vf, cfg, seed)`.
pub fn generate_rve(target_vf: f64, cfg: &PackingConfig, seed: u64) -> Result<RveGeometry> {
    cfg.validate()?;
    if !(target_vf.is_finite() && (0.0..=MAX_TARGET_VF).contains(&target_vf)) {
        return Err(Error::config(format!(
            "target_vf must lie in [0, {MAX_TARGET_VF}] (got {target_vf})"
        )));
    }

    let edge = cfg.edge_length;
    let cube = edge * edge * edge;
    let target = target_vf * cube;
    let tol = cfg.vf_tolerance * cube;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut grid = CellGrid::new(edge, 2.0 * cfg.r_max + cfg.gap);
    let mut inclusions = Vec::new();
    let mut volume = 0.0;
    let mut r_hi = cfg.r_max;

    loop {
        let remaining = target - volume;
        if remaining <= 0.5 * tol {
            break;
        }
        let mut size = draw_size(&mut rng, cfg.shape, cfg.r_min, r_hi);
        if size.volume() >= remaining {
            size = size.fit_volume(remaining, cfg.r_min, r_hi);
            // Placing the smallest admissible inclusion would overshoot by
            // more than stopping here undershoots.
            if size.volume() - remaining > remaining && remaining <= tol {
                break;
            }
        }

        let r = size.bounding_radius();
        let span = edge - 2.0 * r;
        let mut placed = false;
        for _ in 0..cfg.max_attempts {
            let center = [
                r + rng.random::<f64>() * span,
                r + rng.random::<f64>() * span,
                r + rng.random::<f64>() * span,
            ];
            if grid.fits(center, size, cfg.gap) {
                grid.insert(center, size);
                let inc = size.at(center);
                volume += inc.volume();
                inclusions.push(inc);
                placed = true;
                break;
            }
        }

        if !placed {
            if r_hi <= cfg.r_min {
                return Err(Error::PackingStalled {
                    attempts: cfg.max_attempts,
                    placed: inclusions.len(),
                    achieved: volume / cube,
                    target: target_vf,
                });
            }
            r_hi = (r_hi * cfg.shrink_factor).max(cfg.r_min);
        }
    }

    let mut geom = RveGeometry {
        edge_length: edge,
        seed,
        target_vf,
        achieved_vf: 0.0,
        inclusions,
    };
    geom.achieved_vf = analytic_vf(&geom);
    if (geom.achieved_vf - target_vf).abs() > cfg.vf_tolerance {
        return Err(Error::config(format!(
            "target vf {target_vf} unreachable within tolerance {} for radius range [{}, {}]",
            cfg.vf_tolerance, cfg.r_min, cfg.r_max
        )));
    }
    Ok(geom)
}

/// Sum of inclusion volumes over the cube volume.
pub fn analytic_vf(geom: &RveGeometry) -> f64 {
    let cube = geom.edge_length * geom.edge_length * geom.edge_length;
    geom.inclusions.iter().map(Inclusion::volume).sum::<f64>() / cube
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VfBin {
    pub vf: f64,
    pub count: usize,
}

/// Number of samples to generate at each target volume fraction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleSchedule {
    pub bins: Vec<VfBin>,
}

impl SampleSchedule {
    pub fn total(&self) -> usize {
        self.bins.iter().map(|b| b.count).sum()
    }

    /// One target VF per sample, bins in order.
    pub fn targets(&self) -> Vec<f64> {
        self.bins
            .iter()
            .flat_map(|b| core::iter::repeat(b.vf).take(b.count))
            .collect()
    }
}

/// Exponentially decaying sample counts over `n_bins` equally spaced volume
/// fractions in `[vf_min, vf_max]`.
///
/// Counts are proportional to `exp(-decay * vf)`, rounded by the largest
/// remainder method so they sum to `total`, and every bin gets at least one
/// sample.
pub fn sample_schedule(
    vf_min: f64,
    vf_max: f64,
    n_bins: usize,
    total: usize,
    decay: f64,
) -> Result<SampleSchedule> {
    if !(vf_min.is_finite() && vf_max.is_finite() && vf_min < vf_max) {
        return Err(Error::config(format!(
            "schedule needs vf_min < vf_max (got {vf_min}, {vf_max})"
        )));
    }
    if n_bins < 2 {
        return Err(Error::config("schedule needs at least 2 bins"));
    }
    if total < n_bins {
        return Err(Error::config(format!(
            "schedule total {total} is smaller than the number of bins {n_bins}"
        )));
    }
    if !(decay.is_finite() && decay >= 0.0) {
        return Err(Error::config("schedule decay must be a non-negative finite number"));
    }

    let step = (vf_max - vf_min) / (n_bins - 1) as f64;
    let vfs: Vec<f64> = (0..n_bins).map(|i| vf_min + step * i as f64).collect();
    let weights: Vec<f64> = vfs.iter().map(|v| math::exp(-decay * (v - vf_min))).collect();
    let sum: f64 = weights.iter().sum();
    let quotas: Vec<f64> = weights.iter().map(|w| total as f64 * w / sum).collect();

    let mut counts: Vec<usize> = quotas.iter().map(|q| math::floor(*q) as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..n_bins).collect();
    // Largest fractional part first; ties go to the lower VF.
    order.sort_by(|&a, &b| {
        let fa = quotas[a] - counts[a] as f64;
        let fb = quotas[b] - counts[b] as f64;
        fb.partial_cmp(&fa).unwrap_or(core::cmp::Ordering::Equal).then(a.cmp(&b))
    });
    for &i in order.iter().take(total.saturating_sub(assigned)) {
        counts[i] += 1;
    }

    // Empty bins borrow from the last bin of the most populated run, which
    // keeps the counts non-increasing.
    for i in 0..n_bins {
        if counts[i] == 0 {
            let max = *counts.iter().max().expect("n_bins >= 2");
            let donor = counts.iter().rposition(|&c| c == max).expect("max exists");
            counts[donor] -= 1;
            counts[i] = 1;
        }
    }

    Ok(SampleSchedule {
        bins: vfs
            .into_iter()
            .zip(counts)
            .map(|(vf, count)| VfBin { vf, count })
            .collect(),
    })
}
