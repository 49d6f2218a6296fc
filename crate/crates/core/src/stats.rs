//! Error metrics, distribution summaries and split assignment.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math;

/// Sample mean and unbiased standard deviation.
pub fn gaussian_fit(samples: &[f64]) -> Result<(f64, f64)> {
    let n = samples.len();
    if n < 2 {
        return Err(Error::TooFewSamples(n));
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    let ss: f64 = samples.iter().map(|x| (x - mean) * (x - mean)).sum();
    Ok((mean, math::sqrt(ss / (n - 1) as f64)))
}

/// Density of `N(mu, sigma^2)` at `x`.
pub fn gaussian_pdf(x: f64, mu: f64, sigma: f64) -> f64 {
    let z = (x - mu) / sigma;
    math::exp(-0.5 * z * z) / (sigma * math::sqrt(2.0 * core::f64::consts::PI))
}

/// Equal-width histogram; `edges.len() == counts.len() + 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

/// Bins span `[min, max]` of the data; the last bin is closed. A constant
/// sample gets a unit-width window around its value.
pub fn histogram(samples: &[f64], bins: usize) -> Result<Histogram> {
    if bins == 0 {
        return Err(Error::config("histogram needs at least one bin"));
    }
    if samples.is_empty() {
        return Err(Error::TooFewSamples(0));
    }
    let mut lo = samples.iter().copied().fold(f64::INFINITY, f64::min);
    let mut hi = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi <= lo {
        let half = if lo == 0.0 { 0.5 } else { 0.5 * lo.abs() * 1e-6 };
        lo -= half;
        hi += half;
    }
    let width = (hi - lo) / bins as f64;
    let edges: Vec<f64> = (0..=bins).map(|i| lo + width * i as f64).collect();
    let mut counts = vec![0usize; bins];
    for &x in samples {
        let b = (math::floor((x - lo) / width) as usize).min(bins - 1);
        counts[b] += 1;
    }
    Ok(Histogram { edges, counts })
}

/// Per-component mean absolute relative error in the units of the inputs.
pub fn mare<const D: usize>(pred: &[[f64; D]], truth: &[[f64; D]]) -> Result<[f64; D]> {
    if truth.is_empty() {
        return Err(Error::EmptySplit("evaluation".into()));
    }
    if pred.len() != truth.len() {
        return Err(Error::shape(alloc::format!(
            "{} predictions for {} labels",
            pred.len(),
            truth.len()
        )));
    }
    let mut out = [0.0; D];
    for (sample, (p, t)) in pred.iter().zip(truth).enumerate() {
        for c in 0..D {
            if t[c] == 0.0 {
                return Err(Error::ZeroLabel { sample, component: c });
            }
            out[c] += ((p[c] - t[c]) / t[c]).abs();
        }
    }
    for v in &mut out {
        *v /= truth.len() as f64;
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

/// Exact split sizes for `total` items from `ratio` by largest remainder
/// (ties to the earlier split).
pub fn split_counts(total: usize, ratio: [usize; 3]) -> Result<[usize; 3]> {
    let sum: usize = ratio.iter().sum();
    if sum == 0 {
        return Err(Error::config("split ratio must have a positive entry"));
    }
    let mut counts = [0usize; 3];
    let mut rem = [0usize; 3];
    for i in 0..3 {
        counts[i] = total * ratio[i] / sum;
        rem[i] = total * ratio[i] % sum;
    }
    let mut left = total - counts.iter().sum::<usize>();
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| rem[b].cmp(&rem[a]).then(a.cmp(&b)));
    for &i in order.iter().cycle() {
        if left == 0 {
            break;
        }
        if ratio[i] > 0 {
            counts[i] += 1;
            left -= 1;
        }
    }
    Ok(counts)
}

/// Split tag per item: seeded shuffle of `0..total`, then the first
/// `counts[0]` shuffled positions are train, the next val, the rest test.
pub fn assign_splits(total: usize, ratio: [usize; 3], seed: u64) -> Result<Vec<Split>> {
    let counts = split_counts(total, ratio)?;
    let mut order: Vec<usize> = (0..total).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut tags = vec![Split::Train; total];
    for (rank, &i) in order.iter().enumerate() {
        tags[i] = if rank < counts[0] {
            Split::Train
        } else if rank < counts[0] + counts[1] {
            Split::Val
        } else {
            Split::Test
        };
    }
    Ok(tags)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gaussian_fit_examples() {
        assert_eq!(gaussian_fit(&[1.0, 1.0, 1.0]).unwrap(), (1.0, 0.0));
        let (m, s) = gaussian_fit(&[0.0, 2.0]).unwrap();
        assert_eq!(m, 1.0);
        assert_relative_eq!(s, core::f64::consts::SQRT_2, max_relative = 1e-15);
        let (m, s) = gaussian_fit(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(m, 2.5);
        assert_relative_eq!(s, math::sqrt(5.0 / 3.0), max_relative = 1e-15);
        assert!((s - 1.2910).abs() < 5e-5);
        assert_eq!(gaussian_fit(&[3.0]), Err(Error::TooFewSamples(1)));
    }

    #[test]
    fn pdf_peak() {
        assert_relative_eq!(gaussian_pdf(0.0, 0.0, 1.0), 0.398_942_280_401_432_7, max_relative = 1e-15);
    }

    #[test]
    fn histogram_counts_everything() {
        let h = histogram(&[0.0, 0.1, 0.5, 0.9, 1.0], 4).unwrap();
        assert_eq!(h.edges.len(), 5);
        assert_eq!(h.counts, [2, 0, 1, 2]);
        let c = histogram(&[2.0; 7], 3).unwrap();
        assert_eq!(c.counts.iter().sum::<usize>(), 7);
        assert!(histogram(&[], 3).is_err());
    }

    #[test]
    fn mare_examples() {
        let y = [[2.0, -4.0], [1.0, 8.0]];
        assert_eq!(mare(&y, &y).unwrap(), [0.0, 0.0]);
        let p: Vec<[f64; 2]> = y.iter().map(|r| [1.01 * r[0], 1.01 * r[1]]).collect();
        for v in mare(&p, &y).unwrap() {
            assert_relative_eq!(v, 0.01, max_relative = 1e-12);
        }
        assert!(matches!(mare::<2>(&[], &[]), Err(Error::EmptySplit(_))));
        assert_eq!(
            mare(&[[1.0, 1.0]], &[[1.0, 0.0]]),
            Err(Error::ZeroLabel { sample: 0, component: 1 })
        );
    }

    #[test]
    fn split_counts_are_exact() {
        assert_eq!(split_counts(320, [200, 60, 60]).unwrap(), [200, 60, 60]);
        assert_eq!(split_counts(2000, [1400, 300, 300]).unwrap(), [1400, 300, 300]);
        assert_eq!(split_counts(300, [240, 30, 30]).unwrap(), [240, 30, 30]);
        assert_eq!(split_counts(120, [75, 23, 22]).unwrap(), [75, 23, 22]);
        assert_eq!(split_counts(10, [7, 2, 1]).unwrap(), [7, 2, 1]);
        assert_eq!(split_counts(11, [1, 1, 1]).unwrap().iter().sum::<usize>(), 11);
        assert_eq!(split_counts(5, [1, 0, 1]).unwrap()[1], 0);
    }

    #[test]
    fn splits_are_seeded() {
        let a = assign_splits(50, [3, 1, 1], 4).unwrap();
        assert_eq!(a, assign_splits(50, [3, 1, 1], 4).unwrap());
        assert_ne!(a, assign_splits(50, [3, 1, 1], 5).unwrap());
        assert_eq!(a.iter().filter(|&&s| s == Split::Train).count(), 30);
    }
}
