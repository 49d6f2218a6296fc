//! Min-max label scaling with two pooled groups: the six moduli and the six
//! Poisson's ratios.

use serde::{Deserialize, Serialize};

use super::OUTPUT_DIM;
use crate::error::{Error, Result};
use crate::homog::N_MODULI;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupRange {
    pub min: f64,
    pub max: f64,
}

impl GroupRange {
    fn fit(values: impl Iterator<Item = f64>, name: &'static str) -> Result<Self> {
        let (mut min, mut max) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values {
            min = min.min(v);
            max = max.max(v);
        }
        if !(max > min) {
            return Err(Error::DegenerateRange(name));
        }
        Ok(GroupRange { min, max })
    }
}

/// Fitted on training labels only; other splits reuse it and may leave
/// `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabelScaler {
    pub moduli: GroupRange,
    pub poisson: GroupRange,
}

impl LabelScaler {
    pub fn fit(labels: &[[f64; OUTPUT_DIM]]) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::EmptySplit("train".into()));
        }
        Ok(LabelScaler {
            moduli: GroupRange::fit(labels.iter().flat_map(|l| l[..N_MODULI].iter().copied()), "moduli")?,
            poisson: GroupRange::fit(labels.iter().flat_map(|l| l[N_MODULI..].iter().copied()), "poisson")?,
        })
    }

    fn group(&self, component: usize) -> &GroupRange {
        if component < N_MODULI {
            &self.moduli
        } else {
            &self.poisson
        }
    }

    pub fn scale(&self, y: &[f64; OUTPUT_DIM]) -> [f64; OUTPUT_DIM] {
        core::array::from_fn(|i| {
            let g = self.group(i);
            (y[i] - g.min) / (g.max - g.min)
        })
    }

    pub fn unscale(&self, s: &[f64; OUTPUT_DIM]) -> [f64; OUTPUT_DIM] {
        core::array::from_fn(|i| {
            let g = self.group(i);
            g.min + s[i] * (g.max - g.min)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(moduli: [f64; 3], nu: [f64; 3]) -> alloc::vec::Vec<[f64; 12]> {
        (0..3)
            .map(|k| {
                let mut l = [0.0; 12];
                l[..6].fill(moduli[k]);
                l[6..].fill(nu[k]);
                l
            })
            .collect()
    }

    #[test]
    fn group_example() {
        let s = LabelScaler::fit(&labels([2.0, 4.0, 10.0], [0.2, 0.3, 0.25])).unwrap();
        let scaled: alloc::vec::Vec<f64> = [2.0, 4.0, 10.0]
            .iter()
            .map(|&v| s.scale(&[v; 12])[0])
            .collect();
        assert_eq!(scaled, [0.0, 0.25, 1.0]);
        assert_eq!(s.poisson, GroupRange { min: 0.2, max: 0.3 });
    }

    #[test]
    fn degenerate_groups() {
        assert_eq!(
            LabelScaler::fit(&labels([3.0; 3], [0.2, 0.3, 0.25])),
            Err(Error::DegenerateRange("moduli"))
        );
        assert_eq!(
            LabelScaler::fit(&labels([1.0, 2.0, 3.0], [0.3; 3])),
            Err(Error::DegenerateRange("poisson"))
        );
        assert!(LabelScaler::fit(&[]).is_err());
    }
}
