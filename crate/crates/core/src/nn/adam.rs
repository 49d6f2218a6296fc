//! Adam with bias correction.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use serde::{Deserialize, Serialize};

use super::Scalar;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(Error::config(format!("learning rate must be positive (got {})", self.lr)));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::config(format!("{name} must lie in [0, 1) (got {b})")));
            }
        }
        if !(self.eps.is_finite() && self.eps > 0.0) {
            return Err(Error::config(format!("eps must be positive (got {})", self.eps)));
        }
        Ok(())
    }
}

/// Moments are shaped like the flat parameter vector.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState<S> {
    pub config: AdamConfig,
    pub step: u64,
    pub m: Vec<S>,
    pub v: Vec<S>,
}

impl<S: Scalar> AdamState<S> {
    pub fn new(config: AdamConfig, n_params: usize) -> Self {
        AdamState {
            config,
            step: 0,
            m: vec![S::zero(); n_params],
            v: vec![S::zero(); n_params],
        }
    }

    /// One update of the parameters inside `active`; everything else, and
    /// the corresponding moments, is left untouched.
    pub fn update(&mut self, params: &mut [S], grads: &[S], active: &[Range<usize>]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::shape(format!(
                "adam state holds {} moments; got {} parameters and {} gradients",
                self.m.len(),
                params.len(),
                grads.len()
            )));
        }
        if let Some(r) = active.iter().find(|r| r.end > params.len()) {
            return Err(Error::shape(format!("active range {r:?} exceeds {} parameters", params.len())));
        }
        self.step += 1;
        let c = &self.config;
        let t = self.step as f64;
        let b1 = S::of(c.beta1);
        let b2 = S::of(c.beta2);
        let one_m_b1 = S::of(1.0 - c.beta1);
        let one_m_b2 = S::of(1.0 - c.beta2);
        let corr1 = S::of(1.0 / (1.0 - libm::pow(c.beta1, t)));
        let corr2 = S::of(1.0 / (1.0 - libm::pow(c.beta2, t)));
        let lr = S::of(c.lr);
        let eps = S::of(c.eps);
        for r in active {
            let p = &mut params[r.clone()];
            let g = &grads[r.clone()];
            let m = &mut self.m[r.clone()];
            let v = &mut self.v[r.clone()];
            for i in 0..p.len() {
                m[i] = b1 * m[i] + one_m_b1 * g[i];
                v[i] = b2 * v[i] + one_m_b2 * g[i] * g[i];
                let m_hat = m[i] * corr1;
                let v_hat = v[i] * corr2;
                p[i] = p[i] - lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut s = AdamState::<f64>::new(AdamConfig::default(), 3);
        let mut p = [1.0, -2.0, 0.5];
        s.update(&mut p, &[0.0; 3], &[0..3]).unwrap();
        assert_eq!(p, [1.0, -2.0, 0.5]);
        assert_eq!(s.step, 1);
    }

    #[test]
    fn first_step_is_lr_times_sign() {
        let lr = 1e-3;
        for g in [1e-3, 0.5, -3.0, 250.0] {
            let mut s = AdamState::<f64>::new(AdamConfig::default(), 1);
            let mut p = [0.0];
            s.update(&mut p, &[g], &[0..1]).unwrap();
            // |dp| = lr |g| / (|g| + eps)
            let step = -p[0];
            assert!(step.signum() == g.signum());
            assert!(step.abs() <= lr && step.abs() >= 0.999 * lr, "{step}");
        }
    }

    #[test]
    fn second_identical_step_is_not_larger() {
        let mut s = AdamState::<f64>::new(AdamConfig::default(), 1);
        let mut p = [0.0];
        s.update(&mut p, &[0.7], &[0..1]).unwrap();
        let first = p[0].abs();
        s.update(&mut p, &[0.7], &[0..1]).unwrap();
        let second = (p[0].abs() - first).abs();
        assert!(second <= first);
    }

    #[test]
    fn inactive_ranges_are_untouched() {
        let mut s = AdamState::<f32>::new(AdamConfig::default(), 4);
        let mut p = [1.0f32; 4];
        s.update(&mut p, &[1.0; 4], &[1..3]).unwrap();
        assert_eq!(p[0], 1.0);
        assert_eq!(p[3], 1.0);
        assert!(p[1] < 1.0 && p[2] < 1.0);
        assert_eq!(s.m[0], 0.0);
        assert!(s.update(&mut p, &[1.0; 3], &[0..3]).is_err());
    }
}
