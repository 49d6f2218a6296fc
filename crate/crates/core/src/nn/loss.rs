//! Batch loss: mean over samples of the summed squared component error.

use alloc::format;

use super::Scalar;
use crate::error::{Error, Result};

/// `(1/n) sum_k sum_l (truth_kl - pred_kl)^2`. The component sum is not
/// averaged.
pub fn mse_loss<S: Scalar, A: AsRef<[S]>, B: AsRef<[S]>>(pred: &[A], truth: &[B]) -> Result<S> {
    if pred.len() != truth.len() {
        return Err(Error::shape(format!("{} predictions for {} targets", pred.len(), truth.len())));
    }
    if pred.is_empty() {
        return Err(Error::shape("loss of an empty batch"));
    }
    let mut total = S::zero();
    for (p, t) in pred.iter().zip(truth) {
        let (p, t) = (p.as_ref(), t.as_ref());
        if p.len() != t.len() {
            return Err(Error::shape(format!("row of {} predictions for {} targets", p.len(), t.len())));
        }
        for (&a, &b) in p.iter().zip(t) {
            let e = b - a;
            total = total + e * e;
        }
    }
    Ok(total / S::of(pred.len() as f64))
}
