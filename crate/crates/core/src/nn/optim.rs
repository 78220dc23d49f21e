//! SGD with momentum.
//!
//! Update rule: `v <- momentum * v + grad; theta <- theta - lr * v`.
//! This is the accumulate-then-scale convention; the velocity buffer stores
//! unscaled gradient sums.

use crate::error::{Error, Result};
use crate::nn::snapshot::ParamSnapshot;

/// One optimizer step over a parameter snapshot, in place.
pub fn sgd_momentum_step(
    params: &mut ParamSnapshot,
    grads: &ParamSnapshot,
    velocity: &mut ParamSnapshot,
    lr: f64,
    momentum: f64,
) -> Result<()> {
    if !(lr > 0.0) {
        return Err(Error::config(format!("learning rate {lr} must be > 0")));
    }
    if !(0.0..1.0).contains(&momentum) {
        return Err(Error::config(format!("momentum {momentum} must be in [0, 1)")));
    }
    if !params.shape_congruent(grads) || !params.shape_congruent(velocity) {
        return Err(Error::config(
            "sgd_momentum_step: params, grads, velocity are not shape-congruent".to_string(),
        ));
    }
    for ((p, g), v) in params
        .entries_mut()
        .iter_mut()
        .zip(grads.entries())
        .zip(velocity.entries_mut().iter_mut())
    {
        for i in 0..p.values.len() {
            v.values[i] = momentum * v.values[i] + g.values[i];
            p.values[i] -= lr * v.values[i];
        }
    }
    Ok(())
}
