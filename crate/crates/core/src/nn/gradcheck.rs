//! Central finite-difference gradient checking.
//!
//! The numeric side only ever evaluates the loss, so it stays independent
//! of the analytic backward path it is used to verify.

use crate::error::Result;
use crate::nn::snapshot::ParamSnapshot;

/// Outcome of comparing analytic gradients against a numeric oracle.
#[derive(Debug, Clone, Copy)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub param_count: usize,
}

/// Default perturbation step for 64-bit reals.
pub const DEFAULT_STEP: f64 = 1e-5;

/// Relative error with a small absolute floor, so near-zero gradient pairs
/// are compared absolutely against the floor instead of blowing up.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

/// Numeric gradient of `loss` w.r.t. every parameter value, by central
/// differences: `(L(theta + h) - L(theta - h)) / 2h`.
pub fn finite_diff_grads<F>(params: &ParamSnapshot, mut loss: F, step: f64) -> Result<ParamSnapshot>
where
    F: FnMut(&ParamSnapshot) -> Result<f64>,
{
    let mut work = params.clone();
    let mut grads = params.zeros_like();
    for e in 0..params.entries().len() {
        for i in 0..params.entries()[e].values.len() {
            let orig = params.entries()[e].values[i];
            work.entries_mut()[e].values[i] = orig + step;
            let plus = loss(&work)?;
            work.entries_mut()[e].values[i] = orig - step;
            let minus = loss(&work)?;
            work.entries_mut()[e].values[i] = orig;
            grads.entries_mut()[e].values[i] = (plus - minus) / (2.0 * step);
        }
    }
    Ok(grads)
}

/// Compares an analytic gradient snapshot against a numeric one.
pub fn compare_grads(analytic: &ParamSnapshot, numeric: &ParamSnapshot) -> GradCheckReport {
    let mut max_rel = 0.0f64;
    let mut count = 0usize;
    for (a, n) in analytic.entries().iter().zip(numeric.entries()) {
        for (&av, &nv) in a.values.iter().zip(&n.values) {
            max_rel = max_rel.max(relative_error(av, nv));
            count += 1;
        }
    }
    GradCheckReport {
        max_rel_error: max_rel,
        param_count: count,
    }
}
