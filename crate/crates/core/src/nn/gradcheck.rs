//! Central-difference verification of analytic gradients.
//!
//! This is the independent oracle for every backward pass in the crate:
//! it only ever calls the loss forward, never the gradient code it
//! checks. Parameters are probed in parallel; the loss closure must be a
//! pure function of the parameter vector.

use super::NnError;
use rayon::prelude::*;

/// Compares `analytic` against `(f(p + eps e_i) - f(p - eps e_i)) / 2 eps`
/// for every parameter and returns the worst relative error
/// `|a - n| / max(|a|, |n|, 1e-8)`.
pub fn gradient_check<F>(
    loss: F,
    params: &[f64],
    analytic: &[f64],
    epsilon: f64,
) -> Result<f64, NnError>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    if params.len() != analytic.len() {
        return Err(NnError::ShapeMismatch(format!(
            "{} params but {} gradient entries",
            params.len(),
            analytic.len()
        )));
    }
    if !loss(params).is_finite() {
        return Err(NnError::NonFiniteLoss);
    }

    let chunk = 64;
    let n = params.len();
    let n_chunks = n.div_ceil(chunk);
    let worst = (0..n_chunks)
        .into_par_iter()
        .map(|ci| {
            let mut probe = params.to_vec();
            let mut worst = 0.0f64;
            for i in ci * chunk..((ci + 1) * chunk).min(n) {
                let saved = probe[i];
                probe[i] = saved + epsilon;
                let up = loss(&probe);
                probe[i] = saved - epsilon;
                let down = loss(&probe);
                probe[i] = saved;
                let numeric = (up - down) / (2.0 * epsilon);
                let denom = analytic[i].abs().max(numeric.abs()).max(1e-8);
                worst = worst.max(((analytic[i] - numeric) / denom).abs());
            }
            worst
        })
        .reduce(|| 0.0, f64::max);
    Ok(worst)
}
