//! Central finite differences over every LSTM parameter.

#![allow(dead_code)]

use bloomcast::lstm::{backward, cross_entropy, forward, forward_with_masks, LstmHyper, LstmParams};
use ndarray::{Array2, ArrayView2};

/// Relative error with a floor on the denominator, so that entries whose
/// true gradient is ~0 are judged on absolute error below the floor.
pub const REL_FLOOR: f64 = 1e-6;
pub const STEP: f64 = 1e-5;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

pub struct GradCheck {
    pub max_rel_error: f64,
    pub checked: usize,
}

/// Compares `backward` against central differences of the training-mode
/// loss, holding the dropout masks of one forward pass fixed.
pub fn check(
    seq: ArrayView2<'_, f64>,
    params: &LstmParams,
    hyper: &LstmHyper,
    label: usize,
    mask_seed: u64,
) -> GradCheck {
    let (_, cache) = forward(seq, params, hyper, true, mask_seed).unwrap();
    let masks: Option<Vec<Array2<f64>>> = cache.masks().map(|m| m.to_vec());
    let analytic = backward(&cache, params, label).unwrap();

    let loss = |p: &LstmParams| {
        let (probs, _) = forward_with_masks(seq, p, masks.clone()).unwrap();
        cross_entropy(probs.view(), label).unwrap()
    };

    let mut probe = params.clone();
    let mut max_rel_error = 0.0f64;
    let n = params.param_count();
    for idx in 0..n {
        let original = *probe.iter().nth(idx).unwrap();
        *probe.iter_mut().nth(idx).unwrap() = original + STEP;
        let up = loss(&probe);
        *probe.iter_mut().nth(idx).unwrap() = original - STEP;
        let down = loss(&probe);
        *probe.iter_mut().nth(idx).unwrap() = original;
        let numeric = (up - down) / (2.0 * STEP);
        let a = *analytic.iter().nth(idx).unwrap();
        max_rel_error = max_rel_error.max(relative_error(a, numeric));
    }
    GradCheck {
        max_rel_error,
        checked: n,
    }
}
