//! Margin-normalized hinge loss and its subgradient.

use crate::linalg::dot;
use crate::par;
use crate::synth::LabeledSample;

use super::LearnerError;

/// `max(0, 1 - y (x . w) / gamma)`
pub fn hinge_loss(w: &[f64], sample: &LabeledSample, gamma: f64) -> f64 {
    (1.0 - sample.yf() * dot(&sample.x, w) / gamma).max(0.0)
}

fn check(samples: &[LabeledSample], q: &[f64], gamma: f64) -> Result<(), LearnerError> {
    if q.len() != samples.len() {
        return Err(LearnerError::LengthMismatch { weights: q.len(), samples: samples.len() });
    }
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(LearnerError::BadParameter { name: "gamma", value: gamma });
    }
    Ok(())
}

/// `sum_i q_i max(0, 1 - y_i (x_i . w) / gamma)`
pub fn weighted_hinge(
    w: &[f64],
    samples: &[LabeledSample],
    q: &[f64],
    gamma: f64,
) -> Result<f64, LearnerError> {
    check(samples, q, gamma)?;
    Ok(weighted_hinge_unchecked(w, samples, q, gamma))
}

pub(crate) fn weighted_hinge_unchecked(
    w: &[f64],
    samples: &[LabeledSample],
    q: &[f64],
    gamma: f64,
) -> f64 {
    par::chunked_sum(samples.len(), |rows| {
        rows.filter(|&i| q[i] != 0.0)
            .map(|i| q[i] * hinge_loss(w, &samples[i], gamma))
            .sum()
    })
}

/// `(1/gamma) sum_{i : y_i x_i . w / gamma < 1} -q_i y_i x_i`. Samples exactly
/// at the kink contribute nothing.
pub fn subgradient(
    w: &[f64],
    samples: &[LabeledSample],
    q: &[f64],
    gamma: f64,
) -> Result<Vec<f64>, LearnerError> {
    check(samples, q, gamma)?;
    Ok(subgradient_unchecked(w, samples, q, gamma))
}

pub(crate) fn subgradient_unchecked(
    w: &[f64],
    samples: &[LabeledSample],
    q: &[f64],
    gamma: f64,
) -> Vec<f64> {
    let d = w.len();
    par::chunked_vec_sum(samples.len(), d, |rows, acc| {
        for i in rows {
            let s = &samples[i];
            if q[i] == 0.0 || s.yf() * dot(&s.x, w) / gamma >= 1.0 {
                continue;
            }
            let c = -q[i] * s.yf() / gamma;
            for (a, x) in acc.iter_mut().zip(&s.x) {
                *a += c * x;
            }
        }
    })
}
