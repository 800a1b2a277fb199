//! Two-sample toy problems in d = 2 checked against a grid search over `W`.

use halfspace_core::learner::{minimize_hinge, weighted_hinge, HingeParams};
use halfspace_core::linalg::{norm1, norm2};
use halfspace_core::synth::{LabeledSample, Provenance};

fn toy() -> Vec<LabeledSample> {
    vec![
        LabeledSample { x: vec![1.0, 0.5], y: 1, provenance: Provenance::Clean },
        LabeledSample { x: vec![-1.0, 0.2], y: -1, provenance: Provenance::Clean },
    ]
}

/// Minimum of the loss over a grid of `W` with spacing `h`.
fn grid_min(samples: &[LabeledSample], s: usize, gamma: f64, h: f64) -> f64 {
    let r1 = (s as f64).sqrt();
    let steps = (2.0 / h).round() as i64;
    let q = vec![1.0; samples.len()];
    let mut best = f64::INFINITY;
    for i in 0..=steps {
        for j in 0..=steps {
            let w = vec![-1.0 + i as f64 * h, -1.0 + j as f64 * h];
            if norm2(&w) > 1.0 || norm1(&w) > r1 {
                continue;
            }
            best = best.min(weighted_hinge(&w, samples, &q, gamma).unwrap());
        }
    }
    best
}

#[test]
fn toy_minimizers_match_grid() {
    // gamma = 2 keeps both hinges active, so the loss is linear on W and its
    // minimizer is the support point of y1 x1 + y2 x2 = (2, 0.3)
    let set = toy();
    let gamma = 2.0;
    let q = vec![1.0; 2];
    let params = HingeParams::new(gamma);
    for (s, expect) in [(1, vec![1.0, 0.0]), (2, {
        let n = (4.0f64 + 0.09).sqrt();
        vec![2.0 / n, 0.3 / n]
    })] {
        let model = minimize_hinge(&set, &q, s, &params).unwrap();
        // grid points sit inside the curved boundary, so only the loss is
        // compared with the grid
        let grid_loss = grid_min(&set, s, gamma, 2e-3);
        let loss = weighted_hinge(&model.w_hat, &set, &q, gamma).unwrap();
        assert!(loss <= grid_loss + 1e-6, "s = {s}: {loss} vs grid {grid_loss}");
        let dev = model.w_hat.iter().zip(&expect).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(dev < 1e-4, "s = {s}: {:?} vs {:?}", model.w_hat, expect);
    }
}

#[test]
fn toy_recovers_target_sign() {
    // at the data's own margin the labels are produced by w* = e1; the
    // minimizer classifies both points correctly and points along +e1
    let set = toy();
    let q = vec![1.0; 2];
    let model = minimize_hinge(&set, &q, 1, &HingeParams::new(0.3)).unwrap();
    assert!(model.w_hat[0] > 0.0);
    assert!(set.iter().all(|s| s.margin(&model.w_hat) > 0.0));
    let grid_loss = grid_min(&set, 1, 0.3, 2e-3);
    assert_eq!(grid_loss, 0.0);
    assert!(model.final_loss <= 1e-9);
}
