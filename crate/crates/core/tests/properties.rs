use proptest::prelude::*;

use halfspace_core::diagnostics::{error_rate, pancake_density};
use halfspace_core::geometry::{project_w, ConstraintW};
use halfspace_core::learner::{minimize_hinge, subgradient, weighted_hinge, HingeParams};
use halfspace_core::linalg::{dist2, dot, norm1, norm2};
use halfspace_core::rng::stream;
use halfspace_core::synth::{
    build_mixture, draw_clean, flip_labels_adversary, sample_sparse_halfspace, FlipPolicy, GroundTruth,
    LabeledSample, Provenance, SampleSet,
};

fn samples(n: usize, d: usize) -> impl Strategy<Value = Vec<LabeledSample>> {
    prop::collection::vec((prop::collection::vec(-2.0f64..2.0, d), prop::bool::ANY), n).prop_map(|rows| {
        rows.into_iter()
            .map(|(x, pos)| LabeledSample { x, y: if pos { 1 } else { -1 }, provenance: Provenance::Clean })
            .collect()
    })
}

fn vec_and_s() -> impl Strategy<Value = (Vec<f64>, usize)> {
    (1usize..=12).prop_flat_map(|d| (prop::collection::vec(-4.0f64..4.0, d), 1..=d))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn w_projection_is_feasible_idempotent_and_optimal((v, s) in vec_and_s(), seed in 0u64..1000) {
        let w_set = ConstraintW::new(s).unwrap();
        let p = w_set.project_threshold(&v).unwrap();
        prop_assert!(w_set.contains(&p, 1e-12));
        let pp = w_set.project_threshold(&p).unwrap();
        prop_assert!(dist2(&p, &pp) < 1e-12);
        // variational inequality against feasible points
        let mut rng = stream(seed, 0);
        for _ in 0..10 {
            let u: Vec<f64> = (0..v.len()).map(|_| rand::Rng::random_range(&mut rng, -1.0..1.0)).collect();
            let w = w_set.project_threshold(&u).unwrap();
            let lhs: f64 = v.iter().zip(&p).zip(&w).map(|((vi, pi), wi)| (vi - pi) * (wi - pi)).sum();
            prop_assert!(lhs <= 1e-9);
        }
    }

    #[test]
    fn w_projection_is_non_expansive((v, s) in vec_and_s(), shift in prop::collection::vec(-1.0f64..1.0, 12)) {
        let u: Vec<f64> = v.iter().zip(&shift).map(|(a, b)| a + b).collect();
        let pv = project_w(&v, s, 1e-12).unwrap();
        let pu = project_w(&u, s, 1e-12).unwrap();
        prop_assert!(dist2(&pv, &pu) <= dist2(&v, &u) + 1e-9);
    }

    #[test]
    fn subgradient_matches_finite_differences(
        set in samples(6, 4),
        q in prop::collection::vec(0.0f64..1.0, 6),
        w in prop::collection::vec(-0.5f64..0.5, 4),
        dir in prop::collection::vec(-1.0f64..1.0, 4),
    ) {
        let gamma = 0.3;
        // skip points within a finite-difference step of a kink
        let h = 1e-6;
        let near_kink = set.iter().any(|s| (s.yf() * dot(&s.x, &w) / gamma - 1.0).abs() < 1e-3);
        prop_assume!(!near_kink);
        let g = subgradient(&w, &set, &q, gamma).unwrap();
        let at = |t: f64| {
            let p: Vec<f64> = w.iter().zip(&dir).map(|(a, b)| a + t * b).collect();
            weighted_hinge(&p, &set, &q, gamma).unwrap()
        };
        let fd = (at(h) - at(-h)) / (2.0 * h);
        prop_assert!((fd - dot(&g, &dir)).abs() < 1e-5, "fd {} vs {}", fd, dot(&g, &dir));
    }

    #[test]
    fn error_rate_ignores_positive_scaling(set in samples(30, 3), w in prop::collection::vec(-1.0f64..1.0, 3), c in 0.01f64..100.0) {
        let set = SampleSet::new(set);
        let scaled: Vec<f64> = w.iter().map(|x| x * c).collect();
        prop_assert_eq!(error_rate(&w, &set).unwrap(), error_rate(&scaled, &set).unwrap());
    }

    #[test]
    fn pancake_density_grows_with_thickness(set in samples(25, 3), w in prop::collection::vec(-1.0f64..1.0, 3), t1 in 0.0f64..2.0, dt in 0.0f64..2.0) {
        let p = &set[0];
        let lo = pancake_density(&set, p, &w, t1);
        let hi = pancake_density(&set, p, &w, t1 + dt);
        prop_assert!(lo <= hi);
        prop_assert!(lo >= 1.0 / set.len() as f64);
    }

    #[test]
    fn label_flips_are_exact(seed in 0u64..500, n in 1usize..60, eta in 0.0f64..0.5, random in prop::bool::ANY) {
        let w = sample_sparse_halfspace(6, 2, &mut stream(seed, 1)).unwrap();
        let gt = GroundTruth::new(w, 2, 0.1).unwrap();
        let mix = build_mixture(6, 2, 0.2, 0.1, &gt.w_star, &mut stream(seed, 2)).unwrap();
        let set = draw_clean(&mix, &gt, n, &mut stream(seed, 3)).unwrap();
        let policy = if random { FlipPolicy::Random } else { FlipPolicy::SmallestMarginFirst };
        let out = flip_labels_adversary(&set, &gt, eta, policy, &mut stream(seed, 4)).unwrap();
        let flipped = out.iter().zip(set.iter()).filter(|(a, b)| a.y != b.y).count();
        prop_assert_eq!(flipped, (eta * n as f64).floor() as usize);
        prop_assert_eq!(out.count(Provenance::LabelFlipped), flipped);
        prop_assert!(out.iter().zip(set.iter()).all(|(a, b)| a.x == b.x));
    }

    #[test]
    fn clean_draws_keep_the_margin(seed in 0u64..500, k in 1usize..4) {
        let (d, s, gamma) = (8, 3, 0.2);
        let w = sample_sparse_halfspace(d, s, &mut stream(seed, 1)).unwrap();
        let gt = GroundTruth::new(w, s, gamma).unwrap();
        let mix = build_mixture(d, k, 2.0 * gamma, gamma, &gt.w_star, &mut stream(seed, 2)).unwrap();
        let set = draw_clean(&mix, &gt, 200, &mut stream(seed, 3)).unwrap();
        prop_assert!(set.iter().all(|x| x.margin(&gt.w_star) >= gamma));
        prop_assert!(mix.components.iter().all(|c| norm2(&c.mean) <= 2.0 * gamma + 1e-12));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn solver_output_is_feasible_and_improves_on_zero(set in samples(40, 6), s in 1usize..=6) {
        let q = vec![1.0; set.len()];
        let params = HingeParams { max_iters: 200, smooth_iters: 200, ..HingeParams::new(0.3) };
        let m = minimize_hinge(&set, &q, s, &params).unwrap();
        prop_assert!(norm2(&m.w_hat) <= 1.0 + 1e-9);
        prop_assert!(norm1(&m.w_hat) <= (s as f64).sqrt() + 1e-9);
        // loss at w = 0 is sum q
        prop_assert!(m.final_loss <= set.len() as f64 + 1e-9);
        prop_assert!(m.best_loss_trace.windows(2).all(|p| p[1] <= p[0]));
    }
}
