use rand_distr::{Distribution, StandardNormal};

use halfspace_core::linalg::{dot, norm2, scale};
use halfspace_core::rng::stream;
use halfspace_core::synth::{
    build_mixture, draw_clean, flip_labels_adversary, sample_sparse_halfspace, AdversaryStrategy, Component,
    Family, FlipPolicy, GroundTruth, MaliciousOracle, MixtureSpec, Provenance,
};

fn ground_truth(d: usize, s: usize, gamma: f64, seed: u64) -> GroundTruth {
    let w = sample_sparse_halfspace(d, s, &mut stream(seed, 1)).unwrap();
    GroundTruth::new(w, s, gamma).unwrap()
}

/// Two components at `+-offset w*` with scale `1/sqrt(d)`.
fn symmetric_mixture(gt: &GroundTruth, offset: f64) -> MixtureSpec {
    let d = gt.dim();
    let sigma = 1.0 / (d as f64).sqrt();
    let components = [(Family::Gaussian, offset), (Family::LaplaceProduct, -offset)]
        .into_iter()
        .map(|(family, o)| Component { family, mean: scale(&gt.w_star, o), scale: sigma })
        .collect();
    MixtureSpec { d, r: offset, components, fallback: false }
}

#[test]
fn rejection_is_rare_at_desk_margin() {
    let gt = ground_truth(50, 5, 0.3, 1);
    let mix = symmetric_mixture(&gt, 0.6);
    let mut rng = stream(1, 2);
    let probes = 100_000;
    let rejected = (0..probes)
        .filter(|_| dot(&mix.draw_instance(&mut rng).1, &gt.w_star).abs() < gt.gamma)
        .count();
    let frac = rejected as f64 / probes as f64;
    assert!(frac <= 0.05, "rejection fraction {frac}");
}

#[test]
fn malicious_count_is_binomial() {
    let gt = ground_truth(20, 3, 0.3, 2);
    let mix = build_mixture(20, 2, 0.6, 0.3, &gt.w_star, &mut stream(2, 2)).unwrap();
    for (i, kind) in AdversaryStrategy::KINDS.iter().enumerate() {
        let strategy = AdversaryStrategy::from_kind(kind, None, 0.3).unwrap();
        let mut oracle = MaliciousOracle::new(mix.clone(), gt.clone(), 0.1, strategy, stream(2, 10 + i as u64)).unwrap();
        let set = oracle.draw(10_000).unwrap();
        let count = set.count(Provenance::Malicious) as f64;
        let sd = (10_000.0f64 * 0.1 * 0.9).sqrt();
        assert!((count - 1000.0).abs() <= 3.0 * sd, "{kind}: {count}");
        assert!(set.iter().all(|s| s.x.iter().all(|v| v.is_finite()) && (s.y == 1 || s.y == -1)));
    }
}

#[test]
fn component_tails_are_subexponential() {
    // Pr(|u . (x - mu)| > sigma (t + 1)) <= e^-t for every family
    let d = 30;
    let sigma = 1.0 / (d as f64).sqrt();
    let n = 100_000;
    let mut rng = stream(3, 0);
    for family in [Family::Gaussian, Family::LaplaceProduct, Family::UniformBall] {
        for _ in 0..3 {
            let u: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
            let u = scale(&u, 1.0 / norm2(&u));
            let proj: Vec<f64> = (0..n).map(|_| dot(&family.noise(d, sigma, &mut rng), &u).abs()).collect();
            for t in [2.0f64, 4.0, 6.0] {
                let p = proj.iter().filter(|&&v| v > sigma * (t + 1.0)).count() as f64 / n as f64;
                let bound = (-t).exp();
                let slack = 3.0 * (bound * (1.0 - bound) / n as f64).sqrt();
                assert!(p <= bound + slack, "{}: t = {t}, p = {p}", family.name());
            }
        }
    }
}

#[test]
fn component_covariance_matches_scale() {
    let d = 10;
    let mut rng = stream(4, 0);
    for family in [Family::Gaussian, Family::LaplaceProduct, Family::UniformBall] {
        let n = 50_000;
        let mut second = 0.0;
        for _ in 0..n {
            let x = family.noise(d, 0.5, &mut rng);
            second += x[0] * x[0];
        }
        let var = second / n as f64;
        assert!((var - 0.25).abs() < 0.02, "{}: {var}", family.name());
    }
}

#[test]
fn build_mixture_respects_placement_rule() {
    let gamma = 0.3;
    for seed in 0..20 {
        let gt = ground_truth(40, 4, gamma, seed);
        let mix = build_mixture(40, 2, 2.0 * gamma, gamma, &gt.w_star, &mut stream(seed, 2)).unwrap();
        assert_eq!(mix.k(), 2);
        for c in &mix.components {
            assert!(norm2(&c.mean) <= 2.0 * gamma + 1e-12);
            assert!(dot(&c.mean, &gt.w_star).abs() >= gamma - 1e-12);
        }
    }
}

#[test]
fn identical_seeds_give_identical_streams() {
    let draw = |seed: u64| {
        let gt = ground_truth(15, 3, 0.3, seed);
        let mix = build_mixture(15, 3, 0.6, 0.3, &gt.w_star, &mut stream(seed, 2)).unwrap();
        let clean = draw_clean(&mix, &gt, 300, &mut stream(seed, 3)).unwrap();
        let strategy = AdversaryStrategy::from_kind("coordinated-decoy", None, 0.3).unwrap();
        let mut oracle = MaliciousOracle::new(mix, gt.clone(), 0.2, strategy, stream(seed, 4)).unwrap();
        let noisy = oracle.draw(300).unwrap();
        let flipped = flip_labels_adversary(&clean, &gt, 0.1, FlipPolicy::Random, &mut stream(seed, 5)).unwrap();
        serde_json::to_string(&(clean, noisy, flipped)).unwrap()
    };
    assert_eq!(draw(9), draw(9));
    assert_ne!(draw(9), draw(10));
}

#[test]
fn sparse_halfspace_support_is_uniform() {
    // each coordinate lands in a random 2-subset of 6 with probability 1/3
    let mut rng = stream(5, 0);
    let trials = 30_000;
    let mut hits = [0usize; 6];
    for _ in 0..trials {
        let w = sample_sparse_halfspace(6, 2, &mut rng).unwrap();
        for (i, v) in w.iter().enumerate() {
            if *v != 0.0 {
                hits[i] += 1;
            }
        }
        assert!((norm2(&w) - 1.0).abs() < 1e-12);
    }
    let sd = (trials as f64 * (1.0 / 3.0) * (2.0 / 3.0)).sqrt();
    for h in hits {
        assert!((h as f64 - trials as f64 / 3.0).abs() <= 4.0 * sd, "{hits:?}");
    }
}
