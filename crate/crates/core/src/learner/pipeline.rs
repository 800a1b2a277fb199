//! End-to-end learners: filter, reweight, minimize.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::robustify::{
    self, linf_filter, sigma_bar, soft_outlier_removal, RemovalOptions, RemovalReport,
    WeightVector,
};
use crate::synth::{MaliciousOracle, SampleSet};

use super::solver::{minimize_hinge, HalfspaceModel, HingeParams};
use super::LearnerError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub s: usize,
    pub gamma: f64,
    pub r: f64,
    pub sigma: f64,
    /// Noise-rate bound; the removal step uses `xi = 2 eta0`.
    pub eta0: f64,
    pub delta_prime: f64,
    /// Sample count in the filter threshold; `None` means the drawn count.
    pub n_prime: Option<usize>,
    pub hinge: HingeParams,
    pub removal_tol: f64,
    pub max_rounds: Option<usize>,
    pub ascent_max_iter: usize,
    pub use_filter: bool,
    pub use_removal: bool,
}

impl PipelineConfig {
    pub fn new(s: usize, gamma: f64, r: f64, sigma: f64, eta0: f64) -> Self {
        Self {
            s,
            gamma,
            r,
            sigma,
            eta0,
            delta_prime: 0.05,
            n_prime: None,
            hinge: HingeParams::new(gamma),
            removal_tol: 1e-3,
            max_rounds: None,
            ascent_max_iter: 500,
            use_filter: true,
            use_removal: true,
        }
    }

    /// Same pipeline with filter and removal disabled (`q = 1`).
    pub fn ablated(&self) -> Self {
        Self { use_filter: false, use_removal: false, ..self.clone() }
    }

    pub fn xi(&self) -> f64 {
        2.0 * self.eta0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub model: HalfspaceModel,
    pub n_drawn: usize,
    pub filter_threshold: Option<f64>,
    pub filtered_out: usize,
    /// Samples that reached the solver, aligned with `weights`.
    pub train: SampleSet,
    pub weights: WeightVector,
    pub removal: Option<RemovalReport>,
    pub xi: f64,
    pub sigma_bar: f64,
}

fn filter_stage(
    set: &SampleSet,
    cfg: &PipelineConfig,
) -> Result<(SampleSet, Option<f64>, usize), LearnerError> {
    if !cfg.use_filter {
        return Ok((set.clone(), None, 0));
    }
    let n_prime = cfg.n_prime.unwrap_or(set.len());
    let out = linf_filter(set, cfg.r, cfg.sigma, n_prime, cfg.delta_prime)?;
    Ok((out.kept, Some(out.threshold), out.removed))
}

/// Malicious-noise learner on an already drawn sample.
pub fn learn_malicious_from_set(
    set: &SampleSet,
    cfg: &PipelineConfig,
) -> Result<PipelineReport, LearnerError> {
    let d = set.dim().ok_or(LearnerError::EmptyMass)?;
    let sb = sigma_bar(d, cfg.r);
    let (train, threshold, filtered_out) = filter_stage(set, cfg)?;
    if train.is_empty() {
        return Err(LearnerError::EmptyMass);
    }
    // With eta0 = 0 the only admissible weights are all ones, so there is
    // nothing for the removal step to choose.
    let (weights, removal) = if cfg.use_removal && cfg.eta0 > 0.0 {
        let opts = RemovalOptions {
            tol: cfg.removal_tol,
            max_rounds: cfg.max_rounds,
            ascent_max_iter: cfg.ascent_max_iter,
            ..RemovalOptions::new(cfg.s, cfg.xi(), sb)
        };
        let (q, rep) = soft_outlier_removal(&train, &opts)?;
        (q, Some(rep))
    } else {
        (WeightVector::ones(train.len()), None)
    };
    let model = minimize_hinge(&train.samples, &weights.q, cfg.s, &cfg.hinge)?;
    Ok(PipelineReport {
        model,
        n_drawn: set.len(),
        filter_threshold: threshold,
        filtered_out,
        train,
        weights,
        removal,
        xi: cfg.xi(),
        sigma_bar: sb,
    })
}

/// Draws `n` samples from the oracle and runs the malicious-noise learner.
pub fn learn_malicious<R: Rng>(
    oracle: &mut MaliciousOracle<R>,
    n: usize,
    cfg: &PipelineConfig,
) -> Result<PipelineReport, LearnerError> {
    let set = oracle.draw(n)?;
    learn_malicious_from_set(&set, cfg)
}

/// Label-noise learner: filter, then unweighted hinge minimization.
pub fn learn_adversarial(
    set: &SampleSet,
    cfg: &PipelineConfig,
) -> Result<PipelineReport, LearnerError> {
    let d = set.dim().ok_or(LearnerError::EmptyMass)?;
    let (train, threshold, filtered_out) = filter_stage(set, cfg)?;
    if train.is_empty() {
        return Err(LearnerError::EmptyMass);
    }
    let weights = WeightVector::ones(train.len());
    let model = minimize_hinge(&train.samples, &weights.q, cfg.s, &cfg.hinge)?;
    Ok(PipelineReport {
        model,
        n_drawn: set.len(),
        filter_threshold: threshold,
        filtered_out,
        train,
        weights,
        removal: None,
        xi: cfg.xi(),
        sigma_bar: robustify::sigma_bar(d, cfg.r),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use crate::synth::{
        build_mixture, draw_clean, sample_sparse_halfspace, AdversaryStrategy, GroundTruth,
    };

    fn test_error(w: &[f64], set: &SampleSet) -> f64 {
        let wrong = set
            .iter()
            .filter(|s| {
                let t = crate::linalg::dot(&s.x, w);
                t == 0.0 || (t > 0.0) != (s.y > 0)
            })
            .count();
        wrong as f64 / set.len() as f64
    }

    #[test]
    fn clean_run_learns() {
        let (d, s, gamma) = (20, 3, 0.3);
        let w = sample_sparse_halfspace(d, s, &mut stream(31, 1)).unwrap();
        let gt = GroundTruth::new(w, s, gamma).unwrap();
        let sigma = 1.0 / (d as f64).sqrt();
        let mix = build_mixture(d, 2, 2.0 * gamma, gamma, &gt.w_star, &mut stream(31, 2)).unwrap();
        let train = draw_clean(&mix, &gt, 500, &mut stream(31, 3)).unwrap();
        let test = draw_clean(&mix, &gt, 2000, &mut stream(31, 4)).unwrap();
        let cfg = PipelineConfig::new(s, gamma, 2.0 * gamma, sigma, 0.0);
        let rep = learn_malicious_from_set(&train, &cfg).unwrap();
        assert!(rep.weights.q.iter().all(|&q| q == 1.0));
        assert_eq!(test_error(&rep.model.w_hat, &rep.train), 0.0);
        assert!(test_error(&rep.model.w_hat, &test) <= 0.02);
        let w = &rep.model.w_hat;
        assert!(crate::linalg::norm2(w) <= 1.0 + 1e-8);
        assert!(crate::linalg::norm1(w) <= (s as f64).sqrt() + 1e-8);
    }

    #[test]
    fn malicious_pipeline_wires_xi() {
        let (d, s, gamma) = (20, 3, 0.3);
        let w = sample_sparse_halfspace(d, s, &mut stream(32, 1)).unwrap();
        let gt = GroundTruth::new(w, s, gamma).unwrap();
        let mix = build_mixture(d, 2, 0.6, gamma, &gt.w_star, &mut stream(32, 2)).unwrap();
        let mut oracle = MaliciousOracle::new(
            mix,
            gt,
            0.1,
            AdversaryStrategy::FarOutlier { magnitude: 100.0 },
            stream(32, 3),
        )
        .unwrap();
        let cfg = PipelineConfig::new(s, gamma, 0.6, 1.0 / (d as f64).sqrt(), 0.1);
        let rep = learn_malicious(&mut oracle, 400, &cfg).unwrap();
        assert_eq!(rep.xi, 0.2);
        assert!(rep.filtered_out > 0);
        assert!(rep.removal.is_some());
    }
}
