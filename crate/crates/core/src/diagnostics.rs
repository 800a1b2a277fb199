//! Empirical checks of the structural conditions behind the learner:
//! margins, pancake density, gradient-norm bounds, noise rates and the
//! variance constraint after reweighting.

use faer::Mat;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{ConstraintW, GeometryError};
use crate::learner::KktDiagnostics;
use crate::linalg::{self, dot, norm2};
use crate::par;
use crate::robustify::{
    directional_variance, instance_matrix, sparse_power, worst_case_ascent, AscentOptions,
    RobustifyError,
};
use crate::synth::{LabeledSample, Provenance, SampleSet, SynthError};

/// Largest sample count accepted by [`linsum_exact_small`].
pub const LINSUM_EXACT_MAX: usize = 15;

#[derive(Debug, Error)]
pub enum DiagnosticsError {
    #[error("empty sample set")]
    Empty,
    #[error("parameter {name} out of range: {value}")]
    BadParameter { name: &'static str, value: f64 },
    #[error("{weights} weights for {samples} samples")]
    LengthMismatch { weights: usize, samples: usize },
    #[error("exact enumeration needs at most {max} samples, got {got}")]
    TooLarge { got: usize, max: usize },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Robustify(#[from] RobustifyError),
    #[error(transparent)]
    Synth(#[from] SynthError),
}

/// Mean with its Monte-Carlo standard error and the bound it is held to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub estimate: f64,
    pub stderr: f64,
    pub bound: f64,
    /// `estimate <= bound + 3 stderr`
    pub passed: bool,
}

impl McEstimate {
    /// Estimate of a Bernoulli proportion from `hits` out of `n`.
    pub fn proportion(hits: usize, n: usize, bound: f64) -> Self {
        let p = if n == 0 { 0.0 } else { hits as f64 / n as f64 };
        let stderr = if n == 0 { 0.0 } else { (p * (1.0 - p) / n as f64).sqrt() };
        Self { estimate: p, stderr, bound, passed: p <= bound + 3.0 * stderr }
    }
}

/// Fraction of `test` with `y != sign(w . x)`, where `sign(0)` counts as an
/// error.
pub fn error_rate(w: &[f64], test: &SampleSet) -> Result<f64, DiagnosticsError> {
    if test.is_empty() {
        return Err(DiagnosticsError::Empty);
    }
    let wrong = par::chunked_sum(test.len(), |rows| {
        rows.filter(|&i| {
            let s = &test.samples[i];
            s.yf() * dot(&s.x, w) <= 0.0
        })
        .count() as f64
    });
    Ok(wrong / test.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PancakeParams {
    pub tau: f64,
    pub rho: f64,
    pub beta: f64,
}

impl PancakeParams {
    pub fn new(tau: f64, rho: f64, beta: f64) -> Result<Self, DiagnosticsError> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(DiagnosticsError::BadParameter { name: "tau", value: tau });
        }
        if !(rho > 0.0 && rho < 1.0) {
            return Err(DiagnosticsError::BadParameter { name: "rho", value: rho });
        }
        if !(beta > 0.0 && beta < 1.0) {
            return Err(DiagnosticsError::BadParameter { name: "beta", value: beta });
        }
        Ok(Self { tau, rho, beta })
    }

    /// `2 sigma (ln(1/beta) + 1)`
    pub fn thickness(sigma: f64, beta: f64) -> f64 {
        2.0 * sigma * ((1.0 / beta).ln() + 1.0)
    }

    /// `(1 - beta) / (2k)`
    pub fn density(beta: f64, k: usize) -> f64 {
        (1.0 - beta) / (2.0 * k as f64)
    }
}

/// Fraction of `clean` with `|y' x' . w - y x . w| <= tau`.
pub fn pancake_density(clean: &[LabeledSample], point: &LabeledSample, w: &[f64], tau: f64) -> f64 {
    if clean.is_empty() {
        return 0.0;
    }
    let center = point.margin(w);
    let inside = clean.iter().filter(|s| (s.margin(w) - center).abs() <= tau).count();
    inside as f64 / clean.len() as f64
}

/// Sorted signed projections `y x . w`, for counting pancake members by
/// binary search.
struct SortedMargins(Vec<f64>);

impl SortedMargins {
    fn new(set: &[LabeledSample], w: &[f64]) -> Self {
        let mut m: Vec<f64> = set.iter().map(|s| s.margin(w)).collect();
        m.sort_unstable_by(f64::total_cmp);
        Self(m)
    }

    fn count_within(&self, center: f64, tau: f64) -> usize {
        let lo = self.0.partition_point(|&v| v < center - tau);
        let hi = self.0.partition_point(|&v| v <= center + tau);
        hi - lo
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensePancakeReport {
    pub params: PancakeParams,
    /// Failure mass per candidate, in input order.
    pub per_candidate: Vec<f64>,
    pub worst_candidate: usize,
    /// Worst failure mass against `beta + beta'`.
    pub failure: McEstimate,
    pub n_fresh: usize,
}

/// Estimates, for each candidate `w`, the probability over `fresh` that the
/// pancake of thickness `params.tau` around a draw is not `params.rho`-dense
/// with respect to `clean`, and compares the worst candidate with
/// `params.beta + beta_prime`.
pub fn check_dense_pancake(
    clean: &[LabeledSample],
    fresh: &[LabeledSample],
    candidates: &[Vec<f64>],
    params: PancakeParams,
    beta_prime: f64,
) -> Result<DensePancakeReport, DiagnosticsError> {
    if clean.is_empty() || fresh.is_empty() || candidates.is_empty() {
        return Err(DiagnosticsError::Empty);
    }
    let n_clean = clean.len() as f64;
    let per_candidate = par::map_slice(candidates, |w| {
        let sorted = SortedMargins::new(clean, w);
        let fails = fresh
            .iter()
            .filter(|p| (sorted.count_within(p.margin(w), params.tau) as f64) < params.rho * n_clean)
            .count();
        fails as f64 / fresh.len() as f64
    });
    let worst_candidate = (0..per_candidate.len())
        .max_by(|&a, &b| per_candidate[a].total_cmp(&per_candidate[b]))
        .unwrap_or(0);
    let hits = (per_candidate[worst_candidate] * fresh.len() as f64).round() as usize;
    Ok(DensePancakeReport {
        params,
        failure: McEstimate::proportion(hits, fresh.len(), params.beta + beta_prime),
        worst_candidate,
        per_candidate,
        n_fresh: fresh.len(),
    })
}

/// A member of `W`: a Gaussian direction on a random support of size
/// `support`, normalized to unit L2 norm and then projected into `W`.
pub fn random_w<R: Rng + ?Sized>(
    d: usize,
    s: usize,
    support: usize,
    rng: &mut R,
) -> Result<Vec<f64>, DiagnosticsError> {
    let w_set = ConstraintW::new(s)?;
    let support = support.clamp(1, d.max(1));
    let idx = rand::seq::index::sample(rng, d, support);
    let mut v = vec![0.0; d];
    for i in idx.iter() {
        v[i] = StandardNormal.sample(rng);
    }
    let n = norm2(&v);
    if n > 0.0 {
        v = linalg::scale(&v, 1.0 / n);
    }
    Ok(w_set.project_threshold(&v)?)
}

fn check_weights(set: &SampleSet, q: &[f64]) -> Result<(), DiagnosticsError> {
    if q.len() != set.len() {
        return Err(DiagnosticsError::LengthMismatch { weights: q.len(), samples: set.len() });
    }
    if let Some(&bad) = q.iter().find(|&&v| !(v >= 0.0 && v.is_finite())) {
        return Err(DiagnosticsError::BadParameter { name: "q", value: bad });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinsumBound {
    /// `sqrt(|S'|) sqrt(certified sup_{H in M} sum q_i x_i^T H x_i)`
    pub upper: f64,
    /// Same with the attained value instead of the certified bound.
    pub attained: f64,
    pub n: usize,
}

/// Upper bound on the gradient norm of `q . S'`. The supremum over `W` of
/// `sum q_i (w . x_i)^2` is relaxed to `H = w w^T` in `M`, and the relaxed
/// value is taken from the dual certificate, so the bound is sound even when
/// the ascent stops early.
pub fn linsum_upper(set: &SampleSet, q: &[f64], s: usize) -> Result<LinsumBound, DiagnosticsError> {
    check_weights(set, q)?;
    if set.is_empty() {
        return Ok(LinsumBound { upper: 0.0, attained: 0.0, n: 0 });
    }
    let x = instance_matrix(set);
    let d = x.ncols();
    let mut a = Mat::<f64>::zeros(d, d);
    for (i, s) in set.iter().enumerate() {
        if q[i] == 0.0 {
            continue;
        }
        for c in 0..d {
            for r in 0..d {
                a[(r, c)] += q[i] * s.x[r] * s.x[c];
            }
        }
    }
    let opts = AscentOptions { tol: 1e-6, max_iter: 2000, ..AscentOptions::default() };
    let wc = worst_case_ascent(&a, s, &opts)?;
    let root_n = (set.len() as f64).sqrt();
    Ok(LinsumBound {
        upper: root_n * wc.certified_upper.max(0.0).sqrt(),
        attained: root_n * wc.value.max(0.0).sqrt(),
        n: set.len(),
    })
}

/// Exact `sup_{a in [-1,1]^n, w in W} <sum a_i q_i x_i, w>`.
///
/// For fixed `w` the objective is linear in `a`, so the supremum over the
/// box sits at a vertex `a in {-1,1}^n`; for fixed `a` it is the support
/// function of `W`. Negating `a` negates the vector and `W` is symmetric, so
/// `a_0 = +1` is fixed and `2^(n-1)` vertices are enumerated.
pub fn linsum_exact_small(set: &SampleSet, q: &[f64], s: usize) -> Result<f64, DiagnosticsError> {
    check_weights(set, q)?;
    let n = set.len();
    if n > LINSUM_EXACT_MAX {
        return Err(DiagnosticsError::TooLarge { got: n, max: LINSUM_EXACT_MAX });
    }
    if n == 0 {
        return Ok(0.0);
    }
    let w_set = ConstraintW::new(s)?;
    let d = set.samples[0].x.len();
    let values = par::map_range(1usize << (n - 1), |mask| {
        let mut v = vec![0.0; d];
        for (i, smp) in set.iter().enumerate() {
            let sign = if i == 0 || mask & (1 << (i - 1)) == 0 { 1.0 } else { -1.0 };
            linalg::axpy(sign * q[i], &smp.x, &mut v);
        }
        w_set.support(&v).value
    });
    Ok(values.into_iter().fold(0.0, f64::max))
}

/// `max` of `<sum a_i q_i x_i, w>` over `probes` random sign vectors
/// `a in [-1,1]^n` and random `w in W`; a lower bound on the gradient norm.
pub fn linsum_sampled_lower<R: Rng + ?Sized>(
    set: &SampleSet,
    q: &[f64],
    s: usize,
    probes: usize,
    rng: &mut R,
) -> Result<f64, DiagnosticsError> {
    check_weights(set, q)?;
    let Some(d) = set.dim() else { return Ok(0.0) };
    let mut best = 0.0f64;
    for _ in 0..probes {
        let support = rng.random_range(1..=d);
        let w = random_w(d, s, support, rng)?;
        let val: f64 = set
            .iter()
            .zip(q)
            .map(|(smp, &qi)| rng.random_range(-1.0..=1.0) * qi * dot(&smp.x, &w))
            .sum();
        best = best.max(val);
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarginReport {
    pub min_margin: f64,
    pub gamma: f64,
    pub n: usize,
    /// `min_margin >= gamma - 1e-12`
    pub passed: bool,
}

/// Minimum of `y x . w*` over `clean` against the margin `gamma`.
pub fn margin_check(clean: &SampleSet, w_star: &[f64], gamma: f64) -> MarginReport {
    let min_margin = clean.iter().map(|s| s.margin(w_star)).fold(f64::INFINITY, f64::min);
    MarginReport { min_margin, gamma, n: clean.len(), passed: min_margin >= gamma - 1e-12 }
}

/// `|S_D| / |S|`: the share of samples not drawn clean.
pub fn empirical_noise_rate(set: &SampleSet) -> f64 {
    if set.is_empty() {
        return 0.0;
    }
    let noisy = set.iter().filter(|s| s.provenance != Provenance::Clean).count();
    noisy as f64 / set.len() as f64
}

/// Whether `count` out of `n` lies within `k` binomial standard deviations
/// of `n p`.
pub fn binomial_within(count: usize, n: usize, p: f64, k: f64) -> bool {
    let mean = n as f64 * p;
    let sd = (n as f64 * p * (1.0 - p)).sqrt();
    (count as f64 - mean).abs() <= k * sd
}

/// `ceil((3 / eta0) ln(1 / delta'))`, the sample size at which the Chernoff
/// bound gives `|S_D| <= 2 eta0 |S|` with probability `1 - delta'`.
pub fn noise_sample_size(eta0: f64, delta_prime: f64) -> usize {
    (3.0 / eta0 * (1.0 / delta_prime).ln()).ceil() as usize
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseTrialReport {
    pub trials: usize,
    pub n: usize,
    pub eta0: f64,
    pub delta_prime: f64,
    /// Trials with `|S_D| > 2 eta0 |S|`.
    pub violations: usize,
    /// Violation fraction against `2 delta'`.
    pub violation_rate: McEstimate,
    pub mean_rate: f64,
}

/// Runs `trials` independent draws of `n = noise_sample_size(eta0, delta')`
/// samples from `draw(trial, n)` and counts trials whose noisy share exceeds
/// `2 eta0`. Trials run in parallel; `draw` must derive its randomness from
/// the trial index.
pub fn noise_rate_trials<F>(
    trials: usize,
    eta0: f64,
    delta_prime: f64,
    draw: F,
) -> Result<NoiseTrialReport, DiagnosticsError>
where
    F: Fn(usize, usize) -> Result<SampleSet, DiagnosticsError> + Sync + Send,
{
    if !(eta0 > 0.0 && eta0 < 1.0) {
        return Err(DiagnosticsError::BadParameter { name: "eta0", value: eta0 });
    }
    if !(delta_prime > 0.0 && delta_prime < 1.0) {
        return Err(DiagnosticsError::BadParameter { name: "delta_prime", value: delta_prime });
    }
    let n = noise_sample_size(eta0, delta_prime);
    let rates = par::map_range(trials, |t| draw(t, n).map(|s| empirical_noise_rate(&s)));
    let rates: Vec<f64> = rates.into_iter().collect::<Result<_, _>>()?;
    let violations = rates.iter().filter(|&&r| r > 2.0 * eta0).count();
    let mean_rate = if trials == 0 { 0.0 } else { rates.iter().sum::<f64>() / trials as f64 };
    Ok(NoiseTrialReport {
        trials,
        n,
        eta0,
        delta_prime,
        violations,
        violation_rate: McEstimate::proportion(violations, trials, 2.0 * delta_prime),
        mean_rate,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MisclassificationReport {
    pub tau: f64,
    /// `(4 / gamma) linsum_upper(q . S_D)`
    pub bound: f64,
    pub misclassified: usize,
    /// Misclassified points whose clean pancake weight exceeds `bound`.
    pub violations: usize,
    /// Largest clean pancake weight among misclassified points.
    pub max_weight: f64,
}

/// For every point of `test` misclassified by `w_hat`, compares the weight
/// `sum q_i` of clean training samples inside its pancake of thickness
/// `tau` along `w_hat` with `(4 / gamma) linsum_upper(q . S_D)`. A weight
/// above the bound at a misclassified point contradicts local correctness
/// and is counted as a violation.
pub fn misclassification_check(
    train: &SampleSet,
    q: &[f64],
    test: &SampleSet,
    w_hat: &[f64],
    gamma: f64,
    tau: f64,
    s: usize,
) -> Result<MisclassificationReport, DiagnosticsError> {
    check_weights(train, q)?;
    let mut noisy_idx = Vec::new();
    let mut clean_idx = Vec::new();
    for (i, smp) in train.iter().enumerate() {
        if smp.provenance == Provenance::Clean {
            clean_idx.push(i);
        } else {
            noisy_idx.push(i);
        }
    }
    let noisy = train.subset(&noisy_idx);
    let q_noisy: Vec<f64> = noisy_idx.iter().map(|&i| q[i]).collect();
    let bound = 4.0 / gamma * linsum_upper(&noisy, &q_noisy, s)?.upper;

    let clean_margins: Vec<(f64, f64)> =
        clean_idx.iter().map(|&i| (train.samples[i].margin(w_hat), q[i])).collect();
    let weights: Vec<f64> = test
        .iter()
        .filter(|p| p.margin(w_hat) <= 0.0)
        .map(|p| {
            let c = p.margin(w_hat);
            clean_margins.iter().filter(|(m, _)| (m - c).abs() <= tau).map(|(_, qi)| qi).sum()
        })
        .collect();
    Ok(MisclassificationReport {
        tau,
        bound,
        misclassified: weights.len(),
        violations: weights.iter().filter(|&&w| w > bound).count(),
        max_weight: weights.iter().copied().fold(0.0, f64::max),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceProbe {
    pub max_random: f64,
    pub max_refined: f64,
    pub sigma_bar_sq: f64,
    /// `max(max_random, max_refined) <= sigma_bar_sq (1 + rel_tol)`
    pub passed: bool,
    pub probes: usize,
}

impl VarianceProbe {
    pub fn max(&self) -> f64 {
        self.max_random.max(self.max_refined)
    }
}

/// Largest `(1/n) sum q_i (w . x_i)^2` over `probes` random members of `W`
/// and over directions refined by truncated power iteration from the top
/// eigenvector and from the best random probes.
pub fn variance_probe<R: Rng + ?Sized>(
    set: &SampleSet,
    q: &[f64],
    s: usize,
    sigma_bar: f64,
    rel_tol: f64,
    probes: usize,
    rng: &mut R,
) -> Result<VarianceProbe, DiagnosticsError> {
    check_weights(set, q)?;
    let Some(d) = set.dim() else { return Err(DiagnosticsError::Empty) };
    let x = instance_matrix(set);
    let mut scored = Vec::with_capacity(probes);
    for _ in 0..probes {
        let support = if rng.random_bool(0.5) { s.min(d) } else { rng.random_range(1..=d) };
        let w = random_w(d, s, support, rng)?;
        scored.push((directional_variance(&x, q, &w), w));
    }
    let max_random = scored.iter().map(|(v, _)| *v).fold(0.0, f64::max);

    let a = crate::robustify::weighted_second_moment(&x, q);
    let eig = linalg::sym_eigen(&a);
    let top: Vec<f64> = (0..d).map(|i| eig.vectors[(i, d - 1)]).collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut starts = vec![top];
    starts.extend(scored.into_iter().take(5).map(|(_, w)| w));
    let max_refined = starts
        .iter()
        .map(|st| {
            let (w, _) = sparse_power(&a, s, st, 200);
            directional_variance(&x, q, &w)
        })
        .fold(0.0, f64::max);
    let sigma_bar_sq = sigma_bar * sigma_bar;
    Ok(VarianceProbe {
        max_random,
        max_refined,
        sigma_bar_sq,
        passed: max_random.max(max_refined) <= sigma_bar_sq * (1.0 + rel_tol),
        probes,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KktCheck {
    pub active_boundary: bool,
    pub kkt_residual: f64,
    /// `|g . w'| / ||w'||`, when `w*` was attached.
    pub orthogonality: Option<f64>,
    /// `lambda1 (sqrt(s) - ||w||_1)`
    pub slack_l1: f64,
    /// `lambda2 (1 - ||w||_2)`
    pub slack_l2: f64,
    /// Residual and orthogonality within `10 tol`, slackness within `tol`.
    pub passed: bool,
}

/// Checks the recovered multipliers against stationarity, orthogonality to
/// `w'` and complementary slackness.
pub fn kkt_check(kkt: &KktDiagnostics, w_hat: &[f64], s: usize, tol: f64) -> KktCheck {
    let slack_l1 = kkt.lambda1 * ((s as f64).sqrt() - linalg::norm1(w_hat)).abs();
    let slack_l2 = kkt.lambda2 * (1.0 - norm2(w_hat)).abs();
    let orthogonality = kkt.orthogonality_ratio();
    let passed = kkt.kkt_residual <= 10.0 * tol
        && orthogonality.is_none_or(|o| o <= 10.0 * tol)
        && slack_l1 <= tol
        && slack_l2 <= tol;
    KktCheck {
        active_boundary: kkt.active.any(),
        kkt_residual: kkt.kkt_residual,
        orthogonality,
        slack_l1,
        slack_l2,
        passed,
    }
}
