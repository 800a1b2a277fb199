//! Synthetic data: sparse ground truth, margin-separated mixtures of
//! logconcave components, the malicious oracle and the label-flip adversary.

use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{self, dot, norm2};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("sparsity must satisfy 1 <= s <= d (s = {s}, d = {d})")]
    BadSparsity { s: usize, d: usize },
    #[error("mixture needs at least one component")]
    NoComponents,
    #[error("noise rate {0} outside (0, 1/2]")]
    BadNoiseRate(f64),
    #[error("invalid parameter {name} = {value}")]
    BadParameter { name: &'static str, value: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("ground truth must be a unit vector (norm {0})")]
    NotUnit(f64),
    #[error(
        "margin incompatible with mixture: accepted {accepted} of {attempts} probe draws"
    )]
    MarginIncompatible { accepted: usize, attempts: usize },
}

fn positive(name: &'static str, value: f64) -> Result<(), SynthError> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(SynthError::BadParameter { name, value })
    }
}

fn sign(t: f64) -> i8 {
    if t >= 0.0 {
        1
    } else {
        -1
    }
}

fn gaussian_vec<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vec<f64> {
    (0..d).map(|_| StandardNormal.sample(rng)).collect()
}

/// Target halfspace together with the sparsity budget and margin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub w_star: Vec<f64>,
    pub s: usize,
    pub gamma: f64,
}

impl GroundTruth {
    pub fn new(w_star: Vec<f64>, s: usize, gamma: f64) -> Result<Self, SynthError> {
        let n = norm2(&w_star);
        if (n - 1.0).abs() > 1e-12 {
            return Err(SynthError::NotUnit(n));
        }
        let nnz = linalg::support_size(&w_star, 0.0);
        if s == 0 || nnz > s {
            return Err(SynthError::BadSparsity { s, d: w_star.len() });
        }
        if !(gamma >= 0.0 && gamma.is_finite()) {
            return Err(SynthError::BadParameter { name: "gamma", value: gamma });
        }
        Ok(Self { w_star, s, gamma })
    }

    pub fn dim(&self) -> usize {
        self.w_star.len()
    }

    /// True label `sign(x . w*)` with `sign(0) = +1`.
    pub fn label(&self, x: &[f64]) -> i8 {
        sign(dot(x, &self.w_star))
    }
}

/// Uniform random support of size `s`, i.i.d. standard normal entries on it,
/// normalized to unit length.
pub fn sample_sparse_halfspace<R: Rng + ?Sized>(
    d: usize,
    s: usize,
    rng: &mut R,
) -> Result<Vec<f64>, SynthError> {
    if s == 0 || s > d {
        return Err(SynthError::BadSparsity { s, d });
    }
    loop {
        let support = index::sample(rng, d, s);
        let mut w = vec![0.0; d];
        for i in support.iter() {
            w[i] = StandardNormal.sample(rng);
        }
        let n = norm2(&w);
        if n > 1e-12 {
            return Ok(linalg::scale(&w, 1.0 / n));
        }
    }
}

/// Logconcave component families. Each is parameterized to have covariance
/// exactly `scale^2 I`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Gaussian,
    LaplaceProduct,
    UniformBall,
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::Gaussian => "gaussian",
            Family::LaplaceProduct => "laplace-product",
            Family::UniformBall => "uniform-ball",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "gaussian" => Some(Family::Gaussian),
            "laplace-product" | "laplace" => Some(Family::LaplaceProduct),
            "uniform-ball" | "uniform" => Some(Family::UniformBall),
            _ => None,
        }
    }

    /// Zero-mean draw with covariance `scale^2 I`.
    pub fn noise<R: Rng + ?Sized>(&self, d: usize, scale: f64, rng: &mut R) -> Vec<f64> {
        match self {
            Family::Gaussian => linalg::scale(&gaussian_vec(d, rng), scale),
            Family::LaplaceProduct => {
                let b = scale / std::f64::consts::SQRT_2;
                (0..d)
                    .map(|_| {
                        let u: f64 = rng.random::<f64>() - 0.5;
                        -b * u.signum() * (1.0 - 2.0 * u.abs()).ln()
                    })
                    .collect()
            }
            Family::UniformBall => {
                // Radius chosen so that E[x x^T] = R^2/(d+2) I = scale^2 I.
                let radius = scale * ((d + 2) as f64).sqrt();
                let dir = gaussian_vec(d, rng);
                let n = norm2(&dir).max(f64::MIN_POSITIVE);
                let u: f64 = rng.random();
                let rho = radius * u.powf(1.0 / d as f64);
                linalg::scale(&dir, rho / n)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub family: Family,
    pub mean: Vec<f64>,
    pub scale: f64,
}

/// Equal-weight mixture of logconcave components.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureSpec {
    pub d: usize,
    pub r: f64,
    pub components: Vec<Component>,
    /// Means were placed at `+-gamma' w*` because no mean with norm `<= r`
    /// could clear the margin; the norm bound does not hold in that case.
    pub fallback: bool,
}

impl MixtureSpec {
    pub fn k(&self) -> usize {
        self.components.len()
    }

    /// One unconditioned draw: uniform component, then its noise around the mean.
    pub fn draw_instance<R: Rng + ?Sized>(&self, rng: &mut R) -> (usize, Vec<f64>) {
        let j = rng.random_range(0..self.components.len());
        let c = &self.components[j];
        let mut x = c.family.noise(self.d, c.scale, rng);
        linalg::axpy(1.0, &c.mean, &mut x);
        (j, x)
    }
}

/// Knobs for [`build_mixture_with`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureOptions {
    /// Per-component scale; `None` means `1/sqrt(d)`.
    pub sigma: Option<f64>,
    /// Families assigned to components round-robin.
    pub families: Vec<Family>,
}

impl Default for MixtureOptions {
    fn default() -> Self {
        Self {
            sigma: None,
            families: vec![Family::Gaussian, Family::LaplaceProduct],
        }
    }
}

/// Lower end of the allowed `|mu . w*|` range under the mean-placement rule,
/// or `None` when the rule is infeasible (`0 < r < max(gamma, r/2)`).
///
/// The rule requires `|mu . w*| >= max(gamma, r/2)` and additionally keeps the
/// component three standard deviations clear of the margin band when the
/// radius allows it, so that rejection sampling rarely fires.
pub fn mean_projection_floor(r: f64, gamma: f64, sigma: f64) -> Option<f64> {
    let lo = gamma.max(r / 2.0);
    if lo > r {
        return None;
    }
    Some(r.min(lo.max(gamma + 3.0 * sigma)))
}

pub fn build_mixture<R: Rng + ?Sized>(
    d: usize,
    k: usize,
    r: f64,
    gamma: f64,
    w_star: &[f64],
    rng: &mut R,
) -> Result<MixtureSpec, SynthError> {
    build_mixture_with(d, k, r, gamma, w_star, &MixtureOptions::default(), rng)
}

/// Places `k` component means. Component `j` gets sign `+` for even `j` and
/// `-` for odd `j` along `w*`, a projection drawn uniformly from
/// `[mean_projection_floor, r]`, and a random orthogonal part that keeps
/// `||mu_j|| <= r`.
pub fn build_mixture_with<R: Rng + ?Sized>(
    d: usize,
    k: usize,
    r: f64,
    gamma: f64,
    w_star: &[f64],
    opts: &MixtureOptions,
    rng: &mut R,
) -> Result<MixtureSpec, SynthError> {
    if k == 0 || opts.families.is_empty() {
        return Err(SynthError::NoComponents);
    }
    if w_star.len() != d {
        return Err(SynthError::DimensionMismatch { expected: d, got: w_star.len() });
    }
    if !(r >= 0.0 && r.is_finite()) {
        return Err(SynthError::BadParameter { name: "r", value: r });
    }
    if !(gamma >= 0.0 && gamma.is_finite()) {
        return Err(SynthError::BadParameter { name: "gamma", value: gamma });
    }
    let sigma = opts.sigma.unwrap_or(1.0 / (d as f64).sqrt());
    positive("sigma", sigma)?;

    let floor = mean_projection_floor(r, gamma, sigma);
    let fallback = r > 0.0 && floor.is_none();
    let mut components = Vec::with_capacity(k);
    for j in 0..k {
        let family = opts.families[j % opts.families.len()];
        let side = if j % 2 == 0 { 1.0 } else { -1.0 };
        let mean = if r == 0.0 {
            vec![0.0; d]
        } else if let Some(a_lo) = floor {
            let a = a_lo + rng.random::<f64>() * (r - a_lo);
            let mut mu = linalg::scale(w_star, side * a);
            let b_max = (r * r - a * a).max(0.0).sqrt();
            if b_max > 0.0 && d > 1 {
                let b = rng.random::<f64>() * b_max;
                let u = random_orthogonal_unit(w_star, rng);
                linalg::axpy(b, &u, &mut mu);
            }
            // Guard against rounding pushing the norm past r.
            let n = norm2(&mu);
            if n > r {
                mu = linalg::scale(&mu, r / n);
            }
            mu
        } else {
            linalg::scale(w_star, side * (gamma + 3.0 * sigma))
        };
        components.push(Component { family, mean, scale: sigma });
    }
    Ok(MixtureSpec { d, r, components, fallback })
}

fn random_orthogonal_unit<R: Rng + ?Sized>(w: &[f64], rng: &mut R) -> Vec<f64> {
    loop {
        let mut u = gaussian_vec(w.len(), rng);
        let t = dot(&u, w) / dot(w, w).max(f64::MIN_POSITIVE);
        linalg::axpy(-t, w, &mut u);
        let n = norm2(&u);
        if n > 1e-9 {
            return linalg::scale(&u, 1.0 / n);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Clean,
    Malicious,
    LabelFlipped,
}

impl Provenance {
    pub fn name(&self) -> &'static str {
        match self {
            Provenance::Clean => "clean",
            Provenance::Malicious => "malicious",
            Provenance::LabelFlipped => "label-flipped",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "clean" => Some(Provenance::Clean),
            "malicious" => Some(Provenance::Malicious),
            "label-flipped" => Some(Provenance::LabelFlipped),
            _ => None,
        }
    }
}

/// An instance with its label. `provenance` is evaluation metadata and is
/// never read by the learners.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSample {
    pub x: Vec<f64>,
    pub y: i8,
    pub provenance: Provenance,
}

impl LabeledSample {
    pub fn yf(&self) -> f64 {
        f64::from(self.y)
    }

    /// Signed margin `y (x . w)`.
    pub fn margin(&self, w: &[f64]) -> f64 {
        self.yf() * dot(&self.x, w)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SampleSet {
    pub samples: Vec<LabeledSample>,
}

impl SampleSet {
    pub fn new(samples: Vec<LabeledSample>) -> Self {
        Self { samples }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dim(&self) -> Option<usize> {
        self.samples.first().map(|s| s.x.len())
    }

    pub fn iter(&self) -> std::slice::Iter<'_, LabeledSample> {
        self.samples.iter()
    }

    pub fn count(&self, p: Provenance) -> usize {
        self.samples.iter().filter(|s| s.provenance == p).count()
    }

    /// Samples that did not come from the adversary.
    pub fn clean(&self) -> SampleSet {
        self.filter(|s| s.provenance == Provenance::Clean)
    }

    pub fn filter<F: Fn(&LabeledSample) -> bool>(&self, keep: F) -> SampleSet {
        SampleSet::new(self.samples.iter().filter(|s| keep(s)).cloned().collect())
    }

    pub fn subset(&self, idx: &[usize]) -> SampleSet {
        SampleSet::new(idx.iter().map(|&i| self.samples[i].clone()).collect())
    }

    pub fn instances(&self) -> Vec<&[f64]> {
        self.samples.iter().map(|s| s.x.as_slice()).collect()
    }
}

impl FromIterator<LabeledSample> for SampleSet {
    fn from_iter<I: IntoIterator<Item = LabeledSample>>(iter: I) -> Self {
        SampleSet::new(iter.into_iter().collect())
    }
}

/// Accept/attempt counters for margin rejection sampling.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RejectionStats {
    pub attempts: usize,
    pub accepted: usize,
}

impl RejectionStats {
    pub fn rejection_fraction(&self) -> f64 {
        if self.attempts == 0 {
            0.0
        } else {
            1.0 - self.accepted as f64 / self.attempts as f64
        }
    }
}

/// Probe window for detecting an incompatible margin.
const PROBE_ATTEMPTS: usize = 1_000;
const MIN_ACCEPTANCE: f64 = 0.01;

/// Draws clean samples from the mixture, labelled by `w*`, redrawing any
/// instance with `|x . w*| < gamma`.
pub struct CleanSampler<'a> {
    mixture: &'a MixtureSpec,
    gt: &'a GroundTruth,
    pub stats: RejectionStats,
}

impl<'a> CleanSampler<'a> {
    pub fn new(mixture: &'a MixtureSpec, gt: &'a GroundTruth) -> Result<Self, SynthError> {
        if mixture.d != gt.dim() {
            return Err(SynthError::DimensionMismatch { expected: mixture.d, got: gt.dim() });
        }
        Ok(Self { mixture, gt, stats: RejectionStats::default() })
    }

    pub fn sample<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<LabeledSample, SynthError> {
        loop {
            let (_, x) = self.mixture.draw_instance(rng);
            self.stats.attempts += 1;
            let t = dot(&x, &self.gt.w_star);
            if t.abs() >= self.gt.gamma {
                self.stats.accepted += 1;
                return Ok(LabeledSample { x, y: sign(t), provenance: Provenance::Clean });
            }
            if self.stats.attempts >= PROBE_ATTEMPTS
                && (self.stats.accepted as f64) < MIN_ACCEPTANCE * self.stats.attempts as f64
            {
                return Err(SynthError::MarginIncompatible {
                    accepted: self.stats.accepted,
                    attempts: self.stats.attempts,
                });
            }
        }
    }
}

pub fn draw_clean<R: Rng + ?Sized>(
    mixture: &MixtureSpec,
    gt: &GroundTruth,
    n: usize,
    rng: &mut R,
) -> Result<SampleSet, SynthError> {
    draw_clean_with_stats(mixture, gt, n, rng).map(|(s, _)| s)
}

pub fn draw_clean_with_stats<R: Rng + ?Sized>(
    mixture: &MixtureSpec,
    gt: &GroundTruth,
    n: usize,
    rng: &mut R,
) -> Result<(SampleSet, RejectionStats), SynthError> {
    if n == 0 {
        return Err(SynthError::BadParameter { name: "n", value: 0.0 });
    }
    let mut sampler = CleanSampler::new(mixture, gt)?;
    let samples = (0..n)
        .map(|_| sampler.sample(rng))
        .collect::<Result<Vec<_>, _>>()?;
    Ok((SampleSet::new(samples), sampler.stats))
}

/// Oblivious adversary strategies for the malicious oracle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum AdversaryStrategy {
    /// A mixture draw with one coordinate overwritten by `+-magnitude`,
    /// labelled against `w*`.
    FarOutlier { magnitude: f64 },
    /// Points at `magnitude * u` for a fixed unit vector `u` spread evenly over
    /// the support of `w*` with signs opposing it, labelled `+1`.
    SparseSpike { magnitude: f64 },
    /// Mixture draws moved to distance `band` from the true boundary on their
    /// own side, with the label flipped.
    BoundaryFlip { band: f64 },
    /// A tight cluster at `-offset * w~` for a random s-sparse unit `w~`,
    /// all carrying one label fixed when the oracle is built.
    CoordinatedDecoy { offset: f64 },
}

impl AdversaryStrategy {
    pub fn kind(&self) -> &'static str {
        match self {
            AdversaryStrategy::FarOutlier { .. } => "far-outlier",
            AdversaryStrategy::SparseSpike { .. } => "sparse-spike",
            AdversaryStrategy::BoundaryFlip { .. } => "boundary-flip",
            AdversaryStrategy::CoordinatedDecoy { .. } => "coordinated-decoy",
        }
    }

    pub fn parameter(&self) -> f64 {
        match *self {
            AdversaryStrategy::FarOutlier { magnitude }
            | AdversaryStrategy::SparseSpike { magnitude } => magnitude,
            AdversaryStrategy::BoundaryFlip { band } => band,
            AdversaryStrategy::CoordinatedDecoy { offset } => offset,
        }
    }

    /// Builds a strategy by name; `param` overrides the per-kind default,
    /// which depends on the margin `gamma`.
    pub fn from_kind(kind: &str, param: Option<f64>, gamma: f64) -> Option<Self> {
        Some(match kind {
            "far-outlier" => AdversaryStrategy::FarOutlier { magnitude: param.unwrap_or(100.0) },
            "sparse-spike" => AdversaryStrategy::SparseSpike { magnitude: param.unwrap_or(3.5) },
            "boundary-flip" => AdversaryStrategy::BoundaryFlip { band: param.unwrap_or(gamma / 2.0) },
            "coordinated-decoy" => {
                AdversaryStrategy::CoordinatedDecoy { offset: param.unwrap_or(2.0 * gamma) }
            }
            _ => return None,
        })
    }

    pub const KINDS: [&'static str; 4] =
        ["far-outlier", "sparse-spike", "boundary-flip", "coordinated-decoy"];

    fn validate(&self) -> Result<(), SynthError> {
        match *self {
            AdversaryStrategy::FarOutlier { magnitude } => positive("magnitude", magnitude),
            AdversaryStrategy::SparseSpike { magnitude } => positive("magnitude", magnitude),
            AdversaryStrategy::BoundaryFlip { band } => {
                if band >= 0.0 && band.is_finite() {
                    Ok(())
                } else {
                    Err(SynthError::BadParameter { name: "band", value: band })
                }
            }
            AdversaryStrategy::CoordinatedDecoy { offset } => positive("offset", offset),
        }
    }
}

/// Per-oracle adversary state, fixed at construction (the adversary is
/// oblivious: it never looks at issued samples).
#[derive(Debug, Clone)]
struct AdversaryState {
    spike_dir: Vec<f64>,
    decoy_dir: Vec<f64>,
    decoy_label: i8,
}

/// Sample oracle that returns a clean margin sample with probability
/// `1 - eta` and the adversary's sample otherwise.
pub struct MaliciousOracle<R: Rng> {
    mixture: MixtureSpec,
    gt: GroundTruth,
    eta: f64,
    strategy: AdversaryStrategy,
    state: AdversaryState,
    rng: R,
    pub clean_stats: RejectionStats,
}

impl<R: Rng> MaliciousOracle<R> {
    /// `eta` must lie in `(0, 1/2]`; `eta = 0` is accepted as the noiseless
    /// degenerate case.
    pub fn new(
        mixture: MixtureSpec,
        gt: GroundTruth,
        eta: f64,
        strategy: AdversaryStrategy,
        mut rng: R,
    ) -> Result<Self, SynthError> {
        if !(0.0..=0.5).contains(&eta) {
            return Err(SynthError::BadNoiseRate(eta));
        }
        if mixture.d != gt.dim() {
            return Err(SynthError::DimensionMismatch { expected: mixture.d, got: gt.dim() });
        }
        strategy.validate()?;
        let d = gt.dim();
        let supp: Vec<usize> = (0..d).filter(|&i| gt.w_star[i] != 0.0).collect();
        let mut spike_dir = vec![0.0; d];
        let share = 1.0 / (supp.len() as f64).sqrt();
        for &i in &supp {
            spike_dir[i] = -gt.w_star[i].signum() * share;
        }
        let decoy_dir = sample_sparse_halfspace(d, gt.s.min(d), &mut rng)?;
        let decoy_label = if rng.random::<bool>() { 1 } else { -1 };
        Ok(Self {
            mixture,
            gt,
            eta,
            strategy,
            state: AdversaryState { spike_dir, decoy_dir, decoy_label },
            rng,
            clean_stats: RejectionStats::default(),
        })
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn ground_truth(&self) -> &GroundTruth {
        &self.gt
    }

    pub fn mixture(&self) -> &MixtureSpec {
        &self.mixture
    }

    pub fn sample(&mut self) -> Result<LabeledSample, SynthError> {
        let adversarial = self.eta > 0.0 && self.rng.random::<f64>() < self.eta;
        if adversarial {
            Ok(self.adversarial_sample())
        } else {
            let mut sampler = CleanSampler::new(&self.mixture, &self.gt)?;
            sampler.stats = self.clean_stats;
            let out = sampler.sample(&mut self.rng);
            self.clean_stats = sampler.stats;
            out
        }
    }

    pub fn draw(&mut self, n: usize) -> Result<SampleSet, SynthError> {
        (0..n).map(|_| self.sample()).collect::<Result<Vec<_>, _>>().map(SampleSet::new)
    }

    fn adversarial_sample(&mut self) -> LabeledSample {
        let d = self.gt.dim();
        let sigma = self.mixture.components[0].scale;
        let (x, y) = match self.strategy {
            AdversaryStrategy::FarOutlier { magnitude } => {
                let (_, mut x) = self.mixture.draw_instance(&mut self.rng);
                let j = self.rng.random_range(0..d);
                x[j] = if self.rng.random::<bool>() { magnitude } else { -magnitude };
                let y = -self.gt.label(&x);
                (x, y)
            }
            AdversaryStrategy::SparseSpike { magnitude } => {
                let mut x = Family::Gaussian.noise(d, sigma, &mut self.rng);
                linalg::axpy(magnitude, &self.state.spike_dir, &mut x);
                (x, 1)
            }
            AdversaryStrategy::BoundaryFlip { band } => {
                let (_, mut x) = self.mixture.draw_instance(&mut self.rng);
                let t = dot(&x, &self.gt.w_star);
                let side = sign(t);
                linalg::axpy(f64::from(side) * band - t, &self.gt.w_star, &mut x);
                (x, -side)
            }
            AdversaryStrategy::CoordinatedDecoy { offset } => {
                let mut x = Family::Gaussian.noise(d, sigma, &mut self.rng);
                linalg::axpy(-offset, &self.state.decoy_dir, &mut x);
                (x, self.state.decoy_label)
            }
        };
        LabeledSample { x, y, provenance: Provenance::Malicious }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FlipPolicy {
    SmallestMarginFirst,
    Random,
}

impl FlipPolicy {
    pub fn name(&self) -> &'static str {
        match self {
            FlipPolicy::SmallestMarginFirst => "smallest-margin-first",
            FlipPolicy::Random => "random",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "smallest-margin-first" => Some(FlipPolicy::SmallestMarginFirst),
            "random" => Some(FlipPolicy::Random),
            _ => None,
        }
    }
}

/// Flips exactly `floor(eta |S|)` labels; instances are untouched.
///
/// `SmallestMarginFirst` flips the rows with the smallest `y (x . w*)`
/// (ties broken by index).
pub fn flip_labels_adversary<R: Rng + ?Sized>(
    set: &SampleSet,
    gt: &GroundTruth,
    eta: f64,
    policy: FlipPolicy,
    rng: &mut R,
) -> Result<SampleSet, SynthError> {
    if !(0.0..=0.5).contains(&eta) {
        return Err(SynthError::BadNoiseRate(eta));
    }
    let n = set.len();
    let count = (eta * n as f64).floor() as usize;
    let chosen: Vec<usize> = match policy {
        FlipPolicy::SmallestMarginFirst => {
            let mut order: Vec<usize> = (0..n).collect();
            let margins: Vec<f64> = set.samples.iter().map(|s| s.margin(&gt.w_star)).collect();
            order.sort_by(|&a, &b| margins[a].total_cmp(&margins[b]).then(a.cmp(&b)));
            order.truncate(count);
            order
        }
        FlipPolicy::Random => index::sample(rng, n, count).into_vec(),
    };
    let mut out = set.clone();
    for i in chosen {
        let s = &mut out.samples[i];
        s.y = -s.y;
        s.provenance = Provenance::LabelFlipped;
    }
    Ok(out)
}
