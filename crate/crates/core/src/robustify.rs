//! L-infinity filtering and soft outlier removal over the matrix set `M`.

use faer::Mat;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{self, ConstraintM, GeometryError};
use crate::linalg::{self, dot};
use crate::par;
use crate::synth::SampleSet;

#[derive(Debug, Error)]
pub enum RobustifyError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("invalid parameter {name} = {value}")]
    BadParameter { name: &'static str, value: f64 },
    #[error("weight/sample length mismatch ({weights} weights, {samples} samples)")]
    LengthMismatch { weights: usize, samples: usize },
    #[error("empty sample set")]
    Empty,
    #[error(
        "soft outlier removal infeasible: weight mass {mass:.3} fell below {required:.3} in round {round}"
    )]
    Infeasible { mass: f64, required: f64, round: usize },
    #[error("soft outlier removal did not converge in {rounds} rounds (worst variance {value:.6})")]
    NonConvergence { rounds: usize, value: f64 },
    #[error(
        "worst-case variance ascent did not converge in {iterations} iterations (value {value:.6}, upper bound {upper_bound:.6})"
    )]
    OracleNonConvergence { iterations: usize, value: f64, upper_bound: f64 },
}

/// Per-sample weights in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightVector {
    pub q: Vec<f64>,
}

impl WeightVector {
    pub fn ones(n: usize) -> Self {
        Self { q: vec![1.0; n] }
    }

    pub fn new(q: Vec<f64>) -> Result<Self, RobustifyError> {
        if let Some(&bad) = q.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(RobustifyError::BadParameter { name: "q", value: bad });
        }
        Ok(Self { q })
    }

    pub fn len(&self) -> usize {
        self.q.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q.is_empty()
    }

    pub fn mass(&self) -> f64 {
        self.q.iter().sum()
    }
}

/// `r + sigma * (ln(n' d / delta') + 1)`
pub fn linf_threshold(r: f64, sigma: f64, n_prime: usize, d: usize, delta_prime: f64) -> f64 {
    r + sigma * (((n_prime * d) as f64 / delta_prime).ln() + 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterOutcome {
    pub kept: SampleSet,
    pub threshold: f64,
    pub removed: usize,
}

/// Keeps exactly the samples with `||x||_inf < threshold`.
pub fn linf_filter(
    set: &SampleSet,
    r: f64,
    sigma: f64,
    n_prime: usize,
    delta_prime: f64,
) -> Result<FilterOutcome, RobustifyError> {
    if !(delta_prime > 0.0 && delta_prime < 1.0) {
        return Err(RobustifyError::BadParameter { name: "delta_prime", value: delta_prime });
    }
    if !(r >= 0.0 && sigma > 0.0) {
        return Err(RobustifyError::BadParameter { name: "sigma", value: sigma });
    }
    let d = set.dim().unwrap_or(1);
    let threshold = linf_threshold(r, sigma, n_prime.max(1), d, delta_prime);
    let keep = par::map_slice(&set.samples, |s| linalg::norm_inf(&s.x) < threshold);
    let kept: SampleSet = set
        .samples
        .iter()
        .zip(&keep)
        .filter(|(_, &k)| k)
        .map(|(s, _)| s.clone())
        .collect();
    let removed = set.len() - kept.len();
    Ok(FilterOutcome { kept, threshold, removed })
}

/// `2 sqrt(1/d + r^2)`
pub fn sigma_bar(d: usize, r: f64) -> f64 {
    2.0 * (1.0 / d as f64 + r * r).sqrt()
}

/// Row-major instance matrix.
pub fn instance_matrix(set: &SampleSet) -> Mat<f64> {
    let d = set.dim().unwrap_or(0);
    Mat::from_fn(set.len(), d, |i, j| set.samples[i].x[j])
}

/// `A(q) = (1/n) sum_i q_i x_i x_i^T` with `n` the number of rows.
pub fn weighted_second_moment(x: &Mat<f64>, q: &[f64]) -> Mat<f64> {
    let (n, d) = (x.nrows(), x.ncols());
    let live: Vec<usize> = (0..n).filter(|&i| q[i] > 0.0).collect();
    let xq = Mat::from_fn(live.len(), d, |r, j| q[live[r]].sqrt() * x[(live[r], j)]);
    let mut a = xq.transpose() * &xq;
    let inv = 1.0 / n.max(1) as f64;
    for j in 0..d {
        for i in 0..d {
            a[(i, j)] *= inv;
        }
    }
    a
}

/// `(1/n) sum_i q_i (w . x_i)^2`
pub fn directional_variance(x: &Mat<f64>, q: &[f64], w: &[f64]) -> f64 {
    let n = x.nrows();
    let total = par::chunked_sum(n, |rows| {
        rows.map(|i| {
            let t: f64 = (0..x.ncols()).map(|j| x[(i, j)] * w[j]).sum();
            q[i] * t * t
        })
        .sum()
    });
    total / n.max(1) as f64
}

/// `x_i^T H x_i` for every row.
pub fn quadratic_scores(x: &Mat<f64>, h: &Mat<f64>) -> Vec<f64> {
    let xh = x * h;
    (0..x.nrows())
        .map(|i| (0..x.ncols()).map(|j| xh[(i, j)] * x[(i, j)]).sum())
        .collect()
}

fn mat_vec(a: &Mat<f64>, w: &[f64]) -> Vec<f64> {
    let d = a.nrows();
    let mut out = vec![0.0; d];
    for (j, &wj) in w.iter().enumerate() {
        if wj == 0.0 {
            continue;
        }
        let col = a.col(j);
        for i in 0..d {
            out[i] += col[i] * wj;
        }
    }
    out
}

/// Truncated power iteration over `W`: `w <- argmax_{v in W} <A w, v>`.
/// For PSD `A` the quadratic `w^T A w` never decreases.
pub fn sparse_power(a: &Mat<f64>, s: usize, start: &[f64], iters: usize) -> (Vec<f64>, f64) {
    let w_set = match geometry::ConstraintW::new(s) {
        Ok(w) => w,
        Err(_) => return (vec![0.0; start.len()], 0.0),
    };
    let mut w = w_set.support(start).argmax;
    let mut val = dot(&w, &mat_vec(a, &w));
    for _ in 0..iters {
        let g = mat_vec(a, &w);
        let next = w_set.support(&g).argmax;
        let next_val = dot(&next, &mat_vec(a, &next));
        if next_val <= val * (1.0 + 1e-12) {
            if next_val > val {
                w = next;
                val = next_val;
            }
            break;
        }
        w = next;
        val = next_val;
    }
    (w, val)
}

/// Weakest of the two analytic bounds `lambda_max(A) ||H||_*` and
/// `max|A_ij| ||H||_1`.
pub fn analytic_upper_bound(a: &Mat<f64>, s: usize) -> f64 {
    let lmax = linalg::lambda_max(a);
    lmax.max(0.0).min(s as f64 * linalg::entrywise_max_abs(a))
}

/// Weak duality for `sup_{H in M} <A, H>`: for any symmetric `U`,
/// `<A, H> = <A - U, H> + <U, H> <= max(lambda_max(A - U), 0) + s max|U_ij|`.
pub fn dual_value(a: &Mat<f64>, u: &Mat<f64>, s: usize) -> f64 {
    let b = a - u;
    linalg::lambda_max(&b).max(0.0) + s as f64 * linalg::entrywise_max_abs(u)
}

/// Dual bound with `U = clip(A, mu)`, minimized over `mu`.
pub fn soft_threshold_dual_bound(a: &Mat<f64>, s: usize) -> f64 {
    let top = linalg::entrywise_max_abs(a);
    if top == 0.0 {
        return 0.0;
    }
    let eval = |mu: f64| {
        let u = Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)].clamp(-mu, mu));
        dual_value(a, &u, s)
    };
    golden_min(eval, 0.0, top, 12, 10).0
}

/// `U` aligned with the sign pattern of `h` on its support and clipped from
/// `A` elsewhere; complementary slackness makes it tight at an optimal `h`.
fn structured_u(a: &Mat<f64>, h: &Mat<f64>, mu: f64) -> Mat<f64> {
    let cut = 1e-6 * linalg::entrywise_max_abs(h);
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| {
        let hij = h[(i, j)];
        if hij.abs() > cut {
            mu.copysign(hij)
        } else {
            a[(i, j)].clamp(-mu, mu)
        }
    })
}

/// Best dual value over `mu` for the sign-pattern choice of `U`, and that `mu`.
pub fn structured_dual_bound(a: &Mat<f64>, h: &Mat<f64>, s: usize) -> (f64, f64) {
    let top = linalg::entrywise_max_abs(a);
    if top == 0.0 {
        return (0.0, 0.0);
    }
    golden_min(|mu| dual_value(a, &structured_u(a, h, mu), s), 0.0, top, 12, 10)
}

/// Grid search followed by golden-section refinement; returns `(min, argmin)`.
fn golden_min<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, grid: usize, refine: usize) -> (f64, f64) {
    let h = (hi - lo) / grid as f64;
    let mut best = (f64::INFINITY, lo);
    for k in 0..=grid {
        let x = lo + h * k as f64;
        let v = f(x);
        if v < best.0 {
            best = (v, x);
        }
    }
    let (mut a, mut b) = ((best.1 - h).max(lo), (best.1 + h).min(hi));
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut m1 = b - phi * (b - a);
    let mut m2 = a + phi * (b - a);
    let (mut f1, mut f2) = (f(m1), f(m2));
    for _ in 0..refine {
        if f1 < best.0 {
            best = (f1, m1);
        }
        if f2 < best.0 {
            best = (f2, m2);
        }
        if f1 <= f2 {
            b = m2;
            m2 = m1;
            f2 = f1;
            m1 = b - phi * (b - a);
            f1 = f(m1);
        } else {
            a = m1;
            m1 = m2;
            f1 = f2;
            m2 = a + phi * (b - a);
            f2 = f(m2);
        }
    }
    best
}

/// Scales a matrix from the spectral set into the entrywise L1 ball; a factor
/// below one keeps `H PSD, ||H||_* <= 1`, so the result lies in `M`.
fn scale_into_l1(mut h: Mat<f64>, s: usize) -> Mat<f64> {
    let l1 = linalg::entrywise_l1(&h);
    if l1 > s as f64 {
        let f = s as f64 / l1;
        for j in 0..h.ncols() {
            for i in 0..h.nrows() {
                h[(i, j)] *= f;
            }
        }
    }
    h
}

/// Maps an approximately feasible symmetric matrix into `M` exactly.
pub fn repair_into_m(h: &Mat<f64>, s: usize) -> Mat<f64> {
    scale_into_l1(geometry::spectral_project(h).matrix, s)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AscentOptions {
    /// Relative duality gap at which the ascent stops.
    pub tol: f64,
    pub max_iter: usize,
    /// Penalty as a multiple of `lambda_max(A)`.
    pub rho_scale: f64,
    /// Stop once the value strictly exceeds this level.
    pub stop_above: Option<f64>,
    /// Stop once the certified bound drops to this level.
    pub stop_below: Option<f64>,
}

impl Default for AscentOptions {
    fn default() -> Self {
        Self { tol: 1e-3, max_iter: 500, rho_scale: 1.0, stop_above: None, stop_below: None }
    }
}

#[derive(Debug, Clone)]
pub struct WorstCase {
    /// Best feasible iterate found; always an exact member of `M`.
    pub h: Mat<f64>,
    /// `<A, H>` at `h`.
    pub value: f64,
    /// `min(lambda_max(A), s max|A_ij|)`.
    pub upper_bound: f64,
    /// Smallest dual value found; `value <= sup <= certified_upper`.
    pub certified_upper: f64,
    pub iterations: usize,
    /// Relative gap closed to `tol`, or a stop level was crossed.
    pub converged: bool,
}

impl WorstCase {
    pub fn gap(&self) -> f64 {
        (self.certified_upper - self.value).max(0.0)
    }
}

/// `sup_{H in M} <A, H>`.
///
/// Starts from a sparse rank-one candidate `w w^T` found by truncated power
/// iteration, then runs ADMM on the split `H = Z` with `H` in the spectral
/// set `{H PSD, ||H||_* <= 1}` and `Z` in the entrywise L1 ball. The scaled
/// multiplier is a dual point, so every few iterations the run carries a
/// certified upper bound alongside the best feasible value.
pub fn worst_case_ascent(
    a: &Mat<f64>,
    s: usize,
    opts: &AscentOptions,
) -> Result<WorstCase, RobustifyError> {
    ConstraintM::new(s)?;
    let d = a.nrows();
    let eig = linalg::sym_eigen(a);
    let lmax = eig.values.last().copied().unwrap_or(0.0).max(0.0);
    let upper_bound = lmax.min(s as f64 * linalg::entrywise_max_abs(a));
    if d == 0 || upper_bound <= 0.0 {
        return Ok(WorstCase {
            h: Mat::zeros(d, d),
            value: 0.0,
            upper_bound: 0.0,
            certified_upper: 0.0,
            iterations: 0,
            converged: true,
        });
    }

    let top_vec: Vec<f64> = eig.vectors.col(d - 1).iter().copied().collect();
    let (mut w, mut val) = sparse_power(a, s, &top_vec, 100);
    let diag_start = (0..d).max_by(|&i, &j| a[(i, i)].total_cmp(&a[(j, j)])).unwrap_or(0);
    let mut e = vec![0.0; d];
    e[diag_start] = 1.0;
    let (w2, val2) = sparse_power(a, s, &e, 100);
    if val2 > val {
        w = w2;
        val = val2;
    }
    let mut best_h = linalg::outer(&w);
    let mut value = val;
    let mut certified = upper_bound;

    let stop = |value: f64, cert: f64| {
        opts.stop_above.is_some_and(|lvl| value > lvl)
            || opts.stop_below.is_some_and(|lvl| cert <= lvl)
            || cert - value <= opts.tol * cert.abs().max(f64::MIN_POSITIVE)
    };
    let done = |h: Mat<f64>, value: f64, cert: f64, it: usize, converged: bool| WorstCase {
        h,
        value,
        upper_bound,
        certified_upper: cert.max(value),
        iterations: it,
        converged,
    };
    if stop(value, certified) {
        return Ok(done(best_h, value, certified, 0, true));
    }
    let (sd, mu) = structured_dual_bound(a, &best_h, s);
    certified = certified.min(sd);
    if stop(value, certified) {
        return Ok(done(best_h, value, certified, 0, true));
    }

    let rho = opts.rho_scale * lmax;
    let mut z = best_h.clone();
    let mut lam = structured_u(a, &best_h, mu);
    for j in 0..d {
        for i in 0..d {
            lam[(i, j)] /= rho;
        }
    }
    for it in 1..=opts.max_iter {
        let arg = Mat::from_fn(d, d, |i, j| z[(i, j)] - lam[(i, j)] + a[(i, j)] / rho);
        let h = geometry::spectral_project(&arg).matrix;
        let hl = &h + &lam;
        z = geometry::entrywise_l1_ball(&hl, s as f64);
        lam = &hl - &z;

        let cand = scale_into_l1(h, s);
        let v = linalg::frobenius_dot(a, &cand);
        if v > value {
            value = v;
            best_h = cand;
        }
        if it % 5 == 0 {
            let u = Mat::from_fn(d, d, |i, j| rho * lam[(i, j)]);
            certified = certified.min(dual_value(a, &u, s));
        }
        if stop(value, certified) {
            return Ok(done(best_h, value, certified, it, true));
        }
    }
    Ok(done(best_h, value, certified, opts.max_iter, false))
}

/// Worst-case weighted variance over `M` for instances `x` and weights `q`.
pub fn worst_case_h(
    x: &Mat<f64>,
    q: &WeightVector,
    s: usize,
    tol: f64,
    max_iter: usize,
) -> Result<WorstCase, RobustifyError> {
    if q.len() != x.nrows() {
        return Err(RobustifyError::LengthMismatch { weights: q.len(), samples: x.nrows() });
    }
    let a = weighted_second_moment(x, &q.q);
    let opts = AscentOptions { tol, max_iter, ..AscentOptions::default() };
    let out = worst_case_ascent(&a, s, &opts)?;
    if !out.converged {
        return Err(RobustifyError::OracleNonConvergence {
            iterations: out.iterations,
            value: out.value,
            upper_bound: out.upper_bound,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemovalReport {
    pub iterations: usize,
    pub final_worst_variance: f64,
    /// Certified bound on the worst-case variance at the returned weights.
    pub final_upper_bound: f64,
    pub sigma_bar: f64,
    pub weight_mass: f64,
    pub converged: bool,
    /// Weight mass before each round.
    pub mass_trace: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RemovalOptions {
    pub s: usize,
    pub xi: f64,
    pub sigma_bar: f64,
    /// Relative slack on `sigma_bar^2` (oracle_tol).
    pub tol: f64,
    /// `None` means `|S|`.
    pub max_rounds: Option<usize>,
    pub ascent_max_iter: usize,
}

impl RemovalOptions {
    pub fn new(s: usize, xi: f64, sigma_bar: f64) -> Self {
        Self { s, xi, sigma_bar, tol: 1e-3, max_rounds: None, ascent_max_iter: 200 }
    }
}

/// Soft filter: repeatedly find the worst-case `H in M` and shrink each
/// weight by `1 - tau_i / tau_max`, `tau_i = x_i^T H x_i`, until the weighted
/// variance over `M` is certified to be at most `sigma_bar^2`.
pub fn soft_outlier_removal(
    set: &SampleSet,
    opts: &RemovalOptions,
) -> Result<(WeightVector, RemovalReport), RobustifyError> {
    if set.is_empty() {
        return Err(RobustifyError::Empty);
    }
    soft_outlier_removal_matrix(&instance_matrix(set), opts)
}

pub fn soft_outlier_removal_matrix(
    x: &Mat<f64>,
    opts: &RemovalOptions,
) -> Result<(WeightVector, RemovalReport), RobustifyError> {
    if !(opts.xi > 0.0 && opts.xi < 1.0) {
        return Err(RobustifyError::BadParameter { name: "xi", value: opts.xi });
    }
    if !(opts.sigma_bar > 0.0 && opts.sigma_bar.is_finite()) {
        return Err(RobustifyError::BadParameter { name: "sigma_bar", value: opts.sigma_bar });
    }
    let n = x.nrows();
    if n == 0 {
        return Err(RobustifyError::Empty);
    }
    let level = opts.sigma_bar * opts.sigma_bar;
    let accept = level * (1.0 + opts.tol);
    let required = (1.0 - opts.xi) * n as f64;
    let max_rounds = opts.max_rounds.unwrap_or(n);
    let mut q = vec![1.0; n];
    let mut mass_trace = Vec::new();
    let mut last_value = f64::NAN;

    for round in 1..=max_rounds {
        let mass: f64 = q.iter().sum();
        mass_trace.push(mass);
        let a = weighted_second_moment(x, &q);
        let ascent = AscentOptions {
            tol: opts.tol,
            max_iter: opts.ascent_max_iter,
            stop_above: Some(accept),
            stop_below: Some(accept),
            ..AscentOptions::default()
        };
        let wc = worst_case_ascent(&a, opts.s, &ascent)?;
        last_value = wc.value;
        if wc.certified_upper <= accept {
            return Ok((
                WeightVector { q },
                RemovalReport {
                    iterations: round,
                    final_worst_variance: wc.value,
                    final_upper_bound: wc.certified_upper,
                    sigma_bar: opts.sigma_bar,
                    weight_mass: mass,
                    converged: true,
                    mass_trace,
                },
            ));
        }
        // Not certified: down-weight against the best H found, which is the
        // conservative choice when the ascent stalls between the two levels.
        let tau = quadratic_scores(x, &wc.h);
        let tau_max = (0..n)
            .filter(|&i| q[i] > 0.0)
            .map(|i| tau[i])
            .fold(0.0, f64::max);
        if tau_max <= 0.0 {
            break;
        }
        for i in 0..n {
            if q[i] > 0.0 {
                q[i] *= (1.0 - tau[i].max(0.0) / tau_max).max(0.0);
            }
        }
        let mass: f64 = q.iter().sum();
        if mass < required {
            return Err(RobustifyError::Infeasible { mass, required, round });
        }
    }
    Err(RobustifyError::NonConvergence { rounds: max_rounds, value: last_value })
}
