//! Constrained hinge minimization: projected subgradient descent, an
//! accelerated refinement on Huber-smoothed surrogates, and the subgradient
//! certificate behind the stationarity diagnostics.

use faer::linalg::matmul::matmul;
use faer::{Accum, MatMut, MatRef, Par};
use serde::{Deserialize, Serialize};

use crate::geometry::ConstraintW;
use crate::linalg::{self, dot, norm2};
use crate::synth::LabeledSample;

use super::kkt::{active_set, kkt_diagnostics, recover_multipliers, ActiveSet, KktDiagnostics};
use super::LearnerError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HingeParams {
    pub gamma: f64,
    /// Initial step; `None` means `gamma`.
    pub step0: Option<f64>,
    /// Step `step0 / t^decay`.
    pub decay: f64,
    pub max_iters: usize,
    pub stationarity_tol: f64,
    /// Number of smoothing levels `1e-2, 1e-3, ...` for the accelerated
    /// refinement; 0 disables it.
    pub smooth_levels: usize,
    /// Iteration cap per smoothing level.
    pub smooth_iters: usize,
    /// Iteration cap for fitting the kink coefficients of the certificate.
    pub certificate_iters: usize,
    pub probe_step: f64,
    /// Tolerance for deciding that a norm constraint is tight.
    pub active_tol: f64,
}

impl HingeParams {
    pub fn new(gamma: f64) -> Self {
        Self {
            gamma,
            step0: None,
            decay: 0.5,
            max_iters: 1000,
            smooth_levels: 4,
            smooth_iters: 2000,
            stationarity_tol: 1e-4,
            certificate_iters: 300,
            probe_step: 1e-3,
            active_tol: 1e-6,
        }
    }

    fn validate(&self) -> Result<(), LearnerError> {
        let pos = |name, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(LearnerError::BadParameter { name, value: v })
            }
        };
        pos("gamma", self.gamma)?;
        pos("step0", self.step0.unwrap_or(self.gamma))?;
        pos("stationarity_tol", self.stationarity_tol)?;
        pos("probe_step", self.probe_step)?;
        if !(self.decay >= 0.0) {
            return Err(LearnerError::BadParameter { name: "decay", value: self.decay });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HalfspaceModel {
    pub w_hat: Vec<f64>,
    pub kkt: KktDiagnostics,
    pub iterations_used: usize,
    /// `sum_i q_i loss_i` at `w_hat`.
    pub final_loss: f64,
    /// `final_loss / sum_i q_i`.
    pub mean_loss: f64,
    /// `stationarity_residual <= stationarity_tol`.
    pub converged: bool,
    /// Samples with `|margin - 1| <= kink_band` were treated as sitting on
    /// the kink when building the certificate subgradient.
    pub kink_band: f64,
    /// Best mean loss after each iteration.
    #[serde(skip)]
    pub best_loss_trace: Vec<f64>,
}

/// `||P_W(w - t g) - w|| / t`
pub fn stationarity_residual(w_set: &ConstraintW, w: &[f64], g: &[f64], t: f64) -> f64 {
    let mut v = w.to_vec();
    linalg::axpy(-t, g, &mut v);
    match w_set.project_threshold(&v) {
        Ok(p) => linalg::dist2(&p, w) / t,
        Err(_) => f64::INFINITY,
    }
}

/// Rows `y_i x_i / gamma`, flattened.
struct Rows {
    k: Vec<f64>,
    n: usize,
    d: usize,
}

impl Rows {
    fn new(samples: &[LabeledSample], gamma: f64) -> Self {
        let d = samples[0].x.len();
        let mut k = Vec::with_capacity(samples.len() * d);
        for s in samples {
            k.extend(s.x.iter().map(|x| x * s.yf() / gamma));
        }
        Self { k, n: samples.len(), d }
    }

    fn matrix(&self) -> MatRef<'_, f64> {
        MatRef::from_row_major_slice(&self.k, self.n, self.d)
    }

    fn margins(&self, w: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        matmul(
            MatMut::from_column_major_slice_mut(&mut out, self.n, 1),
            Accum::Replace,
            self.matrix(),
            MatRef::from_column_major_slice(w, self.d, 1),
            1.0,
            Par::Seq,
        );
        out
    }

    /// `sum_i c_i k_i`
    fn combine(&self, c: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.d];
        matmul(
            MatMut::from_column_major_slice_mut(&mut out, self.d, 1),
            Accum::Replace,
            self.matrix().transpose(),
            MatRef::from_column_major_slice(c, self.n, 1),
            1.0,
            Par::Seq,
        );
        out
    }

    /// Largest eigenvalue of `sum_i p_i k_i k_i^T`.
    fn weighted_gram_norm(&self, p: &[f64]) -> f64 {
        let mut v = vec![1.0 / (self.d as f64).sqrt(); self.d];
        let mut lam = 0.0;
        for _ in 0..50 {
            let m = self.margins(&v);
            let c: Vec<f64> = m.iter().zip(p).map(|(m, p)| m * p).collect();
            let u = self.combine(&c);
            let n = norm2(&u);
            if n == 0.0 {
                return 0.0;
            }
            lam = n;
            v = linalg::scale(&u, 1.0 / n);
        }
        lam
    }
}

/// Huber-smoothed hinge `sum_i p_i h_mu(m_i)` from margins, with the
/// per-row gradient coefficients.
fn smoothed(m: &[f64], p: &[f64], mu: f64) -> (f64, Vec<f64>) {
    let mut val = 0.0;
    let c = m
        .iter()
        .zip(p)
        .map(|(&m, &p)| {
            let slack = 1.0 - m;
            if slack >= mu {
                val += p * (slack - 0.5 * mu);
                -p
            } else if slack > 0.0 {
                val += p * slack * slack / (2.0 * mu);
                -p * slack / mu
            } else {
                0.0
            }
        })
        .collect();
    (val, c)
}

/// Accelerated projected gradient on the smoothed objective with
/// function-value restarts. Margins are linear in `w`, so the extrapolated
/// point reuses them instead of another pass over the data.
#[allow(clippy::too_many_arguments)]
fn smoothed_fista(
    rows: &Rows,
    p: &[f64],
    w_set: &ConstraintW,
    start: Vec<f64>,
    mu: f64,
    lip: f64,
    iters: usize,
    tol: f64,
) -> Result<Vec<f64>, LearnerError> {
    if !(lip > 0.0) {
        return Ok(start);
    }
    let step = 1.0 / lip;
    let mut x = start;
    let mut mx = rows.margins(&x);
    let mut fx = smoothed(&mx, p, mu).0;
    let mut y = x.clone();
    let mut my = mx.clone();
    let mut t_k = 1.0f64;
    for _ in 0..iters {
        let (_, c) = smoothed(&my, p, mu);
        let g = rows.combine(&c);
        let mut v = y.clone();
        linalg::axpy(-step, &g, &mut v);
        let next = w_set.project_threshold(&v)?;
        let moved = linalg::dist2(&next, &y);
        let m_next = rows.margins(&next);
        let f_next = smoothed(&m_next, p, mu).0;
        if moved * lip < tol {
            return Ok(if f_next <= fx { next } else { x });
        }
        if f_next > fx {
            y = x.clone();
            my = mx.clone();
            t_k = 1.0;
            continue;
        }
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t_k * t_k).sqrt());
        let mom = (t_k - 1.0) / t_next;
        y = next.iter().zip(&x).map(|(n, o)| n + mom * (n - o)).collect();
        my = m_next.iter().zip(&mx).map(|(n, o)| n + mom * (n - o)).collect();
        x = next;
        mx = m_next;
        fx = f_next;
        t_k = t_next;
    }
    Ok(x)
}

const BANDS: [f64; 7] = [0.0, 1e-8, 1e-7, 1e-6, 1e-5, 1e-4, 1e-3];

/// A subgradient `g = -sum_i p_i a_i y_i x_i / gamma` at `w` with `a_i = 1`
/// below the band, `a_i = 0` above it, and `a_i in [0, 1]` inside the band
/// fitted to minimize `dist(-g, N_W(w))^2`, the squared KKT residual. That
/// objective is convex in `a` (squared distance to a convex cone composed
/// with an affine map), so accelerated projected gradient applies.
struct Certificate {
    g: Vec<f64>,
    residual: f64,
}

fn certificate(
    samples: &[LabeledSample],
    p: &[f64],
    gamma: f64,
    w: &[f64],
    margins: &[f64],
    band: f64,
    active: ActiveSet,
    iters: usize,
) -> Certificate {
    let d = w.len();
    let row = |i: usize| -> Vec<f64> { linalg::scale(&samples[i].x, p[i] * samples[i].yf() / gamma) };
    let mut g_fix = vec![0.0; d];
    let mut kink: Vec<usize> = Vec::new();
    for (i, &m) in margins.iter().enumerate() {
        if p[i] == 0.0 {
            continue;
        }
        if m < 1.0 - band {
            linalg::axpy(-1.0, &row(i), &mut g_fix);
        } else if m <= 1.0 + band {
            kink.push(i);
        }
    }
    let residual_of = |g: &[f64]| -> (f64, Vec<f64>) {
        let (l1, l2, z, res) = recover_multipliers(g, w, active);
        let rv: Vec<f64> = (0..d).map(|j| g[j] + l1 * z[j] + l2 * w[j]).collect();
        (res, rv)
    };
    if kink.is_empty() || iters == 0 {
        let (res, _) = residual_of(&g_fix);
        return Certificate { g: g_fix, residual: res };
    }

    let rows: Vec<Vec<f64>> = kink.iter().map(|&i| row(i)).collect();
    let g_of = |a: &[f64]| -> Vec<f64> {
        let mut g = g_fix.clone();
        for (r, &ai) in rows.iter().zip(a) {
            if ai != 0.0 {
                linalg::axpy(-ai, r, &mut g);
            }
        }
        g
    };
    // Lipschitz constant of the gradient: 2 ||R||^2 by power iteration.
    let mut v = vec![1.0; rows.len()];
    let mut lip = 0.0;
    for _ in 0..30 {
        let mut u = vec![0.0; d];
        for (r, &vi) in rows.iter().zip(&v) {
            linalg::axpy(vi, r, &mut u);
        }
        let back: Vec<f64> = rows.iter().map(|r| dot(r, &u)).collect();
        let n = norm2(&back);
        if n == 0.0 {
            break;
        }
        lip = n / norm2(&v);
        v = linalg::scale(&back, 1.0 / n);
    }
    let step = 1.0 / (2.0 * lip * 1.1).max(f64::MIN_POSITIVE);

    let mut a = vec![0.5; rows.len()];
    let mut y = a.clone();
    let mut t_k = 1.0f64;
    let mut best = {
        let g = g_of(&a);
        let (res, _) = residual_of(&g);
        Certificate { g, residual: res }
    };
    for _ in 0..iters {
        let g = g_of(&y);
        let (res, rv) = residual_of(&g);
        if res < best.residual {
            best = Certificate { g, residual: res };
        }
        if res == 0.0 {
            break;
        }
        // d/dy_i ||rv||^2 = -2 <row_i, rv>
        let next: Vec<f64> = y
            .iter()
            .zip(&rows)
            .map(|(&yi, r)| (yi + step * 2.0 * dot(r, &rv)).clamp(0.0, 1.0))
            .collect();
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t_k * t_k).sqrt());
        let mom = (t_k - 1.0) / t_next;
        y = next.iter().zip(&a).map(|(n, o)| (n + mom * (n - o)).clamp(0.0, 1.0)).collect();
        a = next;
        t_k = t_next;
    }
    best
}

/// Minimizes `sum_i q_i max(0, 1 - y_i x_i . w / gamma)` over
/// `W = {||w||_2 <= 1, ||w||_1 <= sqrt(s)}` by projected subgradient descent
/// with step `step0 / t^decay`, then refines with accelerated projected
/// gradient on Huber smoothings of decreasing width. Returned is the
/// candidate (best-loss iterate or a refinement endpoint) with the smallest
/// certified stationarity residual.
///
/// The objective is divided by `sum_i q_i` internally (same minimizer) so
/// the `gamma`-scaled step schedule does not depend on the sample count.
pub fn minimize_hinge(
    samples: &[LabeledSample],
    q: &[f64],
    s: usize,
    params: &HingeParams,
) -> Result<HalfspaceModel, LearnerError> {
    params.validate()?;
    if q.len() != samples.len() {
        return Err(LearnerError::LengthMismatch { weights: q.len(), samples: samples.len() });
    }
    let total: f64 = q.iter().sum();
    if !(total > 0.0) || samples.is_empty() {
        return Err(LearnerError::EmptyMass);
    }
    let d = samples[0].x.len();
    let w_set = ConstraintW::new(s)?;
    let p: Vec<f64> = q.iter().map(|x| x / total).collect();
    let gamma = params.gamma;
    let rows = Rows::new(samples, gamma);
    let hinge = |m: &[f64]| -> f64 { m.iter().zip(&p).map(|(m, p)| p * (1.0 - m).max(0.0)).sum() };
    let loss = |w: &[f64]| hinge(&rows.margins(w));

    let step0 = params.step0.unwrap_or(gamma);
    let mut w = vec![0.0; d];
    let mut m = rows.margins(&w);
    let mut best_w = w.clone();
    let mut best_loss = hinge(&m);
    let mut trace = Vec::with_capacity(params.max_iters);
    for t in 1..=params.max_iters {
        // points on the kink contribute 0
        let c: Vec<f64> = m.iter().zip(&p).map(|(&m, &p)| if m < 1.0 { -p } else { 0.0 }).collect();
        let g = rows.combine(&c);
        if g.iter().all(|&x| x == 0.0) {
            break;
        }
        let eta = step0 / (t as f64).powf(params.decay);
        linalg::axpy(-eta, &g, &mut w);
        w = w_set.project_threshold(&w)?;
        m = rows.margins(&w);
        let l = hinge(&m);
        if l < best_loss {
            best_loss = l;
            best_w = w.clone();
        }
        trace.push(best_loss);
    }
    let iterations_used = trace.len();

    let mut candidates = vec![best_w.clone()];
    if params.smooth_levels > 0 {
        let lam = rows.weighted_gram_norm(&p);
        let mut x = best_w.clone();
        for level in 0..params.smooth_levels {
            let mu = 1e-2 * 0.1f64.powi(level as i32);
            x = smoothed_fista(&rows, &p, &w_set, x, mu, lam / mu, params.smooth_iters, 0.1 * params.stationarity_tol)?;
            let l = loss(&x);
            if l < best_loss {
                best_loss = l;
                best_w = x.clone();
            }
            candidates.push(x.clone());
        }
        candidates.push(best_w.clone());
        candidates.reverse();
    }

    let mut chosen: Option<(f64, Vec<f64>, f64, Vec<f64>)> = None;
    for w in candidates {
        let margins = rows.margins(&w);
        let active = active_set(&w, s, params.active_tol);
        for &band in &BANDS {
            let c = certificate(samples, &p, gamma, &w, &margins, band, active, params.certificate_iters);
            let r = stationarity_residual(&w_set, &w, &c.g, params.probe_step).max(c.residual);
            if chosen.as_ref().is_none_or(|(best, ..)| r < *best) {
                chosen = Some((r, c.g, band, w.clone()));
            }
            if r <= 0.5 * params.stationarity_tol {
                break;
            }
        }
        if chosen.as_ref().is_some_and(|(r, ..)| *r <= 0.5 * params.stationarity_tol) {
            break;
        }
    }
    let (res, g, band, w_hat) = chosen.expect("at least one band is tried");
    let mean_loss = loss(&w_hat);

    let kkt = kkt_diagnostics(&g, &w_hat, s, params.active_tol, res);
    Ok(HalfspaceModel {
        converged: res <= params.stationarity_tol,
        final_loss: mean_loss * total,
        mean_loss,
        w_hat,
        kkt,
        iterations_used,
        kink_band: band,
        best_loss_trace: trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::Provenance;

    fn sample(x: Vec<f64>, y: i8) -> LabeledSample {
        LabeledSample { x, y, provenance: Provenance::Clean }
    }

    #[test]
    fn single_separable_sample() {
        let gamma = 0.5;
        let s = vec![sample(vec![gamma, 0.0, 0.0], 1)];
        let m = minimize_hinge(&s, &[1.0], 1, &HingeParams::new(gamma)).unwrap();
        assert!(m.final_loss <= 1e-9, "{}", m.final_loss);
        assert!(m.w_hat[0] >= 1.0 - 1e-6);
        assert!(m.best_loss_trace.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn first_step_follows_weighted_labels() {
        let s = vec![sample(vec![1.0, 0.5], 1), sample(vec![-0.2, 0.5], -1)];
        let mut params = HingeParams::new(10.0);
        params.max_iters = 1;
        let m = minimize_hinge(&s, &[1.0, 1.0], 2, &params).unwrap();
        // sum q_i y_i x_i = (1.2, 0)
        assert!(m.w_hat[0] > 0.0);
        assert!(m.w_hat[1].abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_input() {
        let s = vec![sample(vec![1.0], 1)];
        assert!(matches!(
            minimize_hinge(&s, &[0.0], 1, &HingeParams::new(1.0)),
            Err(LearnerError::EmptyMass)
        ));
        assert!(minimize_hinge(&s, &[1.0, 1.0], 1, &HingeParams::new(1.0)).is_err());
        assert!(minimize_hinge(&s, &[1.0], 1, &HingeParams::new(0.0)).is_err());
    }
}
