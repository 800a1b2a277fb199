//! Lagrange multiplier recovery for the two norm constraints of `W`.

use serde::{Deserialize, Serialize};

use crate::linalg::{self, dot, norm1, norm2};

/// Which constraints of `W` are tight, with the tolerance used to decide.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActiveSet {
    pub l1: bool,
    pub l2: bool,
}

impl ActiveSet {
    pub fn any(&self) -> bool {
        self.l1 || self.l2
    }
}

pub fn active_set(w: &[f64], s: usize, tol: f64) -> ActiveSet {
    ActiveSet {
        l1: (norm1(w) - (s as f64).sqrt()).abs() <= tol,
        l2: (norm2(w) - 1.0).abs() <= tol,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KktDiagnostics {
    /// `||P_W(w - t g) - w|| / t` at the probe step.
    pub stationarity_residual: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub z_hat: Vec<f64>,
    /// `(lambda1 z + lambda2 w) / (sqrt(s) lambda1 + lambda2)`, zero when both
    /// multipliers vanish.
    pub kappa: Vec<f64>,
    /// `||g + lambda1 z + lambda2 w||`
    pub kkt_residual: f64,
    pub active: ActiveSet,
    /// The subgradient the multipliers were fitted to.
    pub g: Vec<f64>,
    /// `w* - w <w*, kappa>`; present once a ground truth is attached.
    pub w_prime: Option<Vec<f64>>,
    pub g_dot_wprime: Option<f64>,
}

impl KktDiagnostics {
    /// Fills in `w'` and `g . w'` for a known target.
    pub fn attach_w_star(&mut self, w_hat: &[f64], w_star: &[f64]) {
        let c = dot(w_star, &self.kappa);
        let mut wp = w_star.to_vec();
        linalg::axpy(-c, w_hat, &mut wp);
        self.g_dot_wprime = Some(dot(&self.g, &wp));
        self.w_prime = Some(wp);
    }

    /// `|g . w'| / ||w'||`, the quantity bounded by the orthogonality check.
    pub fn orthogonality_ratio(&self) -> Option<f64> {
        let wp = self.w_prime.as_ref()?;
        let n = norm2(wp);
        let gd = self.g_dot_wprime?;
        Some(if n == 0.0 { gd.abs() } else { gd.abs() / n })
    }
}

/// Recovers `(lambda1, lambda2, z)` with `lambda1, lambda2 >= 0`, `||z||_inf <= 1`
/// and `z = sign(w)` on the support of `w`, minimizing `||g + lambda1 z + lambda2 w||`.
///
/// Off the support the best `z_j` is `clip(-g_j / lambda1, -1, 1)`, leaving a
/// residual `max(0, |g_j| - lambda1)`. For fixed `lambda1` the optimal `lambda2`
/// is a clipped least-squares coefficient; the reduced objective is convex in
/// `lambda1` and minimized by golden-section search. A multiplier whose
/// constraint is inactive is fixed at zero.
pub fn recover_multipliers(
    g: &[f64],
    w: &[f64],
    active: ActiveSet,
) -> (f64, f64, Vec<f64>, f64) {
    let d = w.len();
    let wmax = linalg::norm_inf(w);
    let on: Vec<bool> = w.iter().map(|x| x.abs() > 1e-12 * wmax.max(1e-300)).collect();
    let sgn: Vec<f64> = (0..d).map(|i| if on[i] { w[i].signum() } else { 0.0 }).collect();
    let ww: f64 = dot(w, w);

    let lambda2_for = |l1: f64| -> f64 {
        if !active.l2 || ww == 0.0 {
            return 0.0;
        }
        let proj: f64 = (0..d).filter(|&i| on[i]).map(|i| (g[i] + l1 * sgn[i]) * w[i]).sum();
        (-proj / ww).max(0.0)
    };
    let objective = |l1: f64| -> f64 {
        let l2 = lambda2_for(l1);
        (0..d)
            .map(|i| {
                if on[i] {
                    let r = g[i] + l1 * sgn[i] + l2 * w[i];
                    r * r
                } else {
                    let r = (g[i].abs() - l1).max(0.0);
                    r * r
                }
            })
            .sum()
    };

    let l1 = if active.l1 {
        let mut lo = 0.0;
        let mut hi = linalg::norm1(g).max(linalg::norm_inf(g)) + 1.0;
        let phi = 0.5 * (5f64.sqrt() - 1.0);
        let mut m1 = hi - phi * (hi - lo);
        let mut m2 = lo + phi * (hi - lo);
        let (mut f1, mut f2) = (objective(m1), objective(m2));
        for _ in 0..200 {
            if f1 <= f2 {
                hi = m2;
                m2 = m1;
                f2 = f1;
                m1 = hi - phi * (hi - lo);
                f1 = objective(m1);
            } else {
                lo = m1;
                m1 = m2;
                f1 = f2;
                m2 = lo + phi * (hi - lo);
                f2 = objective(m2);
            }
            if hi - lo <= 1e-15 * hi.max(1.0) {
                break;
            }
        }
        let mid = 0.5 * (lo + hi);
        if objective(0.0) <= objective(mid) {
            0.0
        } else {
            mid
        }
    } else {
        0.0
    };
    let l2 = lambda2_for(l1);
    let z: Vec<f64> = (0..d)
        .map(|i| {
            if on[i] {
                sgn[i]
            } else if l1 > 0.0 {
                (-g[i] / l1).clamp(-1.0, 1.0)
            } else {
                0.0
            }
        })
        .collect();
    let residual = objective(l1).sqrt();
    (l1, l2, z, residual)
}

/// Builds the diagnostics record from a subgradient at `w`.
pub fn kkt_diagnostics(
    g: &[f64],
    w: &[f64],
    s: usize,
    active_tol: f64,
    stationarity_residual: f64,
) -> KktDiagnostics {
    let active = active_set(w, s, active_tol);
    let (lambda1, lambda2, z_hat, kkt_residual) = recover_multipliers(g, w, active);
    let denom = (s as f64).sqrt() * lambda1 + lambda2;
    let kappa = if denom > 0.0 {
        (0..w.len()).map(|i| (lambda1 * z_hat[i] + lambda2 * w[i]) / denom).collect()
    } else {
        vec![0.0; w.len()]
    };
    KktDiagnostics {
        stationarity_residual,
        lambda1,
        lambda2,
        z_hat,
        kappa,
        kkt_residual,
        active,
        g: g.to_vec(),
        w_prime: None,
        g_dot_wprime: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn exact_multipliers_recovered() {
        // w on both boundaries for s = 2: w = (1/sqrt2, 1/sqrt2, 0, 0)
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let w = [h, h, 0.0, 0.0];
        let z = [1.0, 1.0, 0.3, -0.5];
        let (l1, l2) = (0.7, 1.3);
        let g: Vec<f64> = (0..4).map(|i| -(l1 * z[i] + l2 * w[i])).collect();
        let act = active_set(&w, 2, 1e-9);
        assert!(act.l1 && act.l2);
        // On the support sign(w) and w are parallel, so only l1 + l2/sqrt2 is
        // identified there; the off-support entries pin l1.
        let (r1, r2, zh, res) = recover_multipliers(&g, &w, act);
        assert!(res < 1e-9, "{res}");
        assert_abs_diff_eq!(r1 + r2 * h, l1 + l2 * h, epsilon = 1e-9);
        assert!(r1 >= 0.35 - 1e-9);
        assert!(zh.iter().all(|v| v.abs() <= 1.0));
    }

    #[test]
    fn inactive_constraints_force_zero() {
        let w = [0.1, 0.0];
        let g = [0.3, -0.2];
        let act = active_set(&w, 1, 1e-9);
        assert!(!act.any());
        let (l1, l2, _, res) = recover_multipliers(&g, &w, act);
        assert_eq!((l1, l2), (0.0, 0.0));
        assert_abs_diff_eq!(res, (0.09f64 + 0.04).sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn w_prime_orthogonal_at_exact_kkt() {
        let w = [0.6, 0.8, 0.0];
        let (l1, l2) = (0.0, 2.0);
        let g: Vec<f64> = w.iter().map(|x| -l2 * x).collect();
        let _ = l1;
        let mut k = kkt_diagnostics(&g, &w, 3, 1e-9, 0.0);
        k.attach_w_star(&w, &[0.0, 0.0, 1.0]);
        assert!(k.g_dot_wprime.unwrap().abs() < 1e-12);
        assert_abs_diff_eq!(k.lambda2, 2.0, epsilon = 1e-12);
    }
}
