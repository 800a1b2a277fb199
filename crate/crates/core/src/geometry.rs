//! Projection and support-function primitives for the two constraint sets
//! used throughout the crate:
//!
//! * `W = { w : ||w||_2 <= 1, ||w||_1 <= sqrt(s) }`, the convex hull
//!   relaxation of s-sparse unit vectors;
//! * `M = { H : H PSD, ||H||_1 <= s, ||H||_* <= 1 }`, its semidefinite
//!   counterpart (entrywise L1, nuclear norm).
//!
//! `W` is projected with Dykstra's algorithm (or its exact threshold form),
//! `M` by accelerated gradient on the dual of its entrywise L1 constraint.
//! Plain alternating projection converges to *a* point of the intersection
//! but not the nearest one, so it is not used here.

use faer::Mat;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{self, dist2, first_non_finite, norm1, norm2};

/// Default stopping tolerance for vector projections.
pub const VECTOR_TOL: f64 = 1e-8;
/// Default stopping tolerance for matrix projections.
pub const MATRIX_TOL: f64 = 1e-6;

const VECTOR_MAX_ITER: usize = 100_000;
const MATRIX_MAX_ITER: usize = 5_000;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("non-finite input component at index {0}")]
    NonFinite(usize),
    #[error("radius must be positive and finite, got {0}")]
    BadRadius(f64),
    #[error("sparsity budget must be at least 1")]
    ZeroSparsity,
    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("matrix must be square, got {0}x{1}")]
    NotSquare(usize, usize),
    #[error("projection onto W did not converge in {iterations} iterations (residual {residual:e})")]
    VectorNonConvergence {
        iterations: usize,
        residual: f64,
        last: Vec<f64>,
    },
    #[error("projection onto M did not converge in {iterations} iterations ({residuals})")]
    MatrixNonConvergence {
        iterations: usize,
        residuals: MatrixResiduals,
        last: Box<Mat<f64>>,
    },
}

fn check_finite(v: &[f64]) -> Result<(), GeometryError> {
    match first_non_finite(v) {
        Some(i) => Err(GeometryError::NonFinite(i)),
        None => Ok(()),
    }
}

fn check_radius(radius: f64) -> Result<(), GeometryError> {
    if radius > 0.0 && radius.is_finite() {
        Ok(())
    } else {
        Err(GeometryError::BadRadius(radius))
    }
}

/// Euclidean projection onto `{u : ||u||_2 <= radius}`.
pub fn project_l2_ball(v: &[f64], radius: f64) -> Result<Vec<f64>, GeometryError> {
    check_finite(v)?;
    check_radius(radius)?;
    Ok(l2_ball(v, radius))
}

fn l2_ball(v: &[f64], radius: f64) -> Vec<f64> {
    let n = norm2(v);
    if n <= radius {
        v.to_vec()
    } else {
        linalg::scale(v, radius / n)
    }
}

/// Componentwise soft-thresholding. Entries with `|v_i| <= lambda` map to 0.
pub fn soft_threshold(v: &[f64], lambda: f64) -> Vec<f64> {
    v.iter().map(|&x| shrink(x, lambda)).collect()
}

#[inline]
fn shrink(x: f64, lambda: f64) -> f64 {
    let a = x.abs() - lambda;
    if a > 0.0 {
        a.copysign(x)
    } else {
        0.0
    }
}

/// Threshold `theta >= 0` such that `sum max(a_i - theta, 0) = radius` for the
/// nonnegative magnitudes `a`. Caller guarantees `sum a > radius`.
fn simplex_threshold(mut mags: Vec<f64>, radius: f64) -> f64 {
    mags.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (j, &u) in mags.iter().enumerate() {
        cum += u;
        let t = (cum - radius) / (j + 1) as f64;
        if u > t {
            theta = t;
        } else {
            break;
        }
    }
    theta.max(0.0)
}

/// Euclidean projection onto `{u : ||u||_1 <= radius}` by sort-and-threshold.
pub fn project_l1_ball(v: &[f64], radius: f64) -> Result<Vec<f64>, GeometryError> {
    check_finite(v)?;
    check_radius(radius)?;
    Ok(l1_ball(v, radius))
}

fn l1_ball(v: &[f64], radius: f64) -> Vec<f64> {
    if norm1(v) <= radius {
        return v.to_vec();
    }
    let theta = simplex_threshold(v.iter().map(|x| x.abs()).collect(), radius);
    soft_threshold(v, theta)
}

/// The vector constraint set `W` for sparsity budget `s`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstraintW {
    s: usize,
}

impl ConstraintW {
    pub fn new(s: usize) -> Result<Self, GeometryError> {
        if s == 0 {
            return Err(GeometryError::ZeroSparsity);
        }
        Ok(Self { s })
    }

    pub fn s(&self) -> usize {
        self.s
    }

    pub fn l1_radius(&self) -> f64 {
        (self.s as f64).sqrt()
    }

    pub fn contains(&self, w: &[f64], feas_tol: f64) -> bool {
        norm2(w) <= 1.0 + feas_tol && norm1(w) <= self.l1_radius() + feas_tol
    }

    /// Euclidean projection onto `W` (Dykstra between the two balls).
    pub fn project(&self, v: &[f64], tol: f64) -> Result<Vec<f64>, GeometryError> {
        self.project_with(v, tol, VECTOR_MAX_ITER)
    }

    pub fn project_with(
        &self,
        v: &[f64],
        tol: f64,
        max_iter: usize,
    ) -> Result<Vec<f64>, GeometryError> {
        check_finite(v)?;
        let r1 = self.l1_radius();
        if self.contains(v, 0.0) {
            return Ok(v.to_vec());
        }
        // If projecting onto one ball lands inside the other, that point is
        // already the projection onto the intersection.
        let p2 = l2_ball(v, 1.0);
        if norm1(&p2) <= r1 {
            return Ok(p2);
        }
        let p1 = l1_ball(v, r1);
        if norm2(&p1) <= 1.0 {
            return Ok(p1);
        }

        let d = v.len();
        let mut x = v.to_vec();
        let mut p = vec![0.0; d];
        let mut q = vec![0.0; d];
        let mut buf = vec![0.0; d];
        let mut residual = f64::NAN;
        for _ in 0..max_iter {
            for i in 0..d {
                buf[i] = x[i] + p[i];
            }
            let y = l2_ball(&buf, 1.0);
            for i in 0..d {
                p[i] = buf[i] - y[i];
                buf[i] = y[i] + q[i];
            }
            let x_new = l1_ball(&buf, r1);
            for i in 0..d {
                q[i] = buf[i] - x_new[i];
            }
            let step = dist2(&x_new, &x);
            let gap = dist2(&x_new, &y);
            residual = step.max(gap);
            x = x_new;
            if residual < tol {
                return Ok(x);
            }
        }
        Err(GeometryError::VectorNonConvergence {
            iterations: max_iter,
            residual,
            last: x,
        })
    }

    /// Euclidean projection onto `W` through its threshold form: the
    /// projection is `ST(v, l) / max(1, ||ST(v, l)||_2)` for the smallest
    /// `l >= 0` whose L1 norm fits the budget, and that L1 norm is
    /// non-increasing in `l`, so `l` is found by bisection. Agrees with
    /// [`ConstraintW::project`] without its iteration cost.
    pub fn project_threshold(&self, v: &[f64]) -> Result<Vec<f64>, GeometryError> {
        check_finite(v)?;
        let r1 = self.l1_radius();
        let at = |lambda: f64| {
            let st = soft_threshold(v, lambda);
            let n = norm2(&st);
            if n > 1.0 {
                linalg::scale(&st, 1.0 / n)
            } else {
                st
            }
        };
        let p0 = at(0.0);
        if norm1(&p0) <= r1 {
            return Ok(p0);
        }
        let (mut lo, mut hi) = (0.0, linalg::norm_inf(v));
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if norm1(&at(mid)) <= r1 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(at(hi))
    }

    /// `max_{w in W} <v, w>` and a maximizer.
    pub fn support(&self, v: &[f64]) -> Support {
        support_impl(v, self.l1_radius(), self.s)
    }
}

/// Value and maximizer of the support function of `W`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Support {
    pub value: f64,
    pub argmax: Vec<f64>,
}

fn l1_over_l2(v: &[f64], lambda: f64) -> f64 {
    let (mut a, mut b) = (0.0, 0.0);
    for &x in v {
        let t = shrink(x, lambda);
        a += t.abs();
        b += t * t;
    }
    if b == 0.0 {
        0.0
    } else {
        a / b.sqrt()
    }
}

fn support_impl(v: &[f64], r1: f64, s: usize) -> Support {
    let d = v.len();
    let top = linalg::norm_inf(v);
    if top == 0.0 {
        return Support {
            value: 0.0,
            argmax: vec![0.0; d],
        };
    }
    let normalized = |lambda: f64| {
        let st = soft_threshold(v, lambda);
        let n = norm2(&st);
        linalg::scale(&st, 1.0 / n)
    };

    let argmax = if l1_over_l2(v, 0.0) <= r1 {
        normalized(0.0)
    } else {
        let ties = v.iter().filter(|x| x.abs() == top).count();
        if ties > s {
            // More maximal coordinates than the budget: the L2 constraint is
            // slack and the optimum spreads the L1 budget over the ties.
            let share = r1 / ties as f64;
            v.iter()
                .map(|&x| if x.abs() == top { share.copysign(x) } else { 0.0 })
                .collect()
        } else {
            // Ratio ||ST||_1 / ||ST||_2 is continuous and non-increasing in
            // lambda; at the second-largest magnitude only the ties survive.
            let mut hi = v
                .iter()
                .map(|x| x.abs())
                .filter(|&a| a < top)
                .fold(0.0, f64::max);
            let mut lo = 0.0;
            if l1_over_l2(v, hi) <= r1 {
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if mid <= lo || mid >= hi {
                        break;
                    }
                    if l1_over_l2(v, mid) <= r1 {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
            } else {
                hi = top * (1.0 - f64::EPSILON);
            }
            normalized(hi)
        }
    };
    Support {
        value: linalg::dot(v, &argmax),
        argmax,
    }
}

/// Euclidean projection onto `W` with sparsity budget `s`.
pub fn project_w(v: &[f64], s: usize, tol: f64) -> Result<Vec<f64>, GeometryError> {
    ConstraintW::new(s)?.project(v, tol)
}

/// Support function of `W`: `max_{w in W} <v, w>` with its maximizer.
pub fn support_w(v: &[f64], s: usize) -> Result<Support, GeometryError> {
    check_finite(v)?;
    Ok(ConstraintW::new(s)?.support(v))
}

/// Per-set infeasibility of a symmetric matrix with respect to `M`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatrixResiduals {
    /// `max(0, -lambda_min)`
    pub psd: f64,
    /// `max(0, ||H||_1 - s)`
    pub l1: f64,
    /// `max(0, ||H||_* - 1)`
    pub nuclear: f64,
}

impl MatrixResiduals {
    pub fn max(&self) -> f64 {
        self.psd.max(self.l1).max(self.nuclear)
    }
}

impl std::fmt::Display for MatrixResiduals {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "psd {:.3e}, l1 {:.3e}, nuclear {:.3e}",
            self.psd, self.l1, self.nuclear
        )
    }
}

/// The matrix constraint set `M` for sparsity budget `s`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstraintM {
    s: usize,
}

impl ConstraintM {
    pub fn new(s: usize) -> Result<Self, GeometryError> {
        if s == 0 {
            return Err(GeometryError::ZeroSparsity);
        }
        Ok(Self { s })
    }

    pub fn s(&self) -> usize {
        self.s
    }

    pub fn residuals(&self, h: &Mat<f64>) -> MatrixResiduals {
        let eig = linalg::sym_eigenvalues(h);
        let lmin = eig.first().copied().unwrap_or(0.0);
        MatrixResiduals {
            psd: (-lmin).max(0.0),
            l1: (linalg::entrywise_l1(h) - self.s as f64).max(0.0),
            nuclear: (eig.iter().map(|x| x.abs()).sum::<f64>() - 1.0).max(0.0),
        }
    }

    pub fn contains(&self, h: &Mat<f64>, feas_tol: f64) -> bool {
        h.nrows() == h.ncols()
            && linalg::max_asymmetry(h) <= feas_tol
            && self.residuals(h).max() <= feas_tol
    }

    pub fn project(&self, a: &Mat<f64>, tol: f64) -> Result<Mat<f64>, GeometryError> {
        self.project_with(a, tol, MATRIX_MAX_ITER)
    }

    /// Projection onto `M`.
    ///
    /// The PSD cone and the nuclear ball are handled together: their
    /// intersection is the spectral set `{lambda >= 0, sum lambda <= 1}`,
    /// whose projection is exact through one eigendecomposition. The
    /// remaining entrywise L1 constraint is dualized: with `X(Y) =
    /// P_spec(A - Y)` the dual is smooth with a 1-Lipschitz gradient, and
    /// accelerated proximal gradient with adaptive restart runs on `Y`.
    ///
    /// Stops once `X` moves less than `tol` and lies within `tol` of the L1
    /// ball; the returned point is `X` scaled into the ball, so it is in `M`
    /// exactly.
    pub fn project_with(
        &self,
        a: &Mat<f64>,
        tol: f64,
        max_iter: usize,
    ) -> Result<Mat<f64>, GeometryError> {
        validate_symmetric(a)?;
        let a = symmetrize(a);
        let s = self.s as f64;

        let spec = spectral_project(&a);
        if spec.l1_norm <= s {
            return Ok(spec.matrix);
        }
        if spec.input_feasible {
            // Spectrally feasible but outside the L1 ball: try the L1 step alone.
            let p1 = entrywise_l1_ball(&a, s);
            if spectral_project(&p1).input_feasible {
                return Ok(p1);
            }
        }

        let d = a.nrows();
        let mut y = Mat::<f64>::zeros(d, d);
        let mut w = y.clone();
        let mut t = 1.0f64;
        let mut x_prev = spec.matrix;
        for _ in 0..max_iter {
            let x = spectral_project(&(&a - &w)).matrix;
            let v = &w + &x;
            let y_new = &v - &entrywise_l1_ball(&v, s);
            let step = linalg::frobenius_dist(&x, &x_prev);
            let infeasible = linalg::frobenius_dist(&x, &entrywise_l1_ball(&x, s));
            if step < tol && infeasible < tol {
                return Ok(scale_into_l1_ball(x, s));
            }
            // restart when the step opposes the momentum direction
            let reverses = linalg::frobenius_dot(&(&w - &y_new), &(&y_new - &y)) > 0.0;
            if reverses {
                t = 1.0;
                w = y_new.clone();
            } else {
                let t_new = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
                w = &y_new + (&y_new - &y) * ((t - 1.0) / t_new);
                t = t_new;
            }
            y = y_new;
            x_prev = x;
        }
        let last = scale_into_l1_ball(x_prev, s);
        Err(GeometryError::MatrixNonConvergence {
            iterations: max_iter,
            residuals: self.residuals(&last),
            last: Box::new(last),
        })
    }
}

fn scale_into_l1_ball(x: Mat<f64>, radius: f64) -> Mat<f64> {
    let l1 = linalg::entrywise_l1(&x);
    if l1 <= radius {
        x
    } else {
        x * (radius / l1)
    }
}

fn validate_symmetric(a: &Mat<f64>) -> Result<(), GeometryError> {
    if a.nrows() != a.ncols() {
        return Err(GeometryError::NotSquare(a.nrows(), a.ncols()));
    }
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            if !a[(i, j)].is_finite() {
                return Err(GeometryError::NonFinite(j * a.nrows() + i));
            }
        }
    }
    let asym = linalg::max_asymmetry(a);
    let scale = linalg::entrywise_max_abs(a).max(1.0);
    if asym > 1e-9 * scale {
        return Err(GeometryError::NotSymmetric(asym));
    }
    Ok(())
}

fn symmetrize(a: &Mat<f64>) -> Mat<f64> {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| 0.5 * (a[(i, j)] + a[(j, i)]))
}

pub(crate) struct Spectral {
    pub matrix: Mat<f64>,
    pub l1_norm: f64,
    /// The input already had eigenvalues in `{lambda >= 0, sum <= 1}`.
    pub input_feasible: bool,
}

/// Projection of eigenvalues onto `{lambda >= 0, sum lambda <= 1}`.
pub(crate) fn capped_simplex(values: &[f64]) -> Vec<f64> {
    let pos: Vec<f64> = values.iter().map(|x| x.max(0.0)).collect();
    let total: f64 = pos.iter().sum();
    if total <= 1.0 {
        return pos;
    }
    let theta = simplex_threshold(pos.clone(), 1.0);
    pos.iter().map(|x| (x - theta).max(0.0)).collect()
}

/// Projection onto `{H : H PSD, ||H||_* <= 1}`.
pub(crate) fn spectral_project(a: &Mat<f64>) -> Spectral {
    let eig = linalg::sym_eigen(a);
    let lmin = eig.values.first().copied().unwrap_or(0.0);
    let total: f64 = eig.values.iter().map(|x| x.max(0.0)).sum();
    let input_feasible = lmin >= 0.0 && total <= 1.0;
    let projected = capped_simplex(&eig.values);
    let cols: Vec<(usize, f64)> = projected
        .iter()
        .copied()
        .enumerate()
        .filter(|&(_, l)| l > 0.0)
        .collect();
    let matrix = linalg::reconstruct(&eig.vectors, &cols);
    let l1_norm = linalg::entrywise_l1(&matrix);
    Spectral {
        matrix,
        l1_norm,
        input_feasible,
    }
}

/// Projection onto the entrywise L1 ball of the given radius.
pub(crate) fn entrywise_l1_ball(a: &Mat<f64>, radius: f64) -> Mat<f64> {
    let l1 = linalg::entrywise_l1(a);
    if l1 <= radius {
        return a.clone();
    }
    let mut mags = Vec::with_capacity(a.nrows() * a.ncols());
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            mags.push(a[(i, j)].abs());
        }
    }
    let theta = simplex_threshold(mags, radius);
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| shrink(a[(i, j)], theta))
}

/// Euclidean projection onto `M` with sparsity budget `s`.
pub fn project_m(a: &Mat<f64>, s: usize, tol: f64) -> Result<Mat<f64>, GeometryError> {
    ConstraintM::new(s)?.project(a, tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn assert_vec(a: &[f64], b: &[f64], tol: f64) {
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b) {
            assert_abs_diff_eq!(x, y, epsilon = tol);
        }
    }

    #[test]
    fn l2_ball_examples() {
        assert_vec(&project_l2_ball(&[0.0, 0.0], 1.0).unwrap(), &[0.0, 0.0], 0.0);
        assert_vec(&project_l2_ball(&[3.0, 4.0], 1.0).unwrap(), &[0.6, 0.8], 1e-15);
        assert_vec(&project_l2_ball(&[0.2, 0.1], 1.0).unwrap(), &[0.2, 0.1], 0.0);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(
            project_l2_ball(&[f64::NAN], 1.0),
            Err(GeometryError::NonFinite(0))
        ));
        assert!(matches!(
            project_l1_ball(&[1.0, f64::INFINITY], 1.0),
            Err(GeometryError::NonFinite(1))
        ));
        assert!(project_l1_ball(&[1.0], 0.0).is_err());
        assert!(matches!(project_w(&[1.0], 0, 1e-8), Err(GeometryError::ZeroSparsity)));
    }

    #[test]
    fn l1_ball_examples() {
        assert_vec(&project_l1_ball(&[3.0, 0.0], 1.0).unwrap(), &[1.0, 0.0], 1e-15);
        assert_vec(&project_l1_ball(&[1.0, 1.0], 1.0).unwrap(), &[0.5, 0.5], 1e-15);
        assert_vec(&project_l1_ball(&[-2.0, 1.0], 1.0).unwrap(), &[-1.0, 0.0], 1e-15);
    }

    #[test]
    fn soft_threshold_ties_go_to_zero() {
        assert_eq!(soft_threshold(&[1.0, -1.0, 2.0], 1.0), vec![0.0, 0.0, 1.0]);
    }

    #[test]
    fn project_w_examples() {
        let mut v = vec![0.0; 6];
        v[0] = 2.0;
        let mut e1 = vec![0.0; 6];
        e1[0] = 1.0;
        assert_vec(&project_w(&v, 1, VECTOR_TOL).unwrap(), &e1, 1e-12);
        let inside = [0.1, -0.2, 0.3];
        assert_eq!(project_w(&inside, 2, VECTOR_TOL).unwrap(), inside.to_vec());
    }

    #[test]
    fn project_w_reports_non_convergence() {
        let c = ConstraintW::new(2).unwrap();
        let v = [3.0, 2.0, 1.5, 1.0, 0.5];
        match c.project_with(&v, 1e-30, 1) {
            Err(GeometryError::VectorNonConvergence { iterations, last, .. }) => {
                assert_eq!(iterations, 1);
                assert_eq!(last.len(), 5);
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn support_examples() {
        let s = support_w(&[1.0, 0.0, 0.0], 1).unwrap();
        assert_abs_diff_eq!(s.value, 1.0, epsilon = 1e-15);
        assert_vec(&s.argmax, &[1.0, 0.0, 0.0], 1e-15);

        let s = support_w(&[1.0; 4], 4).unwrap();
        assert_abs_diff_eq!(s.value, 2.0, epsilon = 1e-14);
        assert_vec(&s.argmax, &[0.5; 4], 1e-14);

        let z = support_w(&[0.0; 3], 2).unwrap();
        assert_eq!(z.value, 0.0);
        assert_eq!(z.argmax, vec![0.0; 3]);
    }

    #[test]
    fn support_with_more_ties_than_budget() {
        // All four coordinates tie and s = 1: the L1 budget binds, value 1.
        let s = support_w(&[1.0; 4], 1).unwrap();
        assert_abs_diff_eq!(s.value, 1.0, epsilon = 1e-14);
        assert!(ConstraintW::new(1).unwrap().contains(&s.argmax, 1e-12));
    }

    #[test]
    fn support_argmax_is_feasible_and_tight() {
        let v = [0.9, -0.4, 0.35, 0.1, -0.05, 0.02];
        for s in 1..=6 {
            let c = ConstraintW::new(s).unwrap();
            let sup = c.support(&v);
            assert!(c.contains(&sup.argmax, 1e-12), "s={s}");
            assert_abs_diff_eq!(sup.value, linalg::dot(&v, &sup.argmax), epsilon = 1e-14);
        }
    }

    #[test]
    fn project_m_examples() {
        let mut a = Mat::<f64>::zeros(3, 3);
        a[(0, 0)] = 1.0;
        let p = project_m(&a, 1, MATRIX_TOL).unwrap();
        assert!(linalg::frobenius_dist(&p, &a) < 1e-12);

        let neg = Mat::from_fn(3, 3, |i, j| if i == j { -1.0 } else { 0.0 });
        let p = project_m(&neg, 2, MATRIX_TOL).unwrap();
        assert!(linalg::entrywise_max_abs(&p) < 1e-12);
    }

    #[test]
    fn project_m_rejects_asymmetric() {
        let a = Mat::from_fn(2, 2, |i, j| if i < j { 1.0 } else { 0.0 });
        assert!(matches!(project_m(&a, 1, MATRIX_TOL), Err(GeometryError::NotSymmetric(_))));
    }

    #[test]
    fn project_m_lands_in_m() {
        // Dense rank-one direction: nuclear projection alone violates the L1 budget.
        let d = 6;
        let a = Mat::from_fn(d, d, |_, _| 1.0);
        let m = ConstraintM::new(2).unwrap();
        let p = m.project(&a, MATRIX_TOL).unwrap();
        assert!(m.residuals(&p).max() < 1e-5, "{}", m.residuals(&p));
    }

    #[test]
    fn capped_simplex_cases() {
        assert_eq!(capped_simplex(&[-1.0, 0.25, 0.5]), vec![0.0, 0.25, 0.5]);
        let p = capped_simplex(&[2.0, 1.0, -3.0]);
        assert_vec(&p, &[1.0, 0.0, 0.0], 1e-15);
    }

    #[test]
    fn threshold_projection_matches_dykstra() {
        let w = ConstraintW::new(3).unwrap();
        for k in 0..50 {
            let v: Vec<f64> = (0..12)
                .map(|i| ((i * 7 + k * 13) as f64).sin() * (1.0 + k as f64 / 10.0))
                .collect();
            let a = w.project(&v, 1e-12).unwrap();
            let b = w.project_threshold(&v).unwrap();
            assert_vec(&a, &b, 1e-8);
        }
    }
}
