//! Small dense vector helpers and a thin wrapper over the symmetric
//! eigendecomposition.

use faer::{Mat, Side};

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm2(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

#[inline]
pub fn norm1(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

#[inline]
pub fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// `y += alpha * x`
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn scale(v: &[f64], alpha: f64) -> Vec<f64> {
    v.iter().map(|x| x * alpha).collect()
}

/// Number of entries with magnitude above `tol`.
pub fn support_size(v: &[f64], tol: f64) -> usize {
    v.iter().filter(|x| x.abs() > tol).count()
}

pub fn first_non_finite(v: &[f64]) -> Option<usize> {
    v.iter().position(|x| !x.is_finite())
}

/// Eigenvalues in nondecreasing order together with orthonormal eigenvectors
/// stored column-wise.
pub struct SymEigen {
    pub values: Vec<f64>,
    pub vectors: Mat<f64>,
}

/// Eigendecomposition of a symmetric matrix. Only the lower triangle is read.
pub fn sym_eigen(a: &Mat<f64>) -> SymEigen {
    let evd = a
        .self_adjoint_eigen(Side::Lower)
        .expect("symmetric eigendecomposition failed to converge");
    let values = evd.S().column_vector().iter().copied().collect();
    SymEigen {
        values,
        vectors: evd.U().to_owned(),
    }
}

pub fn sym_eigenvalues(a: &Mat<f64>) -> Vec<f64> {
    a.self_adjoint_eigenvalues(Side::Lower)
        .expect("symmetric eigendecomposition failed to converge")
}

/// Largest eigenvalue of a symmetric matrix.
pub fn lambda_max(a: &Mat<f64>) -> f64 {
    sym_eigenvalues(a).last().copied().unwrap_or(0.0)
}

/// `sum_k weights[k] * v_k v_k^T` over the selected eigenvector columns.
pub fn reconstruct(vectors: &Mat<f64>, cols: &[(usize, f64)]) -> Mat<f64> {
    let d = vectors.nrows();
    let mut out = Mat::<f64>::zeros(d, d);
    for &(k, w) in cols {
        let col = vectors.col(k);
        for j in 0..d {
            let cj = w * col[j];
            if cj == 0.0 {
                continue;
            }
            for i in j..d {
                out[(i, j)] += col[i] * cj;
            }
        }
    }
    for j in 0..d {
        for i in (j + 1)..d {
            out[(j, i)] = out[(i, j)];
        }
    }
    out
}

pub fn frobenius_dist(a: &Mat<f64>, b: &Mat<f64>) -> f64 {
    let mut acc = 0.0;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            let t = a[(i, j)] - b[(i, j)];
            acc += t * t;
        }
    }
    acc.sqrt()
}

/// Frobenius inner product `<A, B>`.
pub fn frobenius_dot(a: &Mat<f64>, b: &Mat<f64>) -> f64 {
    let mut acc = 0.0;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            acc += a[(i, j)] * b[(i, j)];
        }
    }
    acc
}

/// Entrywise L1 norm.
pub fn entrywise_l1(a: &Mat<f64>) -> f64 {
    let mut acc = 0.0;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            acc += a[(i, j)].abs();
        }
    }
    acc
}

pub fn entrywise_max_abs(a: &Mat<f64>) -> f64 {
    let mut m: f64 = 0.0;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            m = m.max(a[(i, j)].abs());
        }
    }
    m
}

pub fn max_asymmetry(a: &Mat<f64>) -> f64 {
    let mut m: f64 = 0.0;
    for j in 0..a.ncols() {
        for i in (j + 1)..a.nrows() {
            m = m.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    m
}

/// `x^T H x`
pub fn quad_form(h: &Mat<f64>, x: &[f64]) -> f64 {
    let d = x.len();
    let mut acc = 0.0;
    for j in 0..d {
        let xj = x[j];
        if xj == 0.0 {
            continue;
        }
        let col = h.col(j);
        let mut inner = 0.0;
        for i in 0..d {
            inner += col[i] * x[i];
        }
        acc += inner * xj;
    }
    acc
}

pub fn outer(w: &[f64]) -> Mat<f64> {
    let d = w.len();
    Mat::from_fn(d, d, |i, j| w[i] * w[j])
}
