//! Independent reference implementations used by the integration tests.
//! None of them share code with the library projections.

#![allow(dead_code)]

use faer::Mat;
use halfspace_core::linalg::sym_eigen;

fn l1(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// All nonempty subsets of `0..d` as bit masks.
fn subsets(d: usize) -> impl Iterator<Item = Vec<usize>> {
    (1u32..(1 << d)).map(move |m| (0..d).filter(|&i| m & (1 << i) != 0).collect())
}

/// L1-ball projection by enumerating the support of the solution. On
/// support `S` the KKT conditions force `x_i = sign(v_i)(|v_i| - t)` with a
/// single `t` fixed by `sum_S |v_i| - |S| t = radius`; the candidate is valid
/// when `t >= 0`, every kept magnitude exceeds `t` and every dropped one
/// does not.
pub fn l1_ball_oracle(v: &[f64], radius: f64) -> Vec<f64> {
    if l1(v) <= radius {
        return v.to_vec();
    }
    let d = v.len();
    for sup in subsets(d) {
        let sum: f64 = sup.iter().map(|&i| v[i].abs()).sum();
        let t = (sum - radius) / sup.len() as f64;
        if t < 0.0 {
            continue;
        }
        let kept_ok = sup.iter().all(|&i| v[i].abs() >= t);
        let dropped_ok = (0..d).filter(|i| !sup.contains(i)).all(|i| v[i].abs() <= t + 1e-15);
        if kept_ok && dropped_ok {
            let mut x = vec![0.0; d];
            for &i in &sup {
                x[i] = (v[i].abs() - t).copysign(v[i]);
            }
            return x;
        }
    }
    unreachable!("some support always satisfies the KKT conditions")
}

/// Projection onto `{||w||_2 <= 1, ||w||_1 <= sqrt(s)}` by active-set
/// enumeration. Candidates: `v` itself, the single-ball projections, and for
/// each support the point with both constraints tight,
/// `x_S = (v_S - l sign(v_S)) / (1 + m)`, whose multiplier `l` solves a
/// quadratic. The projection is the feasible candidate closest to `v`.
pub fn w_projection_oracle(v: &[f64], s: usize) -> Vec<f64> {
    let r1 = (s as f64).sqrt();
    let feasible = |x: &[f64]| l2(x) <= 1.0 + 1e-12 && l1(x) <= r1 + 1e-12;
    let mut cands: Vec<Vec<f64>> = vec![v.to_vec()];
    let n = l2(v);
    if n > 0.0 {
        cands.push(v.iter().map(|x| x / n.max(1.0)).collect());
    }
    cands.push(l1_ball_oracle(v, r1));
    let d = v.len();
    for sup in subsets(d) {
        let m = sup.len() as f64;
        let a: f64 = sup.iter().map(|&i| v[i].abs()).sum();
        let b: f64 = sup.iter().map(|&i| v[i] * v[i]).sum();
        // ||x||_1 = (a - l m)/(1 + mu) = r1 and ||x||_2^2 = (b - 2 l a + l^2 m)/(1 + mu)^2 = 1
        // eliminate mu: s (b - 2 l a + l^2 m) = (a - l m)^2
        let sf = s as f64;
        let qa = sf * m - m * m;
        let qb = -2.0 * sf * a + 2.0 * a * m;
        let qc = sf * b - a * a;
        let mut roots = Vec::new();
        if qa.abs() < 1e-14 {
            if qb.abs() > 1e-14 {
                roots.push(-qc / qb);
            }
        } else {
            let disc = qb * qb - 4.0 * qa * qc;
            if disc >= 0.0 {
                let sq = disc.sqrt();
                roots.push((-qb + sq) / (2.0 * qa));
                roots.push((-qb - sq) / (2.0 * qa));
            }
        }
        for l in roots {
            if l < 0.0 {
                continue;
            }
            let mu = (a - l * m) / r1 - 1.0;
            if mu < 0.0 {
                continue;
            }
            let kept_ok = sup.iter().all(|&i| v[i].abs() >= l);
            let dropped_ok = (0..d).filter(|i| !sup.contains(i)).all(|i| v[i].abs() <= l + 1e-12);
            if !(kept_ok && dropped_ok) {
                continue;
            }
            let mut x = vec![0.0; d];
            for &i in &sup {
                x[i] = (v[i].abs() - l).copysign(v[i]) / (1.0 + mu);
            }
            cands.push(x);
        }
    }
    cands
        .into_iter()
        .filter(|x| feasible(x))
        .min_by(|x, y| dist(x, v).total_cmp(&dist(y, v)))
        .expect("at least one candidate is feasible")
}

/// Support function of `W` through its dual: the support function of an
/// intersection is the infimal convolution of the two support functions,
/// which here reduces to `min_{l >= 0} l sqrt(s) + ||ST_l(v)||_2`. The
/// objective is convex in `l`, so golden-section search finds the minimum.
pub fn w_support_oracle(v: &[f64], s: usize) -> f64 {
    let r1 = (s as f64).sqrt();
    let f = |l: f64| {
        let st: f64 = v.iter().map(|x| (x.abs() - l).max(0.0).powi(2)).sum();
        l * r1 + st.sqrt()
    };
    let (mut lo, mut hi) = (0.0, v.iter().fold(0.0f64, |m, x| m.max(x.abs())));
    let g = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..300 {
        let a = hi - g * (hi - lo);
        let b = lo + g * (hi - lo);
        if f(a) <= f(b) {
            hi = b;
        } else {
            lo = a;
        }
    }
    f(0.5 * (lo + hi)).min(f(0.0))
}

fn from_eigen(vectors: &Mat<f64>, values: &[f64]) -> Mat<f64> {
    let d = values.len();
    Mat::from_fn(d, d, |i, j| (0..d).map(|k| values[k] * vectors[(i, k)] * vectors[(j, k)]).sum())
}

fn psd_cone(a: &Mat<f64>) -> Mat<f64> {
    let e = sym_eigen(a);
    let vals: Vec<f64> = e.values.iter().map(|x| x.max(0.0)).collect();
    from_eigen(&e.vectors, &vals)
}

/// Threshold `t` with `sum max(|x| - t, 0) = radius`, by bisection.
fn bisect_threshold(mags: &[f64], radius: f64) -> f64 {
    let (mut lo, mut hi) = (0.0, mags.iter().fold(0.0f64, |m, x| m.max(*x)));
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let total: f64 = mags.iter().map(|x| (x - mid).max(0.0)).sum();
        if total > radius {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn nuclear_ball(a: &Mat<f64>) -> Mat<f64> {
    let e = sym_eigen(a);
    if l1(&e.values) <= 1.0 {
        return a.clone();
    }
    let mags: Vec<f64> = e.values.iter().map(|x| x.abs()).collect();
    let t = bisect_threshold(&mags, 1.0);
    let vals: Vec<f64> = e.values.iter().map(|x| (x.abs() - t).max(0.0).copysign(*x)).collect();
    from_eigen(&e.vectors, &vals)
}

fn entrywise_ball(a: &Mat<f64>, radius: f64) -> Mat<f64> {
    let d = a.nrows();
    let mags: Vec<f64> = (0..d * d).map(|k| a[(k % d, k / d)].abs()).collect();
    if mags.iter().sum::<f64>() <= radius {
        return a.clone();
    }
    let t = bisect_threshold(&mags, radius);
    Mat::from_fn(d, d, |i, j| (a[(i, j)].abs() - t).max(0.0).copysign(a[(i, j)]))
}

/// Projection onto `M` by cyclic Dykstra over the three sets separately
/// (PSD cone, nuclear ball, entrywise L1 ball), run for a long horizon.
pub fn m_projection_oracle(a: &Mat<f64>, s: usize, iters: usize) -> Mat<f64> {
    let d = a.nrows();
    let mut x = a.clone();
    let mut incs = [Mat::<f64>::zeros(d, d), Mat::<f64>::zeros(d, d), Mat::<f64>::zeros(d, d)];
    for _ in 0..iters {
        let prev = x.clone();
        for (k, inc) in incs.iter_mut().enumerate() {
            let y = &x + &*inc;
            let p = match k {
                0 => psd_cone(&y),
                1 => nuclear_ball(&y),
                _ => entrywise_ball(&y, s as f64),
            };
            *inc = &y - &p;
            x = p;
        }
        let change = (&x - &prev).norm_l2();
        if change < 1e-14 {
            break;
        }
    }
    x
}

/// Maps a near-member of `M` to an exact member: eigenvalues clipped at 0
/// and capped to sum 1, then the whole matrix scaled into the L1 ball.
pub fn repair_into_m(h: &Mat<f64>, s: usize) -> Mat<f64> {
    let e = sym_eigen(h);
    let pos: Vec<f64> = e.values.iter().map(|x| x.max(0.0)).collect();
    let vals = if pos.iter().sum::<f64>() <= 1.0 {
        pos
    } else {
        let t = bisect_threshold(&pos, 1.0);
        // bisection leaves the sum a hair above 1 at worst; rescale exactly
        let v: Vec<f64> = pos.iter().map(|x| (x - t).max(0.0)).collect();
        let total: f64 = v.iter().sum();
        v.iter().map(|x| x / total.max(1.0)).collect()
    };
    let m = from_eigen(&e.vectors, &vals);
    let d = m.nrows();
    let l1: f64 = (0..d * d).map(|k| m[(k % d, k / d)].abs()).sum();
    if l1 <= s as f64 {
        m
    } else {
        m * (s as f64 / l1)
    }
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn mat_max_abs_diff(a: &Mat<f64>, b: &Mat<f64>) -> f64 {
    let mut m = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            m = m.max((a[(i, j)] - b[(i, j)]).abs());
        }
    }
    m
}
