//! Small linear solvers: the tridiagonal Thomas sweep and dense Gaussian
//! elimination for regression normal equations.

use alloc::vec::Vec;

/// Solves `a[i] u[i-1] + b[i] u[i] + c[i] u[i+1] = d[i]` in place of `d`.
/// `a[0]` and `c[n-1]` are ignored. `scratch` must hold `n` values.
///
/// Returns `false` on a zero pivot.
pub fn thomas(a: &[f64], b: &[f64], c: &[f64], d: &mut [f64], scratch: &mut [f64]) -> bool {
    let n = d.len();
    debug_assert!(a.len() >= n && b.len() >= n && c.len() >= n && scratch.len() >= n);
    if n == 0 {
        return true;
    }
    let mut beta = b[0];
    if beta == 0.0 {
        return false;
    }
    d[0] /= beta;
    for i in 1..n {
        scratch[i] = c[i - 1] / beta;
        beta = b[i] - a[i] * scratch[i];
        if beta == 0.0 {
            return false;
        }
        d[i] = (d[i] - a[i] * d[i - 1]) / beta;
    }
    for i in (0..n - 1).rev() {
        d[i] -= scratch[i + 1] * d[i + 1];
    }
    true
}

/// Solves the dense `n x n` system `m x = rhs` (row-major `m`) by Gaussian
/// elimination with partial pivoting. Returns `None` when a pivot falls
/// below `tol` times the largest absolute entry.
pub fn solve_dense(m: &[f64], rhs: &[f64], n: usize, tol: f64) -> Option<Vec<f64>> {
    let mut a: Vec<f64> = m.to_vec();
    let mut b: Vec<f64> = rhs.to_vec();
    let scale = a.iter().fold(0.0f64, |s, v| s.max(libm::fabs(*v)));
    if scale == 0.0 {
        return None;
    }
    for k in 0..n {
        let mut piv = k;
        for i in k + 1..n {
            if libm::fabs(a[i * n + k]) > libm::fabs(a[piv * n + k]) {
                piv = i;
            }
        }
        if libm::fabs(a[piv * n + k]) <= tol * scale {
            return None;
        }
        if piv != k {
            for j in 0..n {
                a.swap(k * n + j, piv * n + j);
            }
            b.swap(k, piv);
        }
        let p = a[k * n + k];
        for i in k + 1..n {
            let f = a[i * n + k] / p;
            if f == 0.0 {
                continue;
            }
            for j in k..n {
                a[i * n + j] -= f * a[k * n + j];
            }
            b[i] -= f * b[k];
        }
    }
    let mut x = alloc::vec![0.0; n];
    for k in (0..n).rev() {
        let mut s = b[k];
        for j in k + 1..n {
            s -= a[k * n + j] * x[j];
        }
        x[k] = s / a[k * n + k];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thomas_matches_dense() {
        let n = 6;
        let a: Vec<f64> = (0..n).map(|i| -1.0 - 0.1 * i as f64).collect();
        let b: Vec<f64> = (0..n).map(|i| 4.0 + i as f64).collect();
        let c: Vec<f64> = (0..n).map(|i| -0.5 + 0.05 * i as f64).collect();
        let rhs: Vec<f64> = (0..n).map(|i| (i as f64).sin() + 1.0).collect();
        let mut m = alloc::vec![0.0; n * n];
        for i in 0..n {
            m[i * n + i] = b[i];
            if i > 0 {
                m[i * n + i - 1] = a[i];
            }
            if i + 1 < n {
                m[i * n + i + 1] = c[i];
            }
        }
        let dense = solve_dense(&m, &rhs, n, 1e-14).unwrap();
        let mut d = rhs.clone();
        let mut s = alloc::vec![0.0; n];
        assert!(thomas(&a, &b, &c, &mut d, &mut s));
        for i in 0..n {
            assert!((d[i] - dense[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn singular_dense_is_rejected() {
        let m = [1.0, 2.0, 2.0, 4.0];
        assert!(solve_dense(&m, &[1.0, 2.0], 2, 1e-12).is_none());
    }
}
