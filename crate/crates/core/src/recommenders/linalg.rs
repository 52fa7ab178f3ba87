//! Dense symmetric positive-definite solves for the ALS normal equations.

use alloc::vec::Vec;

/// Solves `a x = b` for symmetric positive-definite `a` (row-major, `n x n`)
/// by Cholesky factorisation. `a` is overwritten with its factor and `b`
/// with the solution. Returns the ratio of the largest to smallest pivot
/// squared (a cheap conditioning estimate), or `None` if `a` is not
/// positive definite.
pub(crate) fn cholesky_solve(a: &mut [f64], b: &mut [f64], n: usize) -> Option<f64> {
    debug_assert_eq!(a.len(), n * n);
    debug_assert_eq!(b.len(), n);
    let mut min_pivot = f64::INFINITY;
    let mut max_pivot = 0.0f64;
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= a[j * n + k] * a[j * n + k];
        }
        if !(d > 0.0) || !d.is_finite() {
            return None;
        }
        min_pivot = min_pivot.min(d);
        max_pivot = max_pivot.max(d);
        let d = crate::math::sqrt(d);
        a[j * n + j] = d;
        for i in (j + 1)..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = s / d;
        }
    }
    // forward: L y = b
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= a[i * n + k] * b[k];
        }
        b[i] = s / a[i * n + i];
    }
    // backward: L^T x = y
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in (i + 1)..n {
            s -= a[k * n + i] * b[k];
        }
        b[i] = s / a[i * n + i];
    }
    Some(max_pivot / min_pivot)
}

/// `X^T X` for `rows` stacked row vectors of width `d`.
pub(crate) fn gram(x: &[f64], d: usize) -> Vec<f64> {
    let mut g = alloc::vec![0.0; d * d];
    for row in x.chunks_exact(d) {
        for i in 0..d {
            let ri = row[i];
            if ri == 0.0 {
                continue;
            }
            for j in i..d {
                g[i * d + j] += ri * row[j];
            }
        }
    }
    for i in 0..d {
        for j in 0..i {
            g[i * d + j] = g[j * d + i];
        }
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_spd_system() {
        // a = [[4, 2], [2, 3]], x = [1, -1] -> b = [2, -1]
        let mut a = [4.0, 2.0, 2.0, 3.0];
        let mut b = [2.0, -1.0];
        cholesky_solve(&mut a, &mut b, 2).unwrap();
        assert!((b[0] - 1.0).abs() < 1e-12);
        assert!((b[1] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_indefinite_matrix() {
        let mut a = [1.0, 2.0, 2.0, 1.0];
        let mut b = [0.0, 0.0];
        assert!(cholesky_solve(&mut a, &mut b, 2).is_none());
    }

    #[test]
    fn gram_is_symmetric() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let g = gram(&x, 2);
        assert_eq!(g, alloc::vec![10.0, 14.0, 14.0, 20.0]);
    }
}
