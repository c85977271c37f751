//! Small dense linear-algebra helpers for the low-dimensional matrices this
//! crate works with. Nothing here is meant for large inputs.

use ndarray::{Array1, ArrayView1, ArrayView2};

/// Eigenvalues of a symmetric matrix by the cyclic Jacobi method, ascending.
///
/// Intended for the small (k x k) statistics matrices; cost is O(n^3) per
/// sweep.
pub fn symmetric_eigenvalues(m: &ArrayView2<f64>) -> Vec<f64> {
    let n = m.nrows();
    assert_eq!(n, m.ncols(), "matrix must be square");
    if n == 0 {
        return Vec::new();
    }
    if n == 1 {
        return vec![m[[0, 0]]];
    }
    let mut a = m.to_owned();
    let scale: f64 = a.iter().map(|v| v.abs()).fold(0.0, f64::max).max(1.0);
    let tol = 1e-15 * scale;
    for _sweep in 0..64 {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in (p + 1)..n {
                off = off.max(a[[p, q]].abs());
            }
        }
        if off <= tol {
            break;
        }
        for p in 0..n - 1 {
            for q in (p + 1)..n {
                let apq = a[[p, q]];
                if apq.abs() <= tol * 1e-2 {
                    continue;
                }
                let app = a[[p, p]];
                let aqq = a[[q, q]];
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (1.0 + theta * theta).sqrt())
                } else {
                    -1.0 / (-theta + (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for i in 0..n {
                    let aip = a[[i, p]];
                    let aiq = a[[i, q]];
                    a[[i, p]] = c * aip - s * aiq;
                    a[[i, q]] = s * aip + c * aiq;
                }
                for i in 0..n {
                    let api = a[[p, i]];
                    let aqi = a[[q, i]];
                    a[[p, i]] = c * api - s * aqi;
                    a[[q, i]] = s * api + c * aqi;
                }
            }
        }
    }
    let mut eigs: Vec<f64> = (0..n).map(|i| a[[i, i]]).collect();
    eigs.sort_by(|x, y| x.partial_cmp(y).unwrap());
    eigs
}

/// Largest-eigenvalue estimate for a symmetric positive semidefinite
/// operator, via deterministic power iteration.
///
/// `apply` must compute `G v`. The estimate converges from below; callers
/// that need a guaranteed bound pair it with a monotonicity guard.
pub fn power_iteration_psd<F>(n: usize, mut apply: F, max_iter: usize) -> f64
where
    F: FnMut(&ArrayView1<f64>) -> Array1<f64>,
{
    if n == 0 {
        return 0.0;
    }
    // Fixed start with a mild tilt so it is never orthogonal to the top
    // eigenvector of a structured matrix.
    let mut v = Array1::from_shape_fn(n, |i| 1.0 + 1e-3 * ((i % 7) as f64));
    let norm = v.dot(&v).sqrt();
    v.mapv_inplace(|x| x / norm);
    let mut lambda = 0.0f64;
    for _ in 0..max_iter {
        let w = apply(&v.view());
        let new_lambda = v.dot(&w);
        let w_norm = w.dot(&w).sqrt();
        if w_norm <= f64::MIN_POSITIVE {
            return 0.0;
        }
        v = w / w_norm;
        if (new_lambda - lambda).abs() <= 1e-13 * new_lambda.abs().max(1.0) {
            return new_lambda.max(0.0);
        }
        lambda = new_lambda;
    }
    lambda.max(0.0)
}

/// Frobenius norm of the difference of two matrices.
pub fn frobenius_distance(a: &ArrayView2<f64>, b: &ArrayView2<f64>) -> f64 {
    assert_eq!(a.dim(), b.dim());
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Max absolute entry difference of two equally shaped matrices.
pub fn max_abs_diff(a: &ArrayView2<f64>, b: &ArrayView2<f64>) -> f64 {
    assert_eq!(a.dim(), b.dim());
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Squared Euclidean distance between two vectors.
pub fn sq_dist(a: &ArrayView1<f64>, b: &ArrayView1<f64>) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};

    #[test]
    fn eigenvalues_of_diagonal() {
        let d = array![[3.0, 0.0], [0.0, -1.0]];
        let e = symmetric_eigenvalues(&d.view());
        assert!((e[0] + 1.0).abs() < 1e-12);
        assert!((e[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn eigenvalues_of_2x2() {
        // [[2,1],[1,2]] has eigenvalues 1 and 3.
        let a = array![[2.0, 1.0], [1.0, 2.0]];
        let e = symmetric_eigenvalues(&a.view());
        assert!((e[0] - 1.0).abs() < 1e-10);
        assert!((e[1] - 3.0).abs() < 1e-10);
    }

    #[test]
    fn eigenvalue_sum_matches_trace() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let n = rng.random_range(2..8);
            let g = Array2::from_shape_fn((n, n), |_| rng.random::<f64>() - 0.5);
            let sym = &g + &g.t();
            let eigs = symmetric_eigenvalues(&sym.view());
            let trace: f64 = (0..n).map(|i| sym[[i, i]]).sum();
            let sum: f64 = eigs.iter().sum();
            assert!((trace - sum).abs() < 1e-9, "trace {trace} vs sum {sum}");
        }
    }

    #[test]
    fn power_iteration_matches_jacobi_on_gram() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let m = rng.random_range(2..6);
            let n = rng.random_range(2..10);
            let x = Array2::from_shape_fn((m, n), |_| rng.random::<f64>() * 2.0 - 1.0);
            let gram = x.t().dot(&x);
            let top_jacobi = *symmetric_eigenvalues(&gram.view()).last().unwrap();
            let top_power = power_iteration_psd(n, |v| gram.dot(v), 500);
            assert!(
                (top_jacobi - top_power).abs() <= 1e-8 * top_jacobi.max(1.0),
                "jacobi {top_jacobi} power {top_power}"
            );
        }
    }
}
