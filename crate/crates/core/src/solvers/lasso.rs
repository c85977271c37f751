//! Elastic-net sparse coding by cyclic coordinate descent.
//!
//! Minimizes `0.5 ||x - D alpha||^2 + lambda ||alpha||_1 + kappa ||alpha||_2^2`
//! with exact per-coordinate soft-threshold updates. Sweeps stop once no
//! coordinate moves more than `tol`.

use ndarray::{Array1, ArrayView1, ArrayView2};

use crate::config::LassoSettings;
use crate::error::{Error, Result};

fn soft_threshold(z: f64, lambda: f64) -> f64 {
    if z > lambda {
        z - lambda
    } else if z < -lambda {
        z + lambda
    } else {
        0.0
    }
}

/// Solves the sparse-coding problem for one sample against dictionary `d`.
pub fn sparse_code(
    x: &ArrayView1<f64>,
    d: &ArrayView2<f64>,
    lambda: f64,
    elastic_kappa: f64,
    settings: &LassoSettings,
) -> Result<Array1<f64>> {
    let (m, k) = d.dim();
    if x.len() != m {
        return Err(Error::DimensionMismatch(format!(
            "sample has length {}, dictionary rows {m}",
            x.len()
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("sample"));
    }
    if d.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("dictionary"));
    }
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidConfig(format!("lambda must be >= 0, got {lambda}")));
    }
    if !(elastic_kappa >= 0.0) || !elastic_kappa.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "elastic_kappa must be >= 0, got {elastic_kappa}"
        )));
    }

    let col_sq: Vec<f64> = (0..k).map(|j| d.column(j).dot(&d.column(j))).collect();
    let denom: Vec<f64> = col_sq.iter().map(|&s| s + 2.0 * elastic_kappa).collect();

    let mut alpha = Array1::<f64>::zeros(k);
    let mut residual = x.to_owned();
    for _ in 0..settings.max_iter {
        let mut max_change = 0.0f64;
        for j in 0..k {
            if denom[j] <= f64::MIN_POSITIVE {
                // Zero column and no l2 term: the coordinate stays at 0.
                continue;
            }
            let col = d.column(j);
            let z = col.dot(&residual) + alpha[j] * col_sq[j];
            let new = soft_threshold(z, lambda) / denom[j];
            let delta = new - alpha[j];
            if delta != 0.0 {
                for (r, c) in residual.iter_mut().zip(col.iter()) {
                    *r -= delta * c;
                }
                alpha[j] = new;
                max_change = max_change.max(delta.abs());
            }
        }
        if max_change <= settings.tol {
            // Small coordinate moves do not imply small stationarity
            // violations on ill-conditioned designs, so verify before
            // stopping. The fresh residual also clears incremental drift.
            residual = x - &d.dot(&alpha);
            if kkt_residual_with(&residual.view(), d, lambda, elastic_kappa, &alpha.view())
                <= 10.0 * settings.tol
            {
                break;
            }
        }
    }
    Ok(alpha)
}

/// Largest violation of the stationarity conditions at `alpha`:
/// `d_j^T (x - D alpha) - 2 kappa alpha_j` must lie in `[-lambda, lambda]`
/// where `alpha_j = 0` and equal `lambda * sign(alpha_j)` elsewhere.
pub fn kkt_residual(
    x: &ArrayView1<f64>,
    d: &ArrayView2<f64>,
    lambda: f64,
    elastic_kappa: f64,
    alpha: &ArrayView1<f64>,
) -> f64 {
    let residual = x - &d.dot(alpha);
    kkt_residual_with(&residual.view(), d, lambda, elastic_kappa, alpha)
}

fn kkt_residual_with(
    residual: &ArrayView1<f64>,
    d: &ArrayView2<f64>,
    lambda: f64,
    elastic_kappa: f64,
    alpha: &ArrayView1<f64>,
) -> f64 {
    let mut worst = 0.0f64;
    for j in 0..d.ncols() {
        let grad = d.column(j).dot(residual) - 2.0 * elastic_kappa * alpha[j];
        let violation = if alpha[j] == 0.0 {
            (grad.abs() - lambda).max(0.0)
        } else {
            (grad - lambda * alpha[j].signum()).abs()
        };
        worst = worst.max(violation);
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};
    use rand::prelude::*;

    fn settings() -> LassoSettings {
        LassoSettings::default()
    }

    #[test]
    fn identity_design_recovers_sample() {
        let d = Array2::eye(3);
        let x = array![0.3, -1.2, 4.0];
        let alpha = sparse_code(&x.view(), &d.view(), 0.0, 0.0, &settings()).unwrap();
        for (a, b) in alpha.iter().zip(x.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn large_lambda_zeroes_solution() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let d = Array2::from_shape_fn((4, 3), |_| rng.random::<f64>() - 0.5);
        let x = Array1::from_shape_fn(4, |_| rng.random::<f64>() - 0.5);
        let corr_max = (0..3)
            .map(|j| d.column(j).dot(&x).abs())
            .fold(0.0f64, f64::max);
        let alpha = sparse_code(&x.view(), &d.view(), corr_max, 0.0, &settings()).unwrap();
        assert!(alpha.iter().all(|&a| a == 0.0));
    }

    /// Closed-form soft-threshold oracle per coordinate for an identity
    /// design: alpha_j = S(x_j, lambda).
    #[test]
    fn soft_threshold_oracle() {
        let d = Array2::eye(2);
        let x = array![0.5, 0.05];
        let alpha = sparse_code(&x.view(), &d.view(), 0.1, 0.0, &settings()).unwrap();
        assert!((alpha[0] - 0.4).abs() < 1e-12);
        assert_eq!(alpha[1], 0.0);
    }

    /// Analytic elastic-net shrinkage in 1-D: alpha = x / (1 + 2 kappa).
    #[test]
    fn elastic_term_shrinks() {
        let d = array![[1.0]];
        let x = array![1.0];
        let kappa = 0.25;
        let alpha = sparse_code(&x.view(), &d.view(), 0.0, kappa, &settings()).unwrap();
        assert!((alpha[0] - 1.0 / 1.5).abs() < 1e-10);
    }

    #[test]
    fn zero_column_is_skipped() {
        let d = array![[0.0, 1.0], [0.0, 0.0]];
        let x = array![1.0, 1.0];
        let alpha = sparse_code(&x.view(), &d.view(), 0.0, 0.0, &settings()).unwrap();
        assert_eq!(alpha[0], 0.0);
        assert!((alpha[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_non_finite() {
        let d = array![[1.0], [f64::NAN]];
        let x = array![1.0, 1.0];
        assert!(sparse_code(&x.view(), &d.view(), 0.1, 0.0, &settings()).is_err());
        let d = array![[1.0], [0.0]];
        let x = array![f64::INFINITY, 0.0];
        assert!(sparse_code(&x.view(), &d.view(), 0.1, 0.0, &settings()).is_err());
    }

    #[test]
    fn kkt_holds_on_random_instances() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        let s = settings();
        for trial in 0..200 {
            let m = rng.random_range(1..6);
            let k = rng.random_range(1..6);
            let d = Array2::from_shape_fn((m, k), |_| rng.random::<f64>() * 2.0 - 1.0);
            let x = Array1::from_shape_fn(m, |_| rng.random::<f64>() * 2.0 - 1.0);
            let lambda = rng.random::<f64>() * 0.3;
            let kappa = if trial % 2 == 0 { 0.0 } else { 1e-6 };
            let alpha = sparse_code(&x.view(), &d.view(), lambda, kappa, &s).unwrap();
            let resid = kkt_residual(&x.view(), &d.view(), lambda, kappa, &alpha.view());
            assert!(
                resid <= 10.0 * s.tol,
                "trial {trial}: KKT residual {resid}"
            );
        }
    }
}
