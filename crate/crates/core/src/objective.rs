//! The quadratic surrogate objective in its two equivalent forms.
//!
//! The statistics form `0.5 tr(D^T D (A + kappa1 I)) - tr(D^T B)` is what the
//! dictionary update minimizes; the direct form averages the per-sample
//! losses over a stored trace. They differ by a constant independent of `D`,
//! which makes the pair a useful consistency check.

use ndarray::{Array1, Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::stats::SufficientStats;

/// `0.5 tr(D^T D (A + kappa1 I)) - tr(D^T B)`.
pub fn objective_from_stats(
    d: &ArrayView2<f64>,
    stats: &SufficientStats,
    ridge_kappa1: f64,
) -> Result<f64> {
    let (m, k) = d.dim();
    if stats.k() != k || stats.m() != m {
        return Err(Error::DimensionMismatch(format!(
            "dictionary is {m}x{k} but stats expect {}x{}",
            stats.m(),
            stats.k()
        )));
    }
    if stats.t < 1 {
        return Err(Error::InvalidState(
            "objective_from_stats needs at least one observed sample".into(),
        ));
    }
    let gram = d.t().dot(d);
    let mut quad = 0.0;
    for p in 0..k {
        for q in 0..k {
            quad += gram[[p, q]] * stats.a[[q, p]];
        }
        quad += gram[[p, p]] * ridge_kappa1;
    }
    let mut linear = 0.0;
    for p in 0..k {
        for r in 0..m {
            linear += d[[r, p]] * stats.b[[r, p]];
        }
    }
    Ok(0.5 * quad - linear)
}

/// `(1/t) sum_n [ 0.5 ||x_n - D alpha_n||^2 + lambda ||alpha_n||_1 ]` over a
/// stored trace of samples and their historical coefficients.
pub fn surrogate_direct(
    d: &ArrayView2<f64>,
    samples: &[Array1<f64>],
    alphas: &[Array1<f64>],
    lambda: f64,
) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptyInput("surrogate_direct needs >= 1 sample"));
    }
    if samples.len() != alphas.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} samples but {} coefficient vectors",
            samples.len(),
            alphas.len()
        )));
    }
    let (m, k) = d.dim();
    let mut total = 0.0;
    for (x, alpha) in samples.iter().zip(alphas) {
        if x.len() != m || alpha.len() != k {
            return Err(Error::DimensionMismatch(format!(
                "sample of length {} / alpha of length {} against a {m}x{k} dictionary",
                x.len(),
                alpha.len()
            )));
        }
        let recon = d.dot(alpha);
        let resid: f64 = x
            .iter()
            .zip(recon.iter())
            .map(|(xi, ri)| (xi - ri) * (xi - ri))
            .sum();
        let l1: f64 = alpha.iter().map(|v| v.abs()).sum();
        total += 0.5 * resid + lambda * l1;
    }
    Ok(total / samples.len() as f64)
}

/// Statistics accumulated directly from a trace, without the streaming
/// recursion. Test and diagnostic helper.
pub fn stats_from_trace(
    samples: &[Array1<f64>],
    alphas: &[Array1<f64>],
    lambda: f64,
    m: usize,
    k: usize,
) -> Result<SufficientStats> {
    if samples.is_empty() {
        return Err(Error::EmptyInput("stats_from_trace needs >= 1 sample"));
    }
    if samples.len() != alphas.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} samples but {} coefficient vectors",
            samples.len(),
            alphas.len()
        )));
    }
    let t = samples.len() as f64;
    let mut a = Array2::<f64>::zeros((k, k));
    let mut b = Array2::<f64>::zeros((m, k));
    let mut loss_const = 0.0;
    for (x, alpha) in samples.iter().zip(alphas) {
        for i in 0..k {
            for j in 0..k {
                a[[i, j]] += alpha[i] * alpha[j];
            }
        }
        for i in 0..m {
            for j in 0..k {
                b[[i, j]] += x[i] * alpha[j];
            }
        }
        loss_const += 0.5 * x.dot(x) + lambda * alpha.iter().map(|v| v.abs()).sum::<f64>();
    }
    a /= t;
    b /= t;
    loss_const /= t;
    Ok(SufficientStats {
        a,
        b,
        t: samples.len() as u64,
        loss_const,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::prelude::*;

    #[test]
    fn zero_dictionary_gives_zero() {
        let mut stats = SufficientStats::zeros(3, 2);
        stats.t = 1;
        stats.a[[0, 0]] = 2.0;
        stats.b[[1, 1]] = 3.0;
        let d = Array2::<f64>::zeros((3, 2));
        assert_eq!(objective_from_stats(&d.view(), &stats, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn scalar_case_matches_expansion() {
        // k=1, m=1, A=[1], B=[2]: objective is d^2/2 - 2d, so -2 at d=2.
        let mut stats = SufficientStats::zeros(1, 1);
        stats.t = 1;
        stats.a[[0, 0]] = 1.0;
        stats.b[[0, 0]] = 2.0;
        let d = array![[2.0]];
        let v = objective_from_stats(&d.view(), &stats, 0.0).unwrap();
        assert!((v + 2.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_unseeded_stats_and_bad_dims() {
        let stats = SufficientStats::zeros(3, 2);
        let d = Array2::<f64>::zeros((3, 2));
        assert!(objective_from_stats(&d.view(), &stats, 0.0).is_err());
        let mut stats = SufficientStats::zeros(3, 2);
        stats.t = 1;
        let d_bad = Array2::<f64>::zeros((2, 2));
        assert!(objective_from_stats(&d_bad.view(), &stats, 0.0).is_err());
    }

    #[test]
    fn surrogate_single_sample_zero_alpha() {
        let d = array![[1.0, 0.0], [0.0, 1.0]];
        let x = array![3.0, 4.0];
        let alpha = array![0.0, 0.0];
        let v = surrogate_direct(&d.view(), &[x], &[alpha], 7.5).unwrap();
        assert!((v - 12.5).abs() < 1e-15);
    }

    #[test]
    fn surrogate_exact_reconstruction_is_zero() {
        let d = array![[1.0, 2.0], [0.0, 1.0]];
        let alpha = array![0.5, 2.0];
        let x = d.dot(&alpha);
        let v = surrogate_direct(&d.view(), &[x], &[alpha], 0.0).unwrap();
        assert!(v.abs() < 1e-15);
    }

    #[test]
    fn surrogate_rejects_empty_and_mismatched() {
        let d = array![[1.0]];
        assert!(surrogate_direct(&d.view(), &[], &[], 0.0).is_err());
        let x = array![1.0];
        assert!(surrogate_direct(&d.view(), &[x], &[], 0.0).is_err());
    }

    /// The two forms must differ by `loss_const` exactly: the statistics form
    /// plus the tracked constant equals the direct sum, for any `D`.
    #[test]
    fn stats_form_matches_direct_sum_on_random_instances() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        for _ in 0..20 {
            let (m, k, n) = (3, 2, 17);
            let samples: Vec<Array1<f64>> = (0..n)
                .map(|_| Array1::from_shape_fn(m, |_| rng.random::<f64>() * 2.0 - 1.0))
                .collect();
            let alphas: Vec<Array1<f64>> = (0..n)
                .map(|_| Array1::from_shape_fn(k, |_| rng.random::<f64>() * 2.0 - 1.0))
                .collect();
            let lambda = 0.17;
            let stats = stats_from_trace(&samples, &alphas, lambda, m, k).unwrap();
            let d = Array2::from_shape_fn((m, k), |_| rng.random::<f64>() * 2.0 - 1.0);
            let direct = surrogate_direct(&d.view(), &samples, &alphas, lambda).unwrap();
            let from_stats = objective_from_stats(&d.view(), &stats, 0.0).unwrap();
            assert!(
                (direct - (from_stats + stats.loss_const)).abs() < 1e-10,
                "direct {direct} vs stats {from_stats} + const {}",
                stats.loss_const
            );
        }
    }

    /// The difference of the two forms is a constant in `D`.
    #[test]
    fn difference_is_constant_in_d() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let (m, k, n) = (4, 3, 11);
        let samples: Vec<Array1<f64>> = (0..n)
            .map(|_| Array1::from_shape_fn(m, |_| rng.random::<f64>()))
            .collect();
        let alphas: Vec<Array1<f64>> = (0..n)
            .map(|_| Array1::from_shape_fn(k, |_| rng.random::<f64>() - 0.5))
            .collect();
        let lambda = 0.05;
        let stats = stats_from_trace(&samples, &alphas, lambda, m, k).unwrap();
        let mut diffs = Vec::new();
        for _ in 0..2 {
            let d = Array2::from_shape_fn((m, k), |_| rng.random::<f64>() * 4.0 - 2.0);
            let direct = surrogate_direct(&d.view(), &samples, &alphas, lambda).unwrap();
            let quad = objective_from_stats(&d.view(), &stats, 0.0).unwrap();
            diffs.push(direct - quad);
        }
        assert!((diffs[0] - diffs[1]).abs() < 1e-9);
    }
}
