//! Streaming sufficient statistics.
//!
//! The pair `(A, B)` summarizes every sample/coefficient pair seen so far:
//! `A = avg(alpha alpha^T)` and `B = avg(x alpha^T)`. They are all the
//! dictionary update needs, so memory stays constant as the stream grows.
//! The scalar `loss_const` tracks the running average of the coefficient-
//! independent loss terms so the full surrogate value stays reportable.

use ndarray::{Array2, ArrayView1};

use crate::error::{Error, Result};
use crate::linalg::symmetric_eigenvalues;

/// Tolerance on `|A - A^T|` entries.
pub const SYMMETRY_TOL: f64 = 1e-12;
/// Eigenvalues of `A` may dip this far below zero before we call it broken.
pub const PSD_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct SufficientStats {
    /// k x k running average of `alpha alpha^T`.
    pub a: Array2<f64>,
    /// m x k running average of `x alpha^T`.
    pub b: Array2<f64>,
    /// Number of samples folded in.
    pub t: u64,
    /// Running average of `0.5 ||x||^2 + lambda ||alpha||_1`; added to the
    /// quadratic form this gives the full surrogate value.
    pub loss_const: f64,
}

impl SufficientStats {
    pub fn zeros(m: usize, k: usize) -> Self {
        Self {
            a: Array2::zeros((k, k)),
            b: Array2::zeros((m, k)),
            t: 0,
            loss_const: 0.0,
        }
    }

    pub fn k(&self) -> usize {
        self.a.nrows()
    }

    pub fn m(&self) -> usize {
        self.b.nrows()
    }

    /// Checks symmetry and positive semidefiniteness of `A`.
    pub fn validate(&self) -> Result<()> {
        let (ka, kb) = self.a.dim();
        if ka != kb || self.b.ncols() != ka {
            return Err(Error::DimensionMismatch(format!(
                "stats A is {ka}x{kb}, B is {}x{}",
                self.b.nrows(),
                self.b.ncols()
            )));
        }
        for i in 0..ka {
            for j in (i + 1)..ka {
                if (self.a[[i, j]] - self.a[[j, i]]).abs() > SYMMETRY_TOL {
                    return Err(Error::InvalidState(format!(
                        "A is asymmetric at ({i},{j}): {} vs {}",
                        self.a[[i, j]],
                        self.a[[j, i]]
                    )));
                }
            }
        }
        let eigs = symmetric_eigenvalues(&self.a.view());
        if let Some(min) = eigs.first() {
            if *min < -PSD_TOL {
                return Err(Error::InvalidState(format!(
                    "A has eigenvalue {min} below -{PSD_TOL}"
                )));
            }
        }
        Ok(())
    }
}

/// Folds one `(x, alpha)` pair into the running averages:
/// `A_t = ((t-1) A_{t-1} + alpha alpha^T) / t`, likewise for `B` with
/// `x alpha^T`, and for the constant loss term (which needs `lambda`).
pub fn update_stats(
    stats: &SufficientStats,
    x: &ArrayView1<f64>,
    alpha: &ArrayView1<f64>,
    lambda: f64,
) -> SufficientStats {
    let k = stats.k();
    let m = stats.m();
    debug_assert_eq!(alpha.len(), k);
    debug_assert_eq!(x.len(), m);
    let t_prev = stats.t as f64;
    let t_new = t_prev + 1.0;
    let mut a = stats.a.clone();
    let mut b = stats.b.clone();
    for i in 0..k {
        for j in 0..k {
            a[[i, j]] = (t_prev * a[[i, j]] + alpha[i] * alpha[j]) / t_new;
        }
    }
    for i in 0..m {
        for j in 0..k {
            b[[i, j]] = (t_prev * b[[i, j]] + x[i] * alpha[j]) / t_new;
        }
    }
    let sample_loss = 0.5 * x.dot(x) + lambda * alpha.iter().map(|v| v.abs()).sum::<f64>();
    SufficientStats {
        a,
        b,
        t: stats.t + 1,
        loss_const: (t_prev * stats.loss_const + sample_loss) / t_new,
    }
}
