//! The dictionary and its representative sets.
//!
//! Every dictionary column is stored together with the weight vector that
//! expresses it as a convex combination of the samples retained for that
//! column. Columns are always rebuilt from their weights, so the convex-hull
//! invariant holds by construction and can be re-checked cheaply.

use ndarray::{Array1, Array2, ArrayView1};

use crate::error::{Error, Result};

/// Max Euclidean distance allowed between a stored column and the convex
/// combination its weights describe.
pub const HULL_TOL: f64 = 1e-6;
/// Tolerance on the simplex sum of a weight vector.
pub const SIMPLEX_SUM_TOL: f64 = 1e-9;

/// A fixed-capacity collection of retained data samples whose convex hull
/// constrains one dictionary column.
#[derive(Debug, Clone, PartialEq)]
pub struct RepresentativeSet {
    /// m x N matrix; the column count is fixed at initialization.
    samples: Array2<f64>,
}

impl RepresentativeSet {
    pub fn new(samples: Array2<f64>) -> Result<Self> {
        if samples.ncols() == 0 {
            return Err(Error::EmptyInput("representative set needs >= 1 sample"));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("representative set"));
        }
        Ok(Self { samples })
    }

    pub fn samples(&self) -> &Array2<f64> {
        &self.samples
    }

    /// Fixed capacity (number of retained samples).
    pub fn capacity(&self) -> usize {
        self.samples.ncols()
    }

    pub fn dim(&self) -> usize {
        self.samples.nrows()
    }

    /// The convex combination of the retained samples under `weights`.
    pub fn combine(&self, weights: &ArrayView1<f64>) -> Array1<f64> {
        debug_assert_eq!(weights.len(), self.capacity());
        self.samples.dot(weights)
    }

    /// Copy of this set with column `slot` replaced by `x`.
    pub fn with_replaced(&self, slot: usize, x: &ArrayView1<f64>) -> Self {
        let mut samples = self.samples.clone();
        samples.column_mut(slot).assign(x);
        Self { samples }
    }
}

/// Basis matrix plus, per column, the simplex weights over that column's
/// representative set.
#[derive(Debug, Clone)]
pub struct Dictionary {
    /// m x k basis.
    columns: Array2<f64>,
    /// One weight vector per column, each of its representative set's length.
    weights: Vec<Array1<f64>>,
}

impl Dictionary {
    /// Builds a dictionary by combining each representative set under the
    /// given weights; columns therefore satisfy the hull invariant exactly.
    pub fn from_weights(rep_sets: &[RepresentativeSet], weights: Vec<Array1<f64>>) -> Result<Self> {
        if rep_sets.is_empty() {
            return Err(Error::EmptyInput("dictionary needs >= 1 column"));
        }
        if rep_sets.len() != weights.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} representative sets but {} weight vectors",
                rep_sets.len(),
                weights.len()
            )));
        }
        let m = rep_sets[0].dim();
        let k = rep_sets.len();
        let mut columns = Array2::zeros((m, k));
        for (i, (rep, w)) in rep_sets.iter().zip(&weights).enumerate() {
            check_simplex(&w.view(), rep.capacity())
                .map_err(|e| Error::InfeasibleStart(format!("column {i}: {e}")))?;
            columns.column_mut(i).assign(&rep.combine(&w.view()));
        }
        Ok(Self { columns, weights })
    }

    /// Uniform weights over each representative set (every column is its
    /// set's mean).
    pub fn uniform(rep_sets: &[RepresentativeSet]) -> Result<Self> {
        let weights = rep_sets
            .iter()
            .map(|r| Array1::from_elem(r.capacity(), 1.0 / r.capacity() as f64))
            .collect();
        Self::from_weights(rep_sets, weights)
    }

    pub fn columns(&self) -> &Array2<f64> {
        &self.columns
    }

    pub fn weights(&self) -> &[Array1<f64>] {
        &self.weights
    }

    pub fn k(&self) -> usize {
        self.columns.ncols()
    }

    pub fn m(&self) -> usize {
        self.columns.nrows()
    }

    /// Replaces column `i`'s weights and rebuilds the column from `rep`.
    pub fn set_column(&mut self, i: usize, rep: &RepresentativeSet, weights: Array1<f64>) {
        debug_assert_eq!(weights.len(), rep.capacity());
        self.columns.column_mut(i).assign(&rep.combine(&weights.view()));
        self.weights[i] = weights;
    }

    /// Distance between stored column `i` and the combination its weights
    /// describe over `rep`.
    pub fn hull_residual(&self, i: usize, rep: &RepresentativeSet) -> f64 {
        let rebuilt = rep.combine(&self.weights[i].view());
        self.columns
            .column(i)
            .iter()
            .zip(rebuilt.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    /// Checks every column invariant against its representative set:
    /// matching lengths, simplex feasibility of the weights and the hull
    /// residual bound.
    pub fn validate(&self, rep_sets: &[RepresentativeSet]) -> Result<()> {
        if rep_sets.len() != self.k() {
            return Err(Error::DimensionMismatch(format!(
                "dictionary has {} columns, got {} representative sets",
                self.k(),
                rep_sets.len()
            )));
        }
        for (i, (rep, w)) in rep_sets.iter().zip(&self.weights).enumerate() {
            check_simplex(&w.view(), rep.capacity())
                .map_err(|e| Error::InvalidState(format!("column {i} weights: {e}")))?;
            let residual = self.hull_residual(i, rep);
            if residual > HULL_TOL {
                return Err(Error::InvalidState(format!(
                    "column {i} is {residual} away from its convex combination"
                )));
            }
        }
        Ok(())
    }
}

/// Verifies `w` has the expected length, is non-negative, finite, and sums
/// to one within tolerance.
pub fn check_simplex(w: &ArrayView1<f64>, expected_len: usize) -> Result<()> {
    if w.len() != expected_len {
        return Err(Error::DimensionMismatch(format!(
            "weight vector has length {}, expected {expected_len}",
            w.len()
        )));
    }
    if w.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("weight vector"));
    }
    if let Some(neg) = w.iter().find(|&&v| v < 0.0) {
        return Err(Error::InvalidState(format!(
            "weight vector has negative entry {neg}"
        )));
    }
    let sum: f64 = w.sum();
    if (sum - 1.0).abs() > SIMPLEX_SUM_TOL {
        return Err(Error::InvalidState(format!(
            "weights sum to {sum}, expected 1"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn rep(samples: Array2<f64>) -> RepresentativeSet {
        RepresentativeSet::new(samples).unwrap()
    }

    #[test]
    fn uniform_dictionary_is_set_means() {
        let r1 = rep(array![[0.0, 0.0], [0.0, 2.0]]);
        let r2 = rep(array![[10.0], [10.0]]);
        let d = Dictionary::uniform(&[r1.clone(), r2.clone()]).unwrap();
        assert_eq!(d.columns().column(0).to_vec(), vec![0.0, 1.0]);
        assert_eq!(d.columns().column(1).to_vec(), vec![10.0, 10.0]);
        d.validate(&[r1, r2]).unwrap();
    }

    #[test]
    fn from_weights_rejects_infeasible() {
        let r = rep(array![[1.0, 2.0]]);
        let bad = vec![array![0.5, 0.4]];
        assert!(Dictionary::from_weights(&[r.clone()], bad).is_err());
        let neg = vec![array![1.5, -0.5]];
        assert!(Dictionary::from_weights(&[r], neg).is_err());
    }

    #[test]
    fn replaced_set_keeps_capacity() {
        let r = rep(array![[1.0, 2.0, 3.0]]);
        let x = array![9.0];
        let r2 = r.with_replaced(1, &x.view());
        assert_eq!(r2.capacity(), 3);
        assert_eq!(r2.samples().column(1)[0], 9.0);
        assert_eq!(r2.samples().column(0)[0], 1.0);
    }

    #[test]
    fn validate_catches_drifted_column() {
        let r = rep(array![[1.0, 3.0]]);
        let mut d = Dictionary::uniform(&[r.clone()]).unwrap();
        d.columns[[0, 0]] += 1.0;
        assert!(d.validate(&[r]).is_err());
    }
}
