//! Evaluation metrics: l2 approximation error, permutation-invariant
//! clustering accuracy, basis-to-generator recovery distance, and the
//! surrogate optimality-gap diagnostic.

pub mod assignment;

use ndarray::{Array1, Array2, ArrayView2};

use crate::config::{LassoSettings, QpSettings};
use crate::dictionary::{Dictionary, RepresentativeSet};
use crate::error::{Error, Result};
use crate::objective::{stats_from_trace, surrogate_direct};
use crate::solvers::lasso::sparse_code;
use crate::solvers::qp::block_cd_dictionary;
use assignment::min_cost_assignment;

/// Assignment problems larger than this are refused.
pub const ASSIGNMENT_MAX_K: usize = 64;
/// Longest trace the optimality-gap diagnostic accepts.
pub const DELTA_MAX_T: usize = 5_000;

/// Sparse codes for every column of `x` against `d`, one code per column.
pub fn sparse_code_matrix(
    x: &ArrayView2<f64>,
    d: &ArrayView2<f64>,
    lambda: f64,
    elastic_kappa: f64,
    settings: &LassoSettings,
) -> Result<Array2<f64>> {
    let n = x.ncols();
    let k = d.ncols();
    let mut codes = Array2::<f64>::zeros((k, n));
    for i in 0..n {
        let alpha = sparse_code(&x.column(i), d, lambda, elastic_kappa, settings)?;
        codes.column_mut(i).assign(&alpha);
    }
    Ok(codes)
}

/// `(1/n) || X - D Lambda ||_F` with `Lambda` the per-sample sparse codes
/// against the final dictionary.
pub fn approx_error(
    x: &ArrayView2<f64>,
    d: &ArrayView2<f64>,
    lambda: f64,
    elastic_kappa: f64,
    settings: &LassoSettings,
) -> Result<f64> {
    if x.nrows() != d.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "data dimension {} vs dictionary rows {}",
            x.nrows(),
            d.nrows()
        )));
    }
    if x.ncols() == 0 {
        return Err(Error::EmptyInput("approx_error needs >= 1 sample"));
    }
    let codes = sparse_code_matrix(x, d, lambda, elastic_kappa, settings)?;
    let recon = d.dot(&codes);
    let mut total = 0.0;
    for (a, b) in x.iter().zip(recon.iter()) {
        total += (a - b) * (a - b);
    }
    Ok(total.sqrt() / x.ncols() as f64)
}

/// Cluster prediction per sample: argmax of the sparse code, ties toward the
/// smaller index, with a nearest-column fallback when the code is all zero.
/// This is the same routing rule the restricted online variant uses.
pub fn predict_clusters(
    x: &ArrayView2<f64>,
    d: &ArrayView2<f64>,
    lambda: f64,
    elastic_kappa: f64,
    settings: &LassoSettings,
) -> Result<Vec<usize>> {
    let codes = sparse_code_matrix(x, d, lambda, elastic_kappa, settings)?;
    let k = d.ncols();
    let mut out = Vec::with_capacity(x.ncols());
    for i in 0..x.ncols() {
        let alpha = codes.column(i);
        let pick = if alpha.iter().all(|&a| a == 0.0) {
            let mut best = 0usize;
            let mut best_d = f64::INFINITY;
            for j in 0..k {
                let dist: f64 = x
                    .column(i)
                    .iter()
                    .zip(d.column(j).iter())
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                if dist < best_d {
                    best_d = dist;
                    best = j;
                }
            }
            best
        } else {
            let mut best = 0usize;
            let mut best_v = f64::NEG_INFINITY;
            for (j, &a) in alpha.iter().enumerate() {
                if a > best_v {
                    best_v = a;
                    best = j;
                }
            }
            best
        };
        out.push(pick);
    }
    Ok(out)
}

/// Best agreement between two labelings over all label permutations,
/// computed by optimal assignment on the confusion matrix. Returns a value
/// in [0, 1].
pub fn clustering_accuracy(pred: &[usize], truth: &[usize]) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} predictions vs {} ground-truth labels",
            pred.len(),
            truth.len()
        )));
    }
    if pred.is_empty() {
        return Err(Error::EmptyInput("clustering_accuracy needs >= 1 sample"));
    }
    let k = pred
        .iter()
        .chain(truth.iter())
        .max()
        .map(|&v| v + 1)
        .unwrap_or(1);
    if k > ASSIGNMENT_MAX_K {
        return Err(Error::ResourceGuard {
            what: "label alphabet for permutation matching",
            limit: ASSIGNMENT_MAX_K,
            requested: k,
            hint: "clustering accuracy is defined for small k only",
        });
    }
    let mut confusion = Array2::<f64>::zeros((k, k));
    for (&p, &t) in pred.iter().zip(truth.iter()) {
        confusion[[p, t]] += 1.0;
    }
    // Maximize agreement = minimize negated confusion.
    let neg = confusion.mapv(|v| -v);
    let (_, total) = min_cost_assignment(&neg.view());
    Ok(-total / pred.len() as f64)
}

/// Mean distance between dictionary columns and known generator means under
/// the optimal one-to-one matching.
pub fn basis_recovery(d: &ArrayView2<f64>, means: &ArrayView2<f64>) -> Result<f64> {
    if d.dim() != means.dim() {
        return Err(Error::DimensionMismatch(format!(
            "dictionary is {:?}, means are {:?}",
            d.dim(),
            means.dim()
        )));
    }
    let k = d.ncols();
    if k == 0 {
        return Err(Error::EmptyInput("basis_recovery needs >= 1 column"));
    }
    if k > ASSIGNMENT_MAX_K {
        return Err(Error::ResourceGuard {
            what: "basis count for recovery matching",
            limit: ASSIGNMENT_MAX_K,
            requested: k,
            hint: "basis recovery is defined for small k only",
        });
    }
    let mut cost = Array2::<f64>::zeros((k, k));
    for i in 0..k {
        for j in 0..k {
            cost[[i, j]] = d
                .column(i)
                .iter()
                .zip(means.column(j).iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
        }
    }
    let (_, total) = min_cost_assignment(&cost.view());
    Ok(total / k as f64)
}

/// Optimality gap of the committed dictionary: the surrogate value at `dict`
/// minus the surrogate value after re-optimizing with every column
/// constrained only to the convex hull of all seen samples.
///
/// `hull_samples` must contain every retained representative sample (it is
/// the record of everything the model has seen), so the re-optimization can
/// warm-start exactly at `dict` and the gap is non-negative up to float
/// noise. The inner solve runs unridged: the gap is defined on the plain
/// surrogate.
pub fn delta_diagnostic(
    trace_x: &[Array1<f64>],
    trace_alpha: &[Array1<f64>],
    hull_samples: &ArrayView2<f64>,
    dict: &Dictionary,
    rep_sets: &[RepresentativeSet],
    lambda: f64,
    settings: &QpSettings,
) -> Result<f64> {
    if trace_x.len() > DELTA_MAX_T {
        return Err(Error::ResourceGuard {
            what: "trace length for the optimality-gap diagnostic",
            limit: DELTA_MAX_T,
            requested: trace_x.len(),
            hint: "evaluate the diagnostic earlier in the stream",
        });
    }
    let m = dict.m();
    let k = dict.k();
    let stats = stats_from_trace(trace_x, trace_alpha, lambda, m, k)?;
    let n_all = hull_samples.ncols();

    // Express each current column in hull coordinates by locating its
    // representative samples (bitwise copies of seen samples) in the hull.
    let mut warm_weights: Vec<Array1<f64>> = Vec::with_capacity(k);
    for (rep, w) in rep_sets.iter().zip(dict.weights()) {
        let mut hull_w = Array1::<f64>::zeros(n_all);
        for (slot, &weight) in w.iter().enumerate() {
            let sample = rep.samples().column(slot);
            let found = (0..n_all).find(|&c| hull_samples.column(c) == sample);
            match found {
                Some(c) => hull_w[c] += weight,
                None => {
                    return Err(Error::InvalidState(
                        "hull_samples must contain every representative sample".into(),
                    ))
                }
            }
        }
        warm_weights.push(hull_w);
    }
    let hull_set = RepresentativeSet::new(hull_samples.to_owned())?;
    let hull_sets: Vec<RepresentativeSet> = vec![hull_set; k];
    let warm = Dictionary::from_weights(&hull_sets, warm_weights)?;
    let (relaxed, _) = block_cd_dictionary(&stats, &hull_sets, &warm, 0.0, settings)?;

    let g_restricted = surrogate_direct(&dict.columns().view(), trace_x, trace_alpha, lambda)?;
    let g_relaxed = surrogate_direct(&relaxed.columns().view(), trace_x, trace_alpha, lambda)?;
    Ok(g_restricted - g_relaxed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ModelConfig;
    use ndarray::array;
    use rand::prelude::*;

    fn lasso() -> LassoSettings {
        LassoSettings::default()
    }

    #[test]
    fn approx_error_vanishes_when_dictionary_spans() {
        let d = array![[2.0, 0.0], [0.0, 3.0]];
        let x = array![[1.0, 4.0, -2.0], [5.0, 0.5, 2.5]];
        let err = approx_error(&x.view(), &d.view(), 0.0, 0.0, &lasso()).unwrap();
        assert!(err < 1e-6, "error {err}");
    }

    #[test]
    fn zero_dictionary_gives_scaled_frobenius() {
        let d = Array2::<f64>::zeros((2, 2));
        let x = array![[3.0, 0.0], [4.0, 0.0]];
        let err = approx_error(&x.view(), &d.view(), 0.1, 0.0, &lasso()).unwrap();
        assert!((err - 5.0 / 2.0).abs() < 1e-12);
    }

    /// Per-sample closed-form oracle for a single-column dictionary:
    /// alpha_i = S(d.x_i, lambda) / ||d||^2.
    #[test]
    fn matches_per_sample_soft_threshold_oracle() {
        let d = array![[1.0], [2.0]];
        let x = array![[0.5, -1.0, 2.0, 0.0, 0.3], [1.0, 0.2, -0.4, 0.1, 0.9]];
        let lambda = 0.4;
        let err = approx_error(&x.view(), &d.view(), lambda, 0.0, &lasso()).unwrap();
        let norm_sq = 5.0;
        let mut total = 0.0;
        for i in 0..5 {
            let z = x[[0, i]] + 2.0 * x[[1, i]];
            let shrunk = if z > lambda {
                z - lambda
            } else if z < -lambda {
                z + lambda
            } else {
                0.0
            };
            let alpha = shrunk / norm_sq;
            total += (x[[0, i]] - alpha).powi(2) + (x[[1, i]] - 2.0 * alpha).powi(2);
        }
        let expected = total.sqrt() / 5.0;
        assert!((err - expected).abs() < 1e-8, "{err} vs {expected}");
    }

    #[test]
    fn accuracy_is_one_for_identical_labelings() {
        assert_eq!(clustering_accuracy(&[0, 1, 2, 1], &[0, 1, 2, 1]).unwrap(), 1.0);
    }

    #[test]
    fn accuracy_is_permutation_invariant() {
        let truth = [0, 0, 1, 1, 2, 2];
        let relabeled = [2, 2, 0, 0, 1, 1];
        assert_eq!(clustering_accuracy(&relabeled, &truth).unwrap(), 1.0);
    }

    /// Two labels, two permutations: both give agreement 2/4.
    #[test]
    fn accuracy_half_on_crossed_pairs() {
        let pred = [0, 0, 1, 1];
        let truth = [0, 1, 0, 1];
        assert_eq!(clustering_accuracy(&pred, &truth).unwrap(), 0.5);
    }

    #[test]
    fn accuracy_guard_rejects_huge_alphabets() {
        let pred = vec![ASSIGNMENT_MAX_K; 2];
        let truth = vec![0usize; 2];
        assert!(clustering_accuracy(&pred, &truth).is_err());
    }

    #[test]
    fn accuracy_invariant_under_joint_permutation() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let n = 40;
        let pred: Vec<usize> = (0..n).map(|_| rng.random_range(0..4)).collect();
        let truth: Vec<usize> = (0..n).map(|_| rng.random_range(0..4)).collect();
        let base = clustering_accuracy(&pred, &truth).unwrap();
        // Apply the same index shuffle to both labelings.
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        let pred2: Vec<usize> = order.iter().map(|&i| pred[i]).collect();
        let truth2: Vec<usize> = order.iter().map(|&i| truth[i]).collect();
        assert_eq!(base, clustering_accuracy(&pred2, &truth2).unwrap());
        // Relabel pred's alphabet.
        let relabel = [3, 0, 2, 1];
        let pred3: Vec<usize> = pred.iter().map(|&p| relabel[p]).collect();
        assert_eq!(base, clustering_accuracy(&pred3, &truth).unwrap());
    }

    #[test]
    fn recovery_zero_for_exact_and_permuted_columns() {
        let means = array![[0.0, 10.0], [0.0, 10.0]];
        assert_eq!(basis_recovery(&means.view(), &means.view()).unwrap(), 0.0);
        let permuted = array![[10.0, 0.0], [10.0, 0.0]];
        assert_eq!(basis_recovery(&permuted.view(), &means.view()).unwrap(), 0.0);
    }

    /// Hand instance with cross distances {1,2;2,1}: optimal matching takes
    /// the diagonal, mean distance 1.
    #[test]
    fn recovery_hand_instance() {
        let d = array![[0.0, 3.0]];
        let means = array![[1.0, 2.0]];
        let r = basis_recovery(&d.view(), &means.view()).unwrap();
        assert!((r - 1.0).abs() < 1e-12);
    }

    fn delta_fixture(
        seed: u64,
        t: usize,
    ) -> (
        Vec<Array1<f64>>,
        Vec<Array1<f64>>,
        Array2<f64>,
        Vec<RepresentativeSet>,
        Dictionary,
        f64,
    ) {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let cfg = ModelConfig::new(2, 3);
        let m = cfg.m;
        let k = cfg.k;
        let lambda = 0.05;
        let trace_x: Vec<Array1<f64>> = (0..t)
            .map(|_| Array1::from_shape_fn(m, |_| rng.random::<f64>() * 2.0))
            .collect();
        let mut hull = Array2::<f64>::zeros((m, t + 4));
        for (i, x) in trace_x.iter().enumerate() {
            hull.column_mut(i).assign(x);
        }
        for i in t..t + 4 {
            let extra = Array1::from_shape_fn(m, |_| rng.random::<f64>() * 2.0);
            hull.column_mut(i).assign(&extra);
        }
        // Representative sets: two hull columns each.
        let reps: Vec<RepresentativeSet> = (0..k)
            .map(|i| {
                let mut s = Array2::<f64>::zeros((m, 2));
                s.column_mut(0).assign(&hull.column(2 * i));
                s.column_mut(1).assign(&hull.column(2 * i + 1));
                RepresentativeSet::new(s).unwrap()
            })
            .collect();
        let dict = Dictionary::uniform(&reps).unwrap();
        let trace_alpha: Vec<Array1<f64>> = trace_x
            .iter()
            .map(|x| {
                sparse_code(&x.view(), &dict.columns().view(), lambda, 0.0, &lasso()).unwrap()
            })
            .collect();
        (trace_x, trace_alpha, hull, reps, dict, lambda)
    }

    #[test]
    fn delta_is_nonnegative_on_random_instances() {
        for seed in 0..5 {
            let (tx, ta, hull, reps, dict, lambda) = delta_fixture(seed, 12);
            let delta = delta_diagnostic(
                &tx,
                &ta,
                &hull.view(),
                &dict,
                &reps,
                lambda,
                &QpSettings::default().with_max_sweeps(100),
            )
            .unwrap();
            assert!(delta >= -1e-8, "delta {delta}");
        }
    }

    /// A dictionary already optimal over the full hull has zero gap: make
    /// the hull equal the representative samples so nothing can improve.
    #[test]
    fn delta_zero_when_already_optimal() {
        let (tx, ta, _, reps, dict, lambda) = delta_fixture(9, 10);
        // Hull restricted to exactly the representative samples of column 0..k.
        let m = dict.m();
        let cols: usize = reps.iter().map(|r| r.capacity()).sum();
        let mut hull = Array2::<f64>::zeros((m, cols));
        let mut at = 0;
        for rep in &reps {
            for s in 0..rep.capacity() {
                hull.column_mut(at).assign(&rep.samples().column(s));
                at += 1;
            }
        }
        let settings = QpSettings::default().with_max_sweeps(200);
        let d1 = delta_diagnostic(&tx, &ta, &hull.view(), &dict, &reps, lambda, &settings).unwrap();
        // Re-running from the already-relaxed dictionary cannot improve:
        // delta of the optimum against itself is zero up to solver noise.
        assert!(d1 >= -1e-8);
        let hull_set = RepresentativeSet::new(hull.clone()).unwrap();
        let hull_sets = vec![hull_set; dict.k()];
        let stats = stats_from_trace(&tx, &ta, lambda, m, dict.k()).unwrap();
        let warm = {
            // Project the current dictionary into hull coordinates the same
            // way the diagnostic does, then relax it fully.
            let (relaxed, _) = block_cd_dictionary(
                &stats,
                &hull_sets,
                &Dictionary::uniform(&hull_sets).unwrap(),
                0.0,
                &settings,
            )
            .unwrap();
            relaxed
        };
        let hull_reps: Vec<RepresentativeSet> = hull_sets.clone();
        let d2 = delta_diagnostic(
            &tx,
            &ta,
            &hull.view(),
            &warm,
            &hull_reps,
            lambda,
            &settings,
        )
        .unwrap();
        assert!(d2.abs() <= 1e-8, "gap at optimum should be ~0, got {d2}");
    }

    #[test]
    fn delta_guard_rejects_long_traces() {
        let (tx, ta, hull, reps, dict, lambda) = delta_fixture(1, 4);
        let mut long_x = tx.clone();
        let mut long_a = ta.clone();
        while long_x.len() <= DELTA_MAX_T {
            long_x.extend_from_slice(&tx);
            long_a.extend_from_slice(&ta);
        }
        let err = delta_diagnostic(
            &long_x,
            &long_a,
            &hull.view(),
            &dict,
            &reps,
            lambda,
            &QpSettings::default(),
        );
        assert!(matches!(err, Err(Error::ResourceGuard { .. })));
    }
}
