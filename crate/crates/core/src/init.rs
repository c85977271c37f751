//! Initialization: buffer a fixed number of samples, cluster them with
//! K-means, and derive the starting dictionary and representative sets.
//!
//! The cluster sizes found here become the fixed capacities of the
//! representative sets for the rest of the stream. Each initial dictionary
//! column is its cluster's mean, i.e. the uniform convex combination of that
//! cluster's samples, so the hull invariant holds exactly from step zero.

use ndarray::{Array2, ArrayView2};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::ModelConfig;
use crate::dictionary::{Dictionary, RepresentativeSet};
use crate::error::{Error, Result};
use crate::linalg::sq_dist;

/// Output of the initialization pass.
#[derive(Debug, Clone)]
pub struct InitResult {
    /// Initial dictionary: column i is the mean of cluster i.
    pub dictionary: Dictionary,
    /// One representative set per cluster, holding that cluster's samples.
    pub rep_sets: Vec<RepresentativeSet>,
    /// N x k cluster indicator matrix (one 1 per row).
    pub indicator: Array2<f64>,
    /// Cluster sizes; these are the representative-set capacities.
    pub sizes: Vec<usize>,
    /// Cluster index per buffered sample.
    pub assignments: Vec<usize>,
}

/// Lloyd's algorithm with k-means++ seeding. Returns one cluster index per
/// column of `x`. Deterministic for a given seed; ties break toward the
/// smaller index; empty clusters are repaired by donating the point farthest
/// from its centroid.
pub fn kmeans(x: &ArrayView2<f64>, k: usize, seed: u64, max_iter: usize) -> Result<Vec<usize>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    kmeans_with_rng(x, k, &mut rng, max_iter)
}

pub(crate) fn kmeans_with_rng(
    x: &ArrayView2<f64>,
    k: usize,
    rng: &mut ChaCha8Rng,
    max_iter: usize,
) -> Result<Vec<usize>> {
    let n = x.ncols();
    let m = x.nrows();
    if k == 0 {
        return Err(Error::InvalidConfig("k must be >= 1".into()));
    }
    if n < k {
        return Err(Error::InsufficientSamples { needed: k, got: n });
    }

    let mut centroids = plus_plus_seeds(x, k, rng);
    let mut assignments = vec![0usize; n];
    for _ in 0..max_iter {
        let new_assignments = assign_all(x, &centroids);
        let repaired = repair_empty_clusters(x, &centroids, new_assignments, k)?;
        let changed = repaired != assignments;
        assignments = repaired;
        // Update step: centroids become cluster means.
        let mut counts = vec![0usize; k];
        centroids.fill(0.0);
        for (col, &c) in assignments.iter().enumerate() {
            counts[c] += 1;
            for r in 0..m {
                centroids[[r, c]] += x[[r, col]];
            }
        }
        for c in 0..k {
            let count = counts[c].max(1) as f64;
            for r in 0..m {
                centroids[[r, c]] /= count;
            }
        }
        if !changed {
            break;
        }
    }
    Ok(assignments)
}

/// k-means++ seeding: first centroid uniform, the rest weighted by squared
/// distance to the nearest chosen centroid.
fn plus_plus_seeds(x: &ArrayView2<f64>, k: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let n = x.ncols();
    let m = x.nrows();
    let mut centroids = Array2::<f64>::zeros((m, k));
    let first = rng.random_range(0..n);
    centroids.column_mut(0).assign(&x.column(first));
    let mut min_sq: Vec<f64> = (0..n)
        .map(|i| sq_dist(&x.column(i), &centroids.column(0)))
        .collect();
    for c in 1..k {
        let total: f64 = min_sq.iter().sum();
        let chosen = if total <= 0.0 {
            // All points coincide with a centroid; fall back to uniform.
            rng.random_range(0..n)
        } else {
            let mut target = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, &w) in min_sq.iter().enumerate() {
                target -= w;
                if target <= 0.0 {
                    pick = i;
                    break;
                }
            }
            pick
        };
        centroids.column_mut(c).assign(&x.column(chosen));
        for i in 0..n {
            let d = sq_dist(&x.column(i), &centroids.column(c));
            if d < min_sq[i] {
                min_sq[i] = d;
            }
        }
    }
    centroids
}

fn assign_all(x: &ArrayView2<f64>, centroids: &Array2<f64>) -> Vec<usize> {
    let n = x.ncols();
    let k = centroids.ncols();
    (0..n)
        .map(|i| {
            let mut best = 0usize;
            let mut best_d = f64::INFINITY;
            for c in 0..k {
                let d = sq_dist(&x.column(i), &centroids.column(c));
                if d < best_d {
                    best_d = d;
                    best = c;
                }
            }
            best
        })
        .collect()
}

/// Moves the point farthest from its centroid into each empty cluster, taken
/// from a cluster that still has at least two members. Retries up to `k`
/// times before giving up.
fn repair_empty_clusters(
    x: &ArrayView2<f64>,
    centroids: &Array2<f64>,
    mut assignments: Vec<usize>,
    k: usize,
) -> Result<Vec<usize>> {
    for _attempt in 0..k {
        let mut counts = vec![0usize; k];
        for &c in &assignments {
            counts[c] += 1;
        }
        let empty = match counts.iter().position(|&c| c == 0) {
            Some(e) => e,
            None => return Ok(assignments),
        };
        let mut donor: Option<usize> = None;
        let mut worst = -1.0f64;
        for (i, &c) in assignments.iter().enumerate() {
            if counts[c] < 2 {
                continue;
            }
            let d = sq_dist(&x.column(i), &centroids.column(c));
            if d > worst {
                worst = d;
                donor = Some(i);
            }
        }
        match donor {
            Some(i) => assignments[i] = empty,
            None => {
                return Err(Error::InvalidState(
                    "cannot repair empty cluster: no cluster has two members".into(),
                ))
            }
        }
    }
    let mut counts = vec![0usize; k];
    for &c in &assignments {
        counts[c] += 1;
    }
    if counts.iter().any(|&c| c == 0) {
        return Err(Error::InvalidState(
            "empty cluster remains after repair attempts".into(),
        ));
    }
    Ok(assignments)
}

/// Runs K-means on the buffered samples and assembles the initial model
/// state. `x` must hold exactly `config.init_sample_count` columns.
pub fn initialize(x: &ArrayView2<f64>, config: &ModelConfig) -> Result<InitResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    initialize_with_rng(x, config, &mut rng)
}

pub(crate) const KMEANS_MAX_ITER: usize = 100;

pub(crate) fn initialize_with_rng(
    x: &ArrayView2<f64>,
    config: &ModelConfig,
    rng: &mut ChaCha8Rng,
) -> Result<InitResult> {
    config.validate()?;
    let n = x.ncols();
    if n != config.init_sample_count {
        return Err(Error::DimensionMismatch(format!(
            "initialization buffer has {n} samples, config.init_sample_count is {}",
            config.init_sample_count
        )));
    }
    if x.nrows() != config.m {
        return Err(Error::DimensionMismatch(format!(
            "samples have dimension {}, config.m is {}",
            x.nrows(),
            config.m
        )));
    }
    let k = config.k;
    let assignments = kmeans_with_rng(x, k, rng, KMEANS_MAX_ITER)?;

    let mut sizes = vec![0usize; k];
    for &c in &assignments {
        sizes[c] += 1;
    }
    debug_assert!(sizes.iter().all(|&s| s >= 1));

    let mut indicator = Array2::<f64>::zeros((n, k));
    for (row, &c) in assignments.iter().enumerate() {
        indicator[[row, c]] = 1.0;
    }

    let mut rep_sets = Vec::with_capacity(k);
    for c in 0..k {
        let mut samples = Array2::<f64>::zeros((config.m, sizes[c]));
        let mut slot = 0;
        for (col, &a) in assignments.iter().enumerate() {
            if a == c {
                samples.column_mut(slot).assign(&x.column(col));
                slot += 1;
            }
        }
        rep_sets.push(RepresentativeSet::new(samples)?);
    }

    // Uniform weights make each column exactly its cluster mean, matching
    // X H diag(1/N_1..1/N_k).
    let dictionary = Dictionary::uniform(&rep_sets)?;

    Ok(InitResult {
        dictionary,
        rep_sets,
        indicator,
        sizes,
        assignments,
    })
}

/// Within-cluster sum of squares for a given assignment; used to check that
/// Lloyd iterations do not regress.
pub fn wcss(x: &ArrayView2<f64>, assignments: &[usize], k: usize) -> f64 {
    let m = x.nrows();
    let n = x.ncols();
    let mut sums = Array2::<f64>::zeros((m, k));
    let mut counts = vec![0usize; k];
    for (i, &c) in assignments.iter().enumerate() {
        counts[c] += 1;
        for r in 0..m {
            sums[[r, c]] += x[[r, i]];
        }
    }
    for c in 0..k {
        let count = counts[c].max(1) as f64;
        for r in 0..m {
            sums[[r, c]] /= count;
        }
    }
    (0..n)
        .map(|i| sq_dist(&x.column(i), &sums.column(assignments[i])))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;

    #[test]
    fn n_equals_k_gives_singleton_clusters() {
        let x = array![[0.0, 10.0, -5.0], [0.0, 10.0, 5.0]];
        let a = kmeans(&x.view(), 3, 7, 100).unwrap();
        let mut seen = a.clone();
        seen.sort_unstable();
        assert_eq!(seen, vec![0, 1, 2]);
    }

    #[test]
    fn separated_pairs_group_together() {
        let x = array![[0.0, 0.1, 10.0, 10.1], [0.0, 0.1, 10.0, 10.1]];
        let a = kmeans(&x.view(), 2, 3, 100).unwrap();
        assert_eq!(a[0], a[1]);
        assert_eq!(a[2], a[3]);
        assert_ne!(a[0], a[2]);
    }

    #[test]
    fn seeded_runs_are_identical() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let x = Array2::from_shape_fn((4, 40), |_| rng.random::<f64>() * 10.0);
        let a = kmeans(&x.view(), 5, 11, 100).unwrap();
        let b = kmeans(&x.view(), 5, 11, 100).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn too_few_samples_is_an_error() {
        let x = array![[1.0, 2.0]];
        assert!(matches!(
            kmeans(&x.view(), 3, 0, 10),
            Err(Error::InsufficientSamples { .. })
        ));
    }

    #[test]
    fn lloyd_never_increases_wcss() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        let x = Array2::from_shape_fn((3, 60), |_| rng.random::<f64>() * 4.0);
        // Run kmeans with increasing iteration caps; WCSS must be
        // non-increasing along the Lloyd trajectory.
        let mut last = f64::INFINITY;
        for iters in 1..10 {
            let a = kmeans(&x.view(), 4, 9, iters).unwrap();
            let w = wcss(&x.view(), &a, 4);
            assert!(w <= last + 1e-9, "wcss went {last} -> {w} at {iters}");
            last = w;
        }
    }

    #[test]
    fn repair_fills_empty_cluster() {
        // Two distinct values, k=3: one cluster must be repaired or the
        // whole run errors; with distinct points repair must succeed.
        let x = array![[0.0, 0.0, 0.1, 10.0, 10.0, 10.1]];
        let a = kmeans(&x.view(), 3, 1, 100).unwrap();
        let mut counts = [0usize; 3];
        for &c in &a {
            counts[c] += 1;
        }
        assert!(counts.iter().all(|&c| c >= 1), "counts {counts:?}");
    }

    #[test]
    fn initialize_produces_cluster_means() {
        let mut cfg = ModelConfig::new(2, 2);
        cfg.init_sample_count = 3;
        cfg.seed = 13;
        let x = array![[0.0, 0.0, 10.0], [0.0, 2.0, 10.0]];
        let init = initialize(&x.view(), &cfg).unwrap();
        let d = init.dictionary.columns();
        let mut cols: Vec<Vec<f64>> = (0..2).map(|i| d.column(i).to_vec()).collect();
        cols.sort_by(|a, b| a[0].partial_cmp(&b[0]).unwrap());
        assert_eq!(cols[0], vec![0.0, 1.0]);
        assert_eq!(cols[1], vec![10.0, 10.0]);
        assert_eq!(init.sizes.iter().sum::<usize>(), 3);
        init.dictionary.validate(&init.rep_sets).unwrap();
    }

    /// Group-by-label mean oracle on random data: D0 must equal
    /// X H diag(1/N_i) and the indicator must be consistent.
    #[test]
    fn indicator_and_means_match_direct_grouping() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(23);
        let n = 30;
        let mut cfg = ModelConfig::new(3, 4);
        cfg.init_sample_count = n;
        cfg.seed = 29;
        let x = Array2::from_shape_fn((4, n), |_| rng.random::<f64>() * 20.0);
        let init = initialize(&x.view(), &cfg).unwrap();

        for row in init.indicator.rows() {
            assert_eq!(row.iter().filter(|&&v| v == 1.0).count(), 1);
            assert_eq!(row.sum(), 1.0);
        }
        for c in 0..3 {
            let col_sum: f64 = init.indicator.column(c).sum();
            assert_eq!(col_sum as usize, init.sizes[c]);
        }
        // D0 = X H diag(1/N_i), computed independently.
        let h = &init.indicator;
        let xh = x.dot(h);
        for c in 0..3 {
            for r in 0..4 {
                let expected = xh[[r, c]] / init.sizes[c] as f64;
                let got = init.dictionary.columns()[[r, c]];
                assert!((expected - got).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn k_one_gives_global_mean() {
        let mut cfg = ModelConfig::new(1, 2);
        cfg.init_sample_count = 4;
        let x = array![[1.0, 3.0, 5.0, 7.0], [0.0, 2.0, 4.0, 6.0]];
        let init = initialize(&x.view(), &cfg).unwrap();
        assert_eq!(init.sizes, vec![4]);
        let d = init.dictionary.columns();
        assert!((d[[0, 0]] - 4.0).abs() < 1e-12);
        assert!((d[[1, 0]] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn initialize_rejects_wrong_buffer_size() {
        let cfg = ModelConfig::new(2, 2);
        let x = Array2::<f64>::zeros((2, 10));
        assert!(initialize(&x.view(), &cfg).is_err());
    }
}
