//! Minimum-cost assignment on a square matrix via the O(n^3) Hungarian
//! algorithm with potentials.

use ndarray::ArrayView2;

/// Returns the row-to-column assignment minimizing the total cost, plus the
/// total. Costs may be negative.
pub fn min_cost_assignment(cost: &ArrayView2<f64>) -> (Vec<usize>, f64) {
    let n = cost.nrows();
    assert_eq!(n, cost.ncols(), "cost matrix must be square");
    assert!(n > 0, "cost matrix must be non-empty");

    // 1-based arrays; p[j] holds the row matched to column j, 0 = free.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[[i0 - 1, j - 1]] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut row_to_col = vec![0usize; n];
    for j in 1..=n {
        if p[j] > 0 {
            row_to_col[p[j] - 1] = j - 1;
        }
    }
    let total = (0..n).map(|r| cost[[r, row_to_col[r]]]).sum();
    (row_to_col, total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};
    use rand::prelude::*;

    fn brute_force(cost: &Array2<f64>) -> f64 {
        let n = cost.nrows();
        let mut cols: Vec<usize> = (0..n).collect();
        let mut best = f64::INFINITY;
        permute(&mut cols, 0, &mut |perm| {
            let total: f64 = (0..n).map(|r| cost[[r, perm[r]]]).sum();
            if total < best {
                best = total;
            }
        });
        best
    }

    fn permute(items: &mut Vec<usize>, start: usize, visit: &mut impl FnMut(&[usize])) {
        if start == items.len() {
            visit(items);
            return;
        }
        for i in start..items.len() {
            items.swap(start, i);
            permute(items, start + 1, visit);
            items.swap(start, i);
        }
    }

    #[test]
    fn two_by_two_cross_costs() {
        let cost = array![[1.0, 2.0], [2.0, 1.0]];
        let (assign, total) = min_cost_assignment(&cost.view());
        assert_eq!(assign, vec![0, 1]);
        assert_eq!(total, 2.0);
    }

    #[test]
    fn matches_brute_force_on_random_matrices() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(13);
        for _ in 0..50 {
            let n = rng.random_range(1..6);
            let cost = Array2::from_shape_fn((n, n), |_| rng.random::<f64>() * 4.0 - 2.0);
            let (_, total) = min_cost_assignment(&cost.view());
            let expected = brute_force(&cost);
            assert!(
                (total - expected).abs() < 1e-10,
                "hungarian {total} vs brute force {expected}"
            );
        }
    }
}
