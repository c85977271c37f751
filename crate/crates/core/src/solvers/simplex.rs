//! Euclidean projection onto the probability simplex.

use ndarray::{Array1, ArrayView1};

/// Projects `v` onto `{ w : w >= 0, sum(w) = 1 }` by the sort-based exact
/// algorithm, O(N log N).
pub fn project_simplex(v: &ArrayView1<f64>) -> Array1<f64> {
    let mut out = v.to_owned();
    let mut scratch = Vec::with_capacity(v.len());
    project_simplex_in_place(&mut out, &mut scratch);
    out
}

/// In-place variant for hot loops; `scratch` is reused sort space.
pub(crate) fn project_simplex_in_place(v: &mut Array1<f64>, scratch: &mut Vec<f64>) {
    debug_assert!(v.iter().all(|x| x.is_finite()), "input must be finite");
    let n = v.len();
    assert!(n > 0, "cannot project an empty vector");
    if n == 1 {
        v[0] = 1.0;
        return;
    }
    scratch.clear();
    scratch.extend(v.iter().copied());
    scratch.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (i, &ui) in scratch.iter().enumerate() {
        cumsum += ui;
        let candidate = (cumsum - 1.0) / (i + 1) as f64;
        if ui - candidate > 0.0 {
            theta = candidate;
        }
    }
    v.mapv_inplace(|x| (x - theta).max(0.0));
}
