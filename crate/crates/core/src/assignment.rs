//! Minimum-cost bipartite assignment (Hungarian method with potentials).
//!
//! Used by the metrics to pair detections with references per frame and
//! class. Instances there are tiny (bounded by the scene polyphony), so the
//! O(n²m) version is more than enough.

use alloc::vec;
use alloc::vec::Vec;

/// Solves the rectangular assignment problem on a row-major `rows x cols`
/// cost matrix. Returns `min(rows, cols)` pairs `(row, col)`, sorted by row,
/// whose total cost is minimal. Costs must be finite.
pub fn min_cost_assignment(costs: &[f64], rows: usize, cols: usize) -> Vec<(usize, usize)> {
    assert_eq!(costs.len(), rows * cols, "cost matrix shape mismatch");
    debug_assert!(costs.iter().all(|c| c.is_finite()), "costs must be finite");
    if rows == 0 || cols == 0 {
        return Vec::new();
    }
    if rows <= cols {
        solve(costs, rows, cols, false)
    } else {
        // Transpose so the augmenting loop always runs over the smaller side.
        let mut t = vec![0.0; rows * cols];
        for r in 0..rows {
            for c in 0..cols {
                t[c * rows + r] = costs[r * cols + c];
            }
        }
        solve(&t, cols, rows, true)
    }
}

/// Potential-based Hungarian algorithm; requires `rows <= cols`. Index 0 of
/// the internal arrays is a virtual column used to seed each augmentation.
fn solve(costs: &[f64], rows: usize, cols: usize, transposed: bool) -> Vec<(usize, usize)> {
    let n = rows;
    let m = cols;
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; m + 1];
    // matched_row[j] = 1-based row currently assigned to 1-based column j.
    let mut matched_row = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];

    for i in 1..=n {
        matched_row[0] = i;
        let mut j0 = 0usize;
        let mut min_to = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = matched_row[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = costs[(i0 - 1) * m + (j - 1)] - u[i0] - v[j];
                if cur < min_to[j] {
                    min_to[j] = cur;
                    way[j] = j0;
                }
                if min_to[j] < delta {
                    delta = min_to[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[matched_row[j]] += delta;
                    v[j] -= delta;
                } else {
                    min_to[j] -= delta;
                }
            }
            j0 = j1;
            if matched_row[j0] == 0 {
                break;
            }
        }
        // Unwind the augmenting path.
        while j0 != 0 {
            let j1 = way[j0];
            matched_row[j0] = matched_row[j1];
            j0 = j1;
        }
    }

    let mut pairs = Vec::with_capacity(n);
    for j in 1..=m {
        if matched_row[j] != 0 {
            let (r, c) = (matched_row[j] - 1, j - 1);
            pairs.push(if transposed { (c, r) } else { (r, c) });
        }
    }
    pairs.sort_unstable();
    pairs
}
