//! Center-matching distance: minimum over permutations of the Euclidean norm
//! of the concatenated center differences, computed exactly via a dense
//! Hungarian assignment on squared distances.

use super::{sq_dist, CenterSet};
use crate::error::{Error, Result};

/// d_W(C, C2): sqrt of the minimal sum of squared center distances over all
/// one-to-one matchings. Symmetric; zero iff the multisets coincide.
pub fn wasserstein(a: &CenterSet, b: &CenterSet) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::CardinalityMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    let k = a.len();
    let mut costs = vec![vec![0.0f64; k]; k];
    for i in 0..k {
        for j in 0..k {
            costs[i][j] = sq_dist(a.center(i), b.center(j));
        }
    }
    let (total, _) = hungarian_min_cost(&costs);
    Ok(total.max(0.0).sqrt())
}

/// Dense O(k^3) Hungarian algorithm over real costs. Returns the minimal
/// total cost and, for each row, the column it is assigned to.
pub fn hungarian_min_cost(costs: &[Vec<f64>]) -> (f64, Vec<usize>) {
    let n = costs.len();
    if n == 0 {
        return (0.0, Vec::new());
    }
    debug_assert!(costs.iter().all(|row| row.len() == n));

    // potentials u/v, p[j] = row matched to column j (1-indexed, 0 = none)
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
                let cur = costs[i0 - 1][j - 1] - u[i0] - v[j];
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

    let mut assignment = vec![0usize; n];
    let mut total = 0.0;
    for j in 1..=n {
        if p[j] > 0 {
            assignment[p[j] - 1] = j - 1;
            total += costs[p[j] - 1][j - 1];
        }
    }
    (total, assignment)
}

/// Exhaustive-permutation matching cost; the independent oracle the Hungarian
/// path is cross-checked against in tests (k <= ~8).
pub fn wasserstein_enumerated(a: &CenterSet, b: &CenterSet) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::CardinalityMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    let k = a.len();
    let mut perm: Vec<usize> = (0..k).collect();
    let mut best = f64::INFINITY;
    permute(&mut perm, 0, &mut |p| {
        let total: f64 = (0..k).map(|i| sq_dist(a.center(i), b.center(p[i]))).sum();
        if total < best {
            best = total;
        }
    });
    Ok(best.sqrt())
}

fn permute(perm: &mut Vec<usize>, at: usize, f: &mut impl FnMut(&[usize])) {
    if at == perm.len() {
        f(perm);
        return;
    }
    for i in at..perm.len() {
        perm.swap(at, i);
        permute(perm, at + 1, f);
        perm.swap(at, i);
    }
}
